//! Command-line front end. `run` parses arguments, executes one command and
//! returns the process exit code.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::driver::{build_chain, Budget, FilterChain};
use crate::error::{Error, Result};
use crate::groups::{HSpec, Instance, KElem, ResidueClass, Space, WideGroup};
use crate::poset::Sampling;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupConfig {
    FullQ,
    Localized(Vec<ResidueClass>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HConfig {
    #[serde(default)]
    pub free_rank: usize,
    #[serde(default)]
    pub torsion_orders: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub m: usize,
    pub group: GroupConfig,
    pub h: HConfig,
    pub budget: Budget,
    pub sample_budget: usize,
    pub rng_seed: u64,
}

impl InstanceConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        InstanceConfig::parse(&text)
    }

    pub fn instance(&self) -> Result<Instance> {
        let cfg = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        let h = HSpec::new(self.h.free_rank, self.h.torsion_orders.clone()).map_err(cfg)?;
        let space = Space::new(self.m, h).map_err(cfg)?;
        let group = match &self.group {
            GroupConfig::FullQ => WideGroup::full_q(self.m),
            GroupConfig::Localized(classes) => WideGroup::localized(self.m, classes.clone()).map_err(cfg)?,
        };
        Instance::new(space, group).map_err(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(name = "ssgp", version, about = "Finite stages of an SSGP group topology on G ⊕ H")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a chain of conditions from a JSON config and write it out.
    Build {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Overrides `rng_seed` from the config.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Overrides `sample_budget` from the config.
        #[arg(long, value_name = "N")]
        samples: Option<usize>,
    },
    /// Answer a membership, separation or SSGP query against a chain file.
    Query {
        #[arg(value_enum)]
        kind: QueryKind,
        #[arg(long, value_name = "PATH")]
        chain: PathBuf,
        /// Element literal: q-part fractions, then `;` and h-part residues.
        #[arg(long, value_name = "a/b,...;h", allow_hyphen_values = true)]
        element: String,
        /// Stage level for `member` and `ssgp`.
        #[arg(long, value_name = "N", default_value_t = 0)]
        level: usize,
    },
    /// Run the full check suite on a chain file and print a JSON report.
    Verify {
        #[arg(long, value_name = "PATH")]
        chain: PathBuf,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        #[arg(long, value_name = "N")]
        samples: Option<usize>,
        /// Write the report here instead of standard output.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Summarize a chain file, or print one stage set with `--level`.
    Show {
        #[arg(long, value_name = "PATH")]
        chain: PathBuf,
        #[arg(long, value_name = "N")]
        level: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum QueryKind {
    Member,
    Separate,
    Ssgp,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Certificate(_) | Error::Construction(_) => EXIT_CHECK,
        Error::InsufficientBudget(_) => EXIT_BUDGET,
        Error::Argument(_) | Error::Parse(_) | Error::Config(_) | Error::Io(_) => EXIT_USAGE,
    }
}

/// Runs one command; `args` includes the program name.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Build { config, out, seed, samples } => {
            let mut cfg = InstanceConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.rng_seed = s;
            }
            if let Some(n) = samples {
                cfg.sample_budget = n;
            }
            cmd_build(&cfg, &out)
        }
        Command::Query { kind, chain, element, level } => cmd_query(&FilterChain::load(&chain)?, kind, &element, level),
        Command::Verify { chain, seed, samples, out } => {
            let c = FilterChain::load(&chain)?;
            let smp = Sampling::new(samples.unwrap_or(c.sample_budget), seed.unwrap_or(c.rng_seed));
            cmd_verify(&c, &smp, out.as_deref())
        }
        Command::Show { chain, level } => cmd_show(&FilterChain::load(&chain)?, level),
    }
}

fn print_json(v: &serde_json::Value) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

pub fn cmd_build(cfg: &InstanceConfig, out: &Path) -> Result<i32> {
    let inst = cfg.instance()?;
    let chain = build_chain(&inst, cfg.budget, cfg.rng_seed, cfg.sample_budget)?;
    chain.save(out)?;
    let summary = certificate_summary(&chain);
    let stages: Vec<_> = chain.stage_sets().iter().map(|u| u.term_count()).collect();
    print_json(&json!({
        "chain": out.display().to_string(),
        "conditions": chain.conditions.len(),
        "max_level": chain.max_level(),
        "primes": chain.last().pi,
        "moduli": chain.last().s.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "terms_per_stage": stages,
        "separation_certificates": summary.separated,
        "ssgp_certificates": summary.ssgp,
        "missing": summary.missing,
    }));
    Ok(summary.code)
}

struct CertSummary {
    separated: usize,
    ssgp: usize,
    missing: Vec<String>,
    code: i32,
}

fn certificate_summary(chain: &FilterChain) -> CertSummary {
    let inst = &chain.instance;
    let stages = chain.stage_sets();
    let mut s = CertSummary { separated: 0, ssgp: 0, missing: vec![], code: EXIT_OK };
    let note = |e: Error, s: &mut CertSummary| {
        s.code = s.code.max(exit_code(&e));
        s.missing.push(e.to_string());
    };
    for x in inst.enumerate().take(chain.budget.enum_count) {
        if !x.is_zero() {
            match chain.separation_certificate(&x) {
                Ok(_) => s.separated += 1,
                Err(e) => note(e, &mut s),
            }
        }
        for i in 0..stages.len().min(chain.budget.max_level + 1) {
            match chain.ssgp_certificate(&x, i) {
                Ok(_) => s.ssgp += 1,
                Err(e) => note(e, &mut s),
            }
        }
    }
    s
}

fn parse_element(chain: &FilterChain, lit: &str) -> Result<KElem> {
    let x = chain.instance.space.parse(lit)?;
    if !chain.instance.in_k(&x) {
        return Err(Error::Argument(format!("{lit} is not an element of G ⊕ H")));
    }
    Ok(x)
}

pub fn cmd_query(chain: &FilterChain, kind: QueryKind, element: &str, level: usize) -> Result<i32> {
    let x = parse_element(chain, element)?;
    let answer = match kind {
        QueryKind::Member => {
            let u = chain.stage_set(level).map_err(|e| Error::InsufficientBudget(e.to_string()))?;
            json!({"element": x.literal(), "level": level, "member": u.member(&chain.instance.space, &x)})
        }
        QueryKind::Separate => {
            let n = chain.separation_certificate(&x)?;
            json!({"element": x.literal(), "level": n, "separated": true})
        }
        QueryKind::Ssgp => {
            if level > chain.max_level() {
                return Err(Error::InsufficientBudget(format!("level {level} was never reached")));
            }
            let w = chain.ssgp_certificate(&x, level)?;
            json!({
                "element": x.literal(),
                "level": level,
                "witness_level": w.level,
                "head": w.head.literal(),
                "parts": w.cyclic_parts.iter().map(KElem::literal).collect::<Vec<_>>(),
            })
        }
    };
    print_json(&answer);
    Ok(EXIT_OK)
}

/// The report goes to `out` or stdout and is byte-stable for a fixed seed;
/// timings go to stderr.
pub fn cmd_verify(chain: &FilterChain, smp: &Sampling, out: Option<&Path>) -> Result<i32> {
    let t = Instant::now();
    let mut report = chain.verify_conditions(smp);
    eprintln!("conditions checked in {:.2?}", t.elapsed());
    let t = Instant::now();
    report.extend_prefixed("", chain.verify_stages(smp));
    eprintln!("stage sets checked in {:.2?}", t.elapsed());
    let body = json!({
        "samples": smp.budget,
        "seed": smp.seed,
        "passed": report.passed(),
        "checks": report.checks,
    });
    let mut text = serde_json::to_string_pretty(&body).expect("report serializes");
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_CHECK })
}

pub fn cmd_show(chain: &FilterChain, level: Option<usize>) -> Result<i32> {
    if let Some(i) = level {
        let u = chain.stage_set(i).map_err(|e| Error::InsufficientBudget(e.to_string()))?;
        print_json(&serde_json::to_value(&u).expect("stage serializes"));
        return Ok(EXIT_OK);
    }
    let sp = &chain.instance.space;
    let last = chain.last();
    println!("m = {}, H = Z^{} ⊕ {:?}", sp.m, sp.h.free_rank, sp.h.torsion_orders);
    println!("group: {:?}", chain.instance.group.kind);
    println!("budget: max_level {}, enum_count {}", chain.budget.max_level, chain.budget.enum_count);
    println!("conditions: {}", chain.conditions.len());
    println!("π = {}", last.pi);
    println!("s = [{}]", last.s.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", "));
    for (i, u) in chain.stage_sets().iter().enumerate() {
        println!("U_{i}: {} terms", u.term_count());
    }
    println!("requests met: {}", chain.met_requests.len());
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "m": 1,
        "group": "full-q",
        "h": {"free_rank": 0, "torsion_orders": [2]},
        "budget": {"max_level": 2, "enum_count": 10},
        "sample_budget": 200,
        "rng_seed": 0
    }"#;

    #[test]
    fn example_config_parses() {
        let cfg = InstanceConfig::parse(EXAMPLE).unwrap();
        assert_eq!(cfg.group, GroupConfig::FullQ);
        let inst = cfg.instance().unwrap();
        assert_eq!(inst.space.h.torsion_orders, vec![2]);
    }

    #[test]
    fn bad_configs_are_config_errors() {
        let torsion_one = EXAMPLE.replace("[2]", "[1]");
        assert!(matches!(InstanceConfig::parse(&torsion_one).unwrap().instance(), Err(Error::Config(_))));
        let zero_mod_four = EXAMPLE.replace(r#""full-q""#, r#"{"localized": [{"residue": 0, "modulus": 4}]}"#);
        assert!(matches!(InstanceConfig::parse(&zero_mod_four).unwrap().instance(), Err(Error::Config(_))));
        let unknown = EXAMPLE.replace(r#""m": 1"#, r#""m": 1, "extra": 3"#);
        assert!(matches!(InstanceConfig::parse(&unknown), Err(Error::Config(_))));
        let localized = EXAMPLE.replace(r#""full-q""#, r#"{"localized": [{"residue": 1, "modulus": 4}]}"#);
        assert!(InstanceConfig::parse(&localized).unwrap().instance().is_ok());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Certificate("x".into())), EXIT_CHECK);
        assert_eq!(exit_code(&Error::InsufficientBudget("x".into())), EXIT_BUDGET);
        assert_eq!(run(["ssgp", "build", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["ssgp", "--help"]), EXIT_OK);
    }
}
