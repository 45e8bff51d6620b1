use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use ssgp::arith::PrimeSet;
use ssgp::driver::{Budget, ChainBuilder, FilterChain};
use ssgp::groups::{HSpec, Instance, Space, WideGroup};
use tempfile::TempDir;

const SMALL: &str = r#"{
  "m": 1,
  "group": "full-q",
  "h": { "free_rank": 0, "torsion_orders": [2] },
  "budget": { "max_level": 1, "enum_count": 4 },
  "sample_budget": 30,
  "rng_seed": 7
}"#;

fn ssgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssgp")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn build_small(dir: &TempDir, name: &str) -> PathBuf {
    let cfg = write_config(dir, "small.json", SMALL);
    let out = dir.path().join(name);
    let o = ssgp(&["build", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn build_reports_certificates_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "small.json", SMALL);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let first = ssgp(&["build", "--config", p(&cfg), "--out", p(&a)]);
    assert_eq!(code(&first), 0);
    let summary = stdout_json(&first);
    assert_eq!(summary["separation_certificates"], 3);
    assert_eq!(summary["ssgp_certificates"], 8);
    assert_eq!(summary["missing"], Value::Array(vec![]));
    assert_eq!(code(&ssgp(&["build", "--config", p(&cfg), "--out", p(&b)])), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let c = dir.path().join("c.json");
    assert_eq!(code(&ssgp(&["build", "--config", p(&cfg), "--out", p(&c), "--seed", "8"])), 0);
    let reseeded = FilterChain::load(&c).unwrap();
    assert_eq!(reseeded.rng_seed, 8);
}

#[test]
fn queries_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let chain = build_small(&dir, "chain.json");
    let c = p(&chain);

    let o = ssgp(&["query", "member", "--chain", c, "--element", "0;0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["member"], true);

    let o = ssgp(&["query", "separate", "--chain", c, "--element", "-1;0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["separated"], true);

    assert_eq!(code(&ssgp(&["query", "separate", "--chain", c, "--element", "0;0"])), 2);
    // in G ⊕ H but outside the enumerated prefix
    assert_eq!(code(&ssgp(&["query", "separate", "--chain", c, "--element", "5/11;1"])), 3);
    assert_eq!(code(&ssgp(&["query", "ssgp", "--chain", c, "--element", "0;1", "--level", "9"])), 3);
    assert_eq!(code(&ssgp(&["query", "member", "--chain", c, "--element", "1/x;0"])), 2);
    assert_eq!(code(&ssgp(&["query", "member", "--chain", c, "--element", "-1/2;1"])), 0);
}

#[test]
fn usage_and_config_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("never.json");
    assert_eq!(code(&ssgp(&["build", "--unknown-flag"])), 2);
    assert_eq!(code(&ssgp(&["frobnicate"])), 2);
    assert_eq!(code(&ssgp(&[])), 2);
    assert_eq!(code(&ssgp(&["--help"])), 0);

    let torsion_one = write_config(&dir, "t1.json", &SMALL.replace("[2]", "[1]"));
    assert_eq!(code(&ssgp(&["build", "--config", p(&torsion_one), "--out", p(&out)])), 2);
    let no_primes = write_config(
        &dir,
        "zero-mod-4.json",
        &SMALL.replace(r#""full-q""#, r#"{ "localized": [{ "residue": 0, "modulus": 4 }] }"#),
    );
    assert_eq!(code(&ssgp(&["build", "--config", p(&no_primes), "--out", p(&out)])), 2);
    assert_eq!(code(&ssgp(&["build", "--config", "/nonexistent/config.json", "--out", p(&out)])), 2);
    assert_eq!(code(&ssgp(&["verify", "--chain", "/nonexistent/chain.json"])), 2);
    assert!(!out.exists());
}

#[test]
fn verify_report_is_stable_and_catches_a_deleted_atom() {
    let dir = TempDir::new().unwrap();
    let chain = build_small(&dir, "chain.json");
    let r1 = dir.path().join("r1.json");
    let r2 = dir.path().join("r2.json");
    assert_eq!(code(&ssgp(&["verify", "--chain", p(&chain), "--out", p(&r1)])), 0);
    assert_eq!(code(&ssgp(&["verify", "--chain", p(&chain), "--out", p(&r2)])), 0);
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());
    let report: Value = serde_json::from_slice(&fs::read(&r1).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().len() > 20);

    let mut c = FilterChain::load(&chain).unwrap();
    let last = c.conditions.last_mut().unwrap();
    let n = last.n;
    let pool = &mut last.u[n].terms[0].choices[0].pool;
    let dropped = pool.iter().position(|a| !a.base.is_zero()).expect("a pooled point atom");
    pool.remove(dropped);
    let broken = dir.path().join("broken.json");
    c.save(&broken).unwrap();
    let o = ssgp(&["verify", "--chain", p(&broken)]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn worked_chain_answers_the_golden_query() {
    let space = Space::new(1, HSpec::new(0, vec![2]).unwrap()).unwrap();
    let inst = Instance::new(space, WideGroup::full_q(1)).unwrap();
    let mut b = ChainBuilder::new(&inst, Budget { max_level: 0, enum_count: 1 }, 0, 40);
    b.meet_primes(&PrimeSet::new([3]).unwrap()).unwrap();
    b.meet_ssgp(&inst.space.parse("1/3;0").unwrap()).unwrap();
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("worked.json");
    b.finish().save(&path).unwrap();

    let o = ssgp(&["query", "ssgp", "--chain", p(&path), "--element", "1/3;0", "--level", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let w = stdout_json(&o);
    assert_eq!(w["head"], "-1/105;0");
    assert_eq!(w["parts"], serde_json::json!(["1/5;0", "1/7;0"]));

    let o = ssgp(&["show", "--chain", p(&path)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("π = {3,5,7}"));
    let o = ssgp(&["show", "--chain", p(&path), "--level", "0"]);
    assert!(stdout_json(&o)["terms"].is_array());
}
