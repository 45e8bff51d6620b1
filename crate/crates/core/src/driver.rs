//! Builds a decreasing chain of conditions meeting a finite prefix of the
//! dense family, assembles the stage neighbourhoods `U_i`, and answers
//! separation and small-subgroup queries with re-checked certificates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arith::localized_member;
use crate::density::{extend_avoid, extend_primes, extend_ssgp, extend_to_level, DenseRequest};
use crate::error::{Error, Result};
use crate::groups::{Instance, KElem};
use crate::poset::{leq, validate, Condition, Sampling};
use crate::report::Report;
use crate::symsets::{cyclic_in_set, CyclicMode, SSGPWitness, SymSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_level: usize,
    pub enum_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    /// The condition has reached the requested level or primes.
    Reached,
    /// The element is outside `U_level` of the condition.
    Separated { level: usize },
    Ssgp(SSGPWitness),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetRequest {
    /// Index of the first chain condition lying in the dense set.
    pub index: usize,
    pub request: DenseRequest,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterChain {
    pub instance: Instance,
    pub budget: Budget,
    pub rng_seed: u64,
    pub sample_budget: usize,
    pub conditions: Vec<Condition>,
    pub met_requests: Vec<MetRequest>,
}

/// Extends a chain one request at a time, checking every new link.
pub struct ChainBuilder {
    chain: FilterChain,
    check_links: bool,
}

impl ChainBuilder {
    pub fn new(instance: &Instance, budget: Budget, rng_seed: u64, sample_budget: usize) -> Self {
        let root = Condition::root(instance);
        ChainBuilder {
            chain: FilterChain {
                instance: instance.clone(),
                budget,
                rng_seed,
                sample_budget,
                conditions: vec![root],
                met_requests: vec![],
            },
            check_links: true,
        }
    }

    /// Skips the per-link validation (the verify suite still runs it).
    pub fn unchecked(mut self) -> Self {
        self.check_links = false;
        self
    }

    pub fn last(&self) -> &Condition {
        self.chain.conditions.last().unwrap()
    }

    fn sampling(&self) -> Sampling {
        Sampling::new(self.chain.sample_budget, self.chain.rng_seed)
    }

    fn push(&mut self, q: Condition) -> Result<usize> {
        if &q != self.last() {
            if self.check_links {
                let inst = &self.chain.instance;
                let smp = self.sampling();
                let v = validate(inst, &q, &smp);
                if !v.passed() {
                    return Err(Error::Certificate(format!("new condition is invalid:\n{v}")));
                }
                let o = leq(inst, &q, self.last(), &smp);
                if !o.passed() {
                    return Err(Error::Certificate(format!("new condition does not extend the last one:\n{o}")));
                }
            }
            self.chain.conditions.push(q);
        }
        Ok(self.chain.conditions.len() - 1)
    }

    fn record(&mut self, index: usize, request: DenseRequest, certificate: Certificate) {
        self.chain.met_requests.push(MetRequest { index, request, certificate });
    }

    pub fn meet_level(&mut self, n: usize) -> Result<()> {
        let q = extend_to_level(&self.chain.instance, self.last(), n)?;
        let idx = self.push(q)?;
        self.record(idx, DenseRequest::Level(n), Certificate::Reached);
        Ok(())
    }

    pub fn meet_primes(&mut self, pi: &crate::arith::PrimeSet) -> Result<()> {
        let q = extend_primes(self.last(), pi);
        let idx = self.push(q)?;
        self.record(idx, DenseRequest::Primes(pi.clone()), Certificate::Reached);
        Ok(())
    }

    /// Meets `C_x`. When `x` already lies in `Q^m_{π} + H` outside the
    /// deepest level, or only needs more primes, no new level is added.
    pub fn meet_avoid(&mut self, x: &KElem) -> Result<()> {
        let inst = self.chain.instance.clone();
        let p = self.last().clone();
        let q = if localized_member(&x.q, &p.pi) {
            if p.deepest().member(&inst.space, x) {
                extend_avoid(&inst, &p, x)?
            } else {
                p
            }
        } else {
            // the levels sit inside Q_π + H, which x is outside of
            let q = extend_primes(&p, &x.q.denominator_primes());
            if q.deepest().member(&inst.space, x) {
                extend_avoid(&inst, &q, x)?
            } else {
                q
            }
        };
        let level = q.n;
        let idx = self.push(q)?;
        self.record(idx, DenseRequest::Avoid(x.clone()), Certificate::Separated { level });
        Ok(())
    }

    /// Meets `D_x` at the current condition. An element already in the
    /// deepest level gets the decomposition `x = x`, and a witness recorded
    /// earlier is reused while it is still valid at the current depth.
    pub fn meet_ssgp(&mut self, x: &KElem) -> Result<()> {
        let inst = self.chain.instance.clone();
        let sp = &inst.space;
        let p = self.last().clone();
        let deepest = p.deepest();
        let in_pi = localized_member(&x.q, &p.pi);
        if in_pi && deepest.member(sp, x) {
            let w = SSGPWitness { target: x.clone(), level: p.n, head: x.clone(), cyclic_parts: vec![] };
            let idx = self.chain.conditions.len() - 1;
            self.record(idx, DenseRequest::Ssgp(x.clone()), Certificate::Ssgp(w));
            return Ok(());
        }
        let reusable = self.chain.met_requests.iter().rev().find_map(|m| match (&m.request, &m.certificate) {
            (DenseRequest::Ssgp(y), Certificate::Ssgp(w))
                if y == x
                    && w.level == p.n
                    && deepest.member(sp, &w.head)
                    && w.cyclic_parts.iter().all(|g| cyclic_in_set(sp, g, deepest, CyclicMode::Syntactic)) =>
            {
                Some(w.clone())
            }
            _ => None,
        });
        if let Some(w) = reusable {
            let idx = self.chain.conditions.len() - 1;
            self.record(idx, DenseRequest::Ssgp(x.clone()), Certificate::Ssgp(w));
            return Ok(());
        }
        let step = extend_ssgp(&inst, &p, x)?;
        let idx = self.push(step.condition)?;
        self.record(idx, DenseRequest::Ssgp(x.clone()), Certificate::Ssgp(step.witness));
        Ok(())
    }

    pub fn finish(self) -> FilterChain {
        self.chain
    }
}

/// Meets, for the first `enum_count` elements `x` of `K`, the request `C_x`
/// (for `x ≠ 0`) and then `A_n ∩ D_x` for `n = 0…max_level`.
pub fn build_chain(instance: &Instance, budget: Budget, rng_seed: u64, sample_budget: usize) -> Result<FilterChain> {
    build_with(ChainBuilder::new(instance, budget, rng_seed, sample_budget), instance, budget)
}

/// [`build_chain`] without per-link validation.
pub fn build_chain_unchecked(instance: &Instance, budget: Budget, rng_seed: u64, sample_budget: usize) -> Result<FilterChain> {
    build_with(ChainBuilder::new(instance, budget, rng_seed, sample_budget).unchecked(), instance, budget)
}

fn build_with(mut b: ChainBuilder, instance: &Instance, budget: Budget) -> Result<FilterChain> {
    if budget.enum_count == 0 {
        return Err(Error::Argument("enum_count must be at least 1".into()));
    }
    for x in instance.enumerate().take(budget.enum_count) {
        if !x.is_zero() {
            b.meet_avoid(&x)?;
        }
        for n in 0..=budget.max_level {
            b.meet_level(n)?;
            b.meet_ssgp(&x)?;
        }
    }
    Ok(b.finish())
}

impl FilterChain {
    pub fn last(&self) -> &Condition {
        self.conditions.last().unwrap()
    }

    pub fn max_level(&self) -> usize {
        self.last().n
    }

    pub fn sampling(&self) -> Sampling {
        Sampling::new(self.sample_budget, self.rng_seed)
    }

    /// `U_i = ⋃ { U_i^p : p in the chain, i ≤ n^p }`.
    pub fn stage_set(&self, i: usize) -> Result<SymSet> {
        if i > self.max_level() {
            return Err(Error::Argument(format!("level {i} was never reached (deepest is {})", self.max_level())));
        }
        let sp = &self.instance.space;
        let terms = self.conditions.iter().filter(|p| i <= p.n).flat_map(|p| p.u[i].terms.iter().cloned()).collect();
        Ok(SymSet::from_terms(sp, terms))
    }

    pub fn stage_sets(&self) -> Vec<SymSet> {
        (0..=self.max_level()).map(|i| self.stage_set(i).unwrap()).collect()
    }

    /// Level `n` with `x ∉ U_n`, recorded when `C_x` was met and re-checked
    /// against the whole stage set.
    pub fn separation_certificate(&self, x: &KElem) -> Result<usize> {
        self.separation_in(x, None)
    }

    fn separation_in(&self, x: &KElem, stages: Option<&[SymSet]>) -> Result<usize> {
        if x.is_zero() {
            return Err(Error::Argument("zero lies in every neighbourhood and is never separated".into()));
        }
        let level = self
            .met_requests
            .iter()
            .find_map(|m| match (&m.request, &m.certificate) {
                (DenseRequest::Avoid(y), Certificate::Separated { level }) if y == x => Some(*level),
                _ => None,
            })
            .ok_or_else(|| Error::InsufficientBudget(format!("no avoidance step for {x} in this chain")))?;
        let stage = match stages {
            Some(st) => st.get(level).cloned().ok_or_else(|| Error::Certificate(format!("level {level} is past the chain")))?,
            None => self.stage_set(level)?,
        };
        if stage.member(&self.instance.space, x) {
            return Err(Error::Certificate(format!("{x} lies in U_{level} after all")));
        }
        Ok(level)
    }

    /// A decomposition `x = head + Σ g_j` with `head ∈ U_i` and every
    /// `⟨g_j⟩ ⊆ U_i`, re-checked against the stage set.
    pub fn ssgp_certificate(&self, x: &KElem, i: usize) -> Result<SSGPWitness> {
        self.ssgp_in(x, i, &self.stage_set(i)?)
    }

    fn ssgp_in(&self, x: &KElem, i: usize, stage: &SymSet) -> Result<SSGPWitness> {
        let w = self
            .met_requests
            .iter()
            .find_map(|m| match (&m.request, &m.certificate) {
                (DenseRequest::Ssgp(y), Certificate::Ssgp(w)) if y == x && w.level >= i => Some(w.clone()),
                _ => None,
            })
            .ok_or_else(|| Error::InsufficientBudget(format!("no witness for {x} at level {i} in this chain")))?;
        self.check_witness(&w, stage)?;
        Ok(w)
    }

    fn check_witness(&self, w: &SSGPWitness, stage: &SymSet) -> Result<()> {
        let sp = &self.instance.space;
        if !w.identity_holds(sp) {
            return Err(Error::Certificate(format!("head + parts ≠ {}", w.target)));
        }
        if !stage.member(sp, &w.head) {
            return Err(Error::Certificate(format!("head {} is outside the stage set", w.head)));
        }
        for g in &w.cyclic_parts {
            if !cyclic_in_set(sp, g, stage, CyclicMode::Syntactic) && !cyclic_in_set(sp, g, stage, CyclicMode::Bounded(25)) {
                return Err(Error::Certificate(format!("<{g}> is not inside the stage set")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("chain serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Parses a chain without checking it.
    pub fn from_json(text: &str) -> Result<FilterChain> {
        let chain: FilterChain =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("chain file, line {} column {}: {e}", e.line(), e.column())))?;
        if chain.conditions.is_empty() {
            return Err(Error::Parse("chain file has no conditions".into()));
        }
        Ok(chain)
    }

    /// Reads a chain and re-validates every condition in it.
    pub fn load(path: &Path) -> Result<FilterChain> {
        let text = std::fs::read_to_string(path)?;
        let chain = FilterChain::from_json(&text)?;
        let smp = chain.sampling();
        for (j, p) in chain.conditions.iter().enumerate() {
            let r = validate(&chain.instance, p, &smp);
            let first = r.failures().next().map(|c| format!("{}: {}", c.name, c.detail.clone().unwrap_or_default()));
            if let Some(f) = first {
                return Err(Error::Certificate(format!("condition {j} fails {f}")));
            }
        }
        Ok(chain)
    }

    /// The full invariant suite: validators, the order along the chain,
    /// dense-set membership of every met request, the stage-set axioms on
    /// samples, and every certificate within budget.
    pub fn verify(&self, smp: &Sampling) -> Report {
        let mut r = self.verify_conditions(smp);
        r.extend_prefixed("", self.verify_stages(smp));
        r
    }

    /// Each condition validates, consecutive conditions descend, and every
    /// recorded request is met by the condition it points at.
    pub fn verify_conditions(&self, smp: &Sampling) -> Report {
        let inst = &self.instance;
        let sp = &inst.space;
        let mut r = Report::new();
        r.check("chain starts at the root", self.conditions[0] == Condition::root(inst), || "p_0 is not the root".into());
        for (j, p) in self.conditions.iter().enumerate() {
            r.extend_prefixed(&format!("p{j} "), validate(inst, p, smp));
        }
        for j in 1..self.conditions.len() {
            r.extend_prefixed(&format!("p{j} ≤ p{} ", j - 1), leq(inst, &self.conditions[j], &self.conditions[j - 1], smp));
        }
        if self.conditions.len() > 2 {
            let last = self.conditions.len() - 1;
            r.extend_prefixed(&format!("p{last} ≤ p0 "), leq(inst, self.last(), &self.conditions[0], smp));
        }

        for (t, m) in self.met_requests.iter().enumerate() {
            let Some(p) = self.conditions.get(m.index) else {
                r.fail(format!("request {t} index"), "points past the chain");
                continue;
            };
            let name = format!("request {t} met");
            match (&m.request, &m.certificate) {
                (DenseRequest::Level(n), Certificate::Reached) => r.check(name, p.n >= *n, || format!("n^p = {} < {n}", p.n)),
                (DenseRequest::Primes(pi), Certificate::Reached) => r.check(name, pi.is_subset(&p.pi), || format!("{pi} ⊄ {}", p.pi)),
                (DenseRequest::Avoid(x), Certificate::Separated { level }) => {
                    let ok = *level == p.n && localized_member(&x.q, &p.pi) && !p.deepest().member(sp, x);
                    r.check(name, ok, || format!("{x} is not avoided by condition {}", m.index))
                }
                (DenseRequest::Ssgp(x), Certificate::Ssgp(w)) => {
                    let d = p.deepest();
                    let ok = w.target == *x
                        && w.level == p.n
                        && w.identity_holds(sp)
                        && d.member(sp, &w.head)
                        && w.cyclic_parts.iter().all(|g| cyclic_in_set(sp, g, d, CyclicMode::Syntactic));
                    r.check(name, ok, || format!("witness for {x} does not fit condition {}", m.index))
                }
                _ => r.fail(name, "certificate kind does not match the request"),
            }
        }
        r
    }

    /// The stage sets `U_i`: neighbourhood axioms on samples, separation of
    /// every enumerated `x ≠ 0` and SSGP witnesses at every level.
    pub fn verify_stages(&self, smp: &Sampling) -> Report {
        let inst = &self.instance;
        let zero = inst.space.zero();
        let stages = self.stage_sets();
        let mut r = stage_axioms(inst, &stages, smp);
        let mut sep = None;
        let mut ssgp = None;
        for x in inst.enumerate().take(self.budget.enum_count) {
            if x != zero {
                if let Err(e) = self.separation_in(&x, Some(&stages)) {
                    sep.get_or_insert(format!("{x}: {e}"));
                }
            }
            for (i, stage) in stages.iter().enumerate().take(self.budget.max_level + 1) {
                if let Err(e) = self.ssgp_in(&x, i, stage) {
                    ssgp.get_or_insert(format!("{x} at level {i}: {e}"));
                }
            }
        }
        r.check("separation certificates", sep.is_none(), || sep.clone().unwrap());
        r.check("ssgp certificates", ssgp.is_none(), || ssgp.clone().unwrap());
        r
    }
}

/// The neighbourhood-base axioms on samples: `0 ∈ U_i`, `−U_i ⊆ U_i`,
/// `U_{i+1} ⊆ U_i` and `U_{i+1} + U_{i+1} ⊆ U_i`.
pub fn stage_axioms(inst: &Instance, stages: &[SymSet], smp: &Sampling) -> Report {
    let sp = &inst.space;
    let mut r = Report::new();
    let mut rng = smp.rng();
    let zero_ok = stages.iter().all(|u| u.member(sp, &sp.zero()));
    r.check("stage 0 ∈ U_i", zero_ok, || "zero missing".into());
    let mut sym = None;
    let mut nest = None;
    let mut sum = None;
    for i in 0..stages.len() {
        for _ in 0..smp.budget {
            let Some(x) = stages[i].sample(sp, &mut rng, smp.bound) else { break };
            if sym.is_none() && !stages[i].member(sp, &sp.neg(&x)) {
                sym = Some(format!("-({x}) ∉ U_{i}"));
            }
            if i == 0 {
                continue;
            }
            let y = stages[i].sample(sp, &mut rng, smp.bound).unwrap();
            if nest.is_none() && !stages[i - 1].member(sp, &x) {
                nest = Some(format!("{x} ∈ U_{i} but not U_{}", i - 1));
            }
            if sum.is_none() && !stages[i - 1].member(sp, &sp.add(&x, &y)) {
                sum = Some(format!("{x} + {y} ∉ U_{}", i - 1));
            }
        }
    }
    r.check("stage -U_i = U_i (sampled)", sym.is_none(), || sym.clone().unwrap());
    r.check("stage U_(i+1) ⊆ U_i (sampled)", nest.is_none(), || nest.clone().unwrap());
    r.check("stage U_(i+1) + U_(i+1) ⊆ U_i (sampled)", sum.is_none(), || sum.clone().unwrap());
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::PrimeSet;
    use crate::groups::{HSpec, Space, WideGroup};

    fn inst() -> Instance {
        Instance::new(Space::new(1, HSpec::new(0, vec![2]).unwrap()).unwrap(), WideGroup::full_q(1)).unwrap()
    }

    #[test]
    fn zero_budget_chain() {
        let i = inst();
        let c = build_chain(&i, Budget { max_level: 0, enum_count: 1 }, 0, 30).unwrap();
        assert_eq!(c.conditions.len(), 1);
        let w = c.ssgp_certificate(&i.space.zero(), 0).unwrap();
        assert!(w.cyclic_parts.is_empty());
        assert!(c.separation_certificate(&i.space.zero()).is_err());
    }

    #[test]
    fn worked_chain() {
        let i = inst();
        let mut b = ChainBuilder::new(&i, Budget { max_level: 0, enum_count: 1 }, 0, 40);
        b.meet_primes(&PrimeSet::new([3]).unwrap()).unwrap();
        let x = i.space.parse("1/3;0").unwrap();
        b.meet_ssgp(&x).unwrap();
        let c = b.finish();
        let w = c.ssgp_certificate(&x, 0).unwrap();
        assert_eq!(w.head, i.space.parse("-1/105;0").unwrap());
        assert_eq!(w.cyclic_parts, vec![i.space.parse("1/5;0").unwrap(), i.space.parse("1/7;0").unwrap()]);
        let u0 = c.stage_set(0).unwrap();
        assert!(u0.member(&i.space, &i.space.parse("1/5;0").unwrap()));
        assert!(c.stage_set(1).is_err());
        assert!(matches!(c.ssgp_certificate(&i.space.parse("1/2;0").unwrap(), 0), Err(Error::InsufficientBudget(_))));
    }

    #[test]
    fn small_chain_verifies() {
        let i = inst();
        let c = build_chain(&i, Budget { max_level: 1, enum_count: 4 }, 0, 30).unwrap();
        let r = c.verify(&Sampling::new(30, 1));
        assert!(r.passed(), "{r}");
        let back = FilterChain::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }
}
