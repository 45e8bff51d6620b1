//! Conditions `p = (π, n, U_0…U_n, s_0…s_n)`, their validator, the order
//! `q ≤ p`, and the step that adds one level while keeping a given element
//! out of the new deepest neighbourhood.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::{localized_member, PrimeSet};
use crate::error::{Error, Result};
use crate::groups::{Instance, KElem};
use crate::report::Report;
use crate::symsets::{Atom, SymSet};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub pi: PrimeSet,
    pub n: usize,
    pub u: Vec<SymSet>,
    #[serde(with = "crate::arith::big_str_vec")]
    pub s: Vec<BigInt>,
}

/// How sampled checks draw their points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sampling {
    pub budget: usize,
    pub seed: u64,
    /// Coefficients of generators and lattice vectors lie in `[-bound, bound]`.
    pub bound: i64,
}

impl Sampling {
    pub fn new(budget: usize, seed: u64) -> Self {
        Sampling { budget, seed, bound: 12 }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

impl Condition {
    /// `(∅, 0, [Z^m], [1])`.
    pub fn root(inst: &Instance) -> Condition {
        let one = BigInt::one();
        Condition { pi: PrimeSet::empty(), n: 0, u: vec![SymSet::lattice(&inst.space, &one)], s: vec![one] }
    }

    pub fn deepest(&self) -> &SymSet {
        &self.u[self.n]
    }
}

fn lattice_sample(inst: &Instance, rng: &mut ChaCha8Rng, s: &BigInt, bound: i64) -> KElem {
    Atom::lattice(&inst.space, s).sample(&inst.space, rng, bound)
}

/// Checks the condition axioms. The structural ones are exact; sum closure
/// and the two consequences `U_{i+1} ⊆ U_i`, `s_iZ^m ⊆ U_i` are sampled.
pub fn validate(inst: &Instance, p: &Condition, smp: &Sampling) -> Report {
    let sp = &inst.space;
    let mut r = Report::new();
    r.ok("finite prime set");
    let shape = p.u.len() == p.n + 1 && p.s.len() == p.n + 1;
    r.check("level count", shape, || format!("n = {} with {} sets and {} moduli", p.n, p.u.len(), p.s.len()));
    if !shape {
        return r;
    }
    r.check("positive moduli", p.s.iter().all(Signed::is_positive), || format!("moduli {:?}", p.s));
    if !p.s.iter().all(Signed::is_positive) {
        return r;
    }

    let zero = sp.zero();
    let contains_zero = p.u.iter().all(|u| u.member(sp, &zero));
    let in_group = |x: &KElem| inst.group.contains(&x.q) && localized_member(&x.q, &p.pi);
    let mut outside = None;
    for (i, u) in p.u.iter().enumerate() {
        for t in &u.terms {
            let atoms = std::iter::once(&t.core).chain(t.choices.iter().flat_map(|c| &c.pool));
            for a in atoms {
                if let Some(x) = std::iter::once(&a.base).chain(&a.gens).find(|x| !in_group(x)) {
                    outside.get_or_insert((i, x.clone()));
                }
            }
        }
    }
    r.check("0 ∈ U_i", contains_zero, || "0 missing from some U_i".into());
    r.check("U_i ⊆ (G ∩ Q_π) + H", outside.is_none(), || {
        let (i, x) = outside.clone().unwrap();
        format!("U_{i} uses {x}")
    });

    let asym = p.u.iter().position(|u| !u.is_symmetric(sp));
    r.check("-U_i = U_i", asym.is_none(), || format!("U_{} is not closed under negation", asym.unwrap()));

    let bad_mod = p
        .u
        .iter()
        .zip(&p.s)
        .position(|(u, s)| u.terms.iter().any(|t| !(s % &t.core.modulus).is_zero()));
    r.check("atom moduli divide s_i", bad_mod.is_none(), || format!("U_{} has a modulus not dividing s", bad_mod.unwrap()));

    let bad_div = (0..p.n).find(|&i| !(&p.s[i + 1] % &p.s[i]).is_zero());
    r.check("s_i | s_(i+1)", bad_div.is_none(), || {
        let i = bad_div.unwrap();
        format!("{} does not divide {}", p.s[i], p.s[i + 1])
    });

    let mut rng = smp.rng();
    let mut sum_fail = None;
    let mut nest_fail = None;
    let mut lat_fail = None;
    for i in 0..=p.n {
        for _ in 0..smp.budget {
            let z = lattice_sample(inst, &mut rng, &p.s[i], smp.bound);
            if lat_fail.is_none() && !p.u[i].member(sp, &z) {
                lat_fail = Some((i, z));
            }
        }
    }
    for i in 0..p.n {
        for _ in 0..smp.budget {
            let (Some(x), Some(y)) =
                (p.u[i + 1].sample(sp, &mut rng, smp.bound), p.u[i + 1].sample(sp, &mut rng, smp.bound))
            else {
                break;
            };
            if nest_fail.is_none() && !p.u[i].member(sp, &x) {
                nest_fail = Some((i, x.clone()));
            }
            let xy = sp.add(&x, &y);
            if sum_fail.is_none() && !p.u[i].member(sp, &xy) {
                sum_fail = Some((i, x, y));
            }
        }
    }
    r.check("U_(i+1) + U_(i+1) ⊆ U_i (sampled)", sum_fail.is_none(), || {
        let (i, x, y) = sum_fail.clone().unwrap();
        format!("{x} + {y} ∉ U_{i}")
    });
    r.check("U_(i+1) ⊆ U_i (sampled)", nest_fail.is_none(), || {
        let (i, x) = nest_fail.clone().unwrap();
        format!("{x} ∉ U_{i}")
    });
    r.check("s_i Z^m ⊆ U_i (sampled)", lat_fail.is_none(), || {
        let (i, z) = lat_fail.clone().unwrap();
        format!("{z} ∉ U_{i}")
    });
    r
}

/// Checks `q ≤ p`. Primes, depth and moduli are compared exactly. The
/// inclusion `U_i^p ⊆ U_i^q` is read off the term structure and the
/// reverse inclusion is sampled: points of `U_i^q` lying in `Q^m_{π^p} + H`
/// must belong to `U_i^p`.
pub fn leq(inst: &Instance, q: &Condition, p: &Condition, smp: &Sampling) -> Report {
    let sp = &inst.space;
    let mut r = Report::new();
    r.check("π^p ⊆ π^q", p.pi.is_subset(&q.pi), || format!("{} ⊄ {}", p.pi, q.pi));
    r.check("n^p ≤ n^q", p.n <= q.n, || format!("{} > {}", p.n, q.n));
    if p.n > q.n {
        return r;
    }
    let s_eq = (0..=p.n).all(|i| p.s[i] == q.s[i]);
    r.check("s_i^q = s_i^p", s_eq, || format!("{:?} vs {:?}", q.s, p.s));

    let missing = (0..=p.n).find(|&i| !p.u[i].subset_of(sp, &q.u[i]));
    r.check("U_i^p ⊆ U_i^q", missing.is_none(), || format!("a term of U_{} is missing", missing.unwrap()));

    let mut rng = smp.rng();
    let mut leak = None;
    for i in 0..=p.n {
        for _ in 0..smp.budget {
            let Some(x) = q.u[i].sample(sp, &mut rng, smp.bound) else { break };
            if localized_member(&x.q, &p.pi) && !p.u[i].member(sp, &x) {
                leak = Some((i, x));
                break;
            }
        }
        if leak.is_some() {
            break;
        }
    }
    r.check("U_i^q ∩ (Q_π^p + H) ⊆ U_i^p (sampled)", leak.is_none(), || {
        let (i, x) = leak.clone().unwrap();
        format!("{x} ∈ U_{i}^q but not in U_{i}^p")
    });
    r
}

/// Least `k ≥ 1` with `x ∉ k·s·Z^m`.
fn avoiding_factor(x: &KElem, s: &BigInt) -> BigInt {
    if !x.h.is_zero() || !x.q.is_integral() {
        return BigInt::one();
    }
    let nums: Vec<BigInt> = x.q.0.iter().map(|c| c.numer().clone()).filter(|c| !c.is_zero()).collect();
    let mut k = BigInt::one();
    loop {
        let ks = &k * s;
        if nums.iter().any(|c| !c.is_multiple_of(&ks)) {
            return k;
        }
        k += 1;
    }
}

/// Adds level `n+1` with `U_{n+1} = s_{n+1}Z^m`, where `s_{n+1} = k·s_n` for
/// the least `k` keeping `x` out of it.
pub fn extend_with_avoidance(inst: &Instance, p: &Condition, x: &KElem) -> Result<Condition> {
    inst.space.check(x)?;
    if x.is_zero() {
        return Err(Error::Argument("cannot avoid zero".into()));
    }
    if !inst.group.contains(&x.q) || !localized_member(&x.q, &p.pi) {
        return Err(Error::Argument(format!("{x} is not in (G ∩ Q_{}) + H", p.pi)));
    }
    let s_n = &p.s[p.n];
    let s_next = avoiding_factor(x, s_n) * s_n;
    let mut q = p.clone();
    q.n += 1;
    q.u.push(SymSet::lattice(&inst.space, &s_next));
    q.s.push(s_next);
    if q.deepest().member(&inst.space, x) {
        return Err(Error::Construction(format!("{x} still lies in the new level")));
    }
    Ok(q)
}
