//! Extensions landing in the four dense families: deeper levels, more
//! primes, avoiding an element, and absorbing an element as
//! `head + Σ cyclic parts`.

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::arith::{localized_member, outside_part, PrimeSet, QVec};
use crate::error::{Error, Result};
use crate::groups::{find_g_sequence, GSequence, Instance, KElem};
use crate::poset::{extend_with_avoidance, Condition};
use crate::report::Report;
use crate::symsets::{cyclic_in_set, member_mod_qpi, Atom, CyclicMode, SSGPWitness, SymSet};

/// One member of the countable family of dense sets.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenseRequest {
    Level(usize),
    Primes(PrimeSet),
    Avoid(KElem),
    Ssgp(KElem),
}

/// `q ≤ p` with `n^q ≥ n`, adding levels that avoid `e_1`.
pub fn extend_to_level(inst: &Instance, p: &Condition, n: usize) -> Result<Condition> {
    let dummy = inst.space.from_q(QVec::unit(inst.space.m, 0));
    let mut q = p.clone();
    while q.n < n {
        q = extend_with_avoidance(inst, &q, &dummy)?;
    }
    Ok(q)
}

/// `q ≤ p` with `π ⊆ π^q` and everything else unchanged.
pub fn extend_primes(p: &Condition, pi: &PrimeSet) -> Condition {
    Condition { pi: p.pi.union(pi), ..p.clone() }
}

/// `q ≤ p` with `x ∈ Q^m_{π^q} + H` and `x ∉ U^q_{n^q}`.
pub fn extend_avoid(inst: &Instance, p: &Condition, x: &KElem) -> Result<Condition> {
    if x.is_zero() || !inst.in_k(x) {
        return Err(Error::Argument(format!("{x} is zero or not in K")));
    }
    let p1 = extend_primes(p, &x.q.denominator_primes());
    let q = extend_with_avoidance(inst, &p1, x)?;
    if q.deepest().member(&inst.space, x) {
        return Err(Error::Construction(format!("{x} was not avoided")));
    }
    Ok(q)
}

/// Everything [`extend_ssgp`] produces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SsgpStep {
    pub condition: Condition,
    pub witness: SSGPWitness,
    pub sequence: GSequence,
    /// `x.q − Σ g_j`.
    pub g0: QVec,
}

/// `q ≤ p` with `n^q = n^p` in which `x = head + g_1 + … + g_k` for some
/// `head ∈ U^q_{n^q}` and `⟨g_j⟩ ⊆ U^q_{n^q}`, where `k = 2^{n^p} + 1`.
///
/// The new deepest level is `U_n^p ∪ ({±head} ∪ ⋃⟨g_j⟩) + s_nZ^m` and the
/// shallower ones are rebuilt as `U_i^p ∪ (U_{i+1}^q + U_{i+1}^q + s_iZ^m)`.
pub fn extend_ssgp(inst: &Instance, p: &Condition, x: &KElem) -> Result<SsgpStep> {
    let sp = &inst.space;
    if !inst.in_k(x) {
        return Err(Error::Argument(format!("{x} is not in K")));
    }
    let p = if localized_member(&x.q, &p.pi) { p.clone() } else { extend_primes(p, &x.q.denominator_primes()) };
    let n = p.n;
    let k = (1u64 << n.min(62)) + 1;
    let s_n = p.s[n].clone();
    let seq = find_g_sequence(&inst.group, &p.pi, k, &s_n)?;

    let sum_g = seq.gs.iter().fold(QVec::zero(sp.m), |acc, g| acc.add(g));
    let g0 = x.q.sub(&sum_g);
    let head = KElem { q: g0.clone(), h: x.h.clone() };
    let parts: Vec<KElem> = seq.gs.iter().map(|g| sp.from_q(g.clone())).collect();

    let mut new_atoms = vec![Atom::point(sp, &head, &s_n), Atom::point(sp, &sp.neg(&head), &s_n)];
    new_atoms.extend(parts.iter().map(|g| Atom::new(sp, sp.zero(), vec![g.clone()], s_n.clone())));
    let mut u = p.u.clone();
    u[n] = p.u[n].union(sp, &SymSet::from_atoms(sp, new_atoms)).pooled(sp, &s_n);
    for i in (0..n).rev() {
        let doubled = u[i + 1].sum(sp, &u[i + 1]).sum(sp, &SymSet::lattice(sp, &p.s[i]));
        let next = p.u[i].union(sp, &doubled);
        let bound = u[i + 1].term_count().pow(2) + p.u[i].term_count() + 1;
        if next.term_count() > bound {
            return Err(Error::Construction(format!(
                "level {i} grew to {} terms, above the bound {bound}",
                next.term_count()
            )));
        }
        u[i] = next;
    }
    let q = Condition { pi: seq.pis.last().unwrap().clone(), n, u, s: p.s.clone() };

    let witness = SSGPWitness { target: x.clone(), level: n, head, cyclic_parts: parts };
    if !witness.identity_holds(sp) {
        return Err(Error::Construction("witness identity fails".into()));
    }
    if !q.deepest().member(sp, &witness.head) {
        return Err(Error::Construction(format!("head {} not in the deepest level", witness.head)));
    }
    if let Some(g) = witness.cyclic_parts.iter().find(|g| !cyclic_in_set(sp, g, q.deepest(), CyclicMode::Syntactic)) {
        return Err(Error::Construction(format!("<{g}> is not visibly inside the deepest level")));
    }
    Ok(SsgpStep { condition: q, witness, sequence: seq, g0 })
}

/// Exact `i128` view of integer combinations of rational vectors: all
/// vectors are scaled by one common denominator `l`.
struct Combos {
    l: i128,
    rows: Vec<Vec<i128>>,
}

impl Combos {
    fn new(gs: &[QVec]) -> Option<Combos> {
        let l = gs.iter().fold(BigInt::one(), |acc, g| num_integer::Integer::lcm(&acc, &g.denom_lcm()));
        let rows = gs
            .iter()
            .map(|g| {
                g.0.iter()
                    .map(|c| i128::try_from((c * num_rational::BigRational::from_integer(l.clone())).to_integer()).ok())
                    .collect::<Option<Vec<_>>>()
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Combos { l: i128::try_from(l).ok()?, rows })
    }

    /// The part of `l` built from primes outside `π`.
    fn outside(&self, pi: &PrimeSet) -> i128 {
        i128::try_from(outside_part(&BigInt::from(self.l), pi)).expect("divides l")
    }

    /// `v / l ∈ Q^m_π` (with `Q_∅ = Z`), given `out = self.outside(π)`.
    fn in_qpi(&self, v: &[i128], out: i128) -> bool {
        v.iter().all(|&x| x % out == 0)
    }

    /// `v / l ∈ sZ^m`.
    fn in_lattice(&self, v: &[i128], s: i128) -> bool {
        v.iter().all(|&x| x % (self.l * s) == 0)
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Runs `f` on `shift + Σ n_j·rows[j]` for coefficient tuples in
/// `[-bound, bound]^len`, restricted per coordinate to one representative of
/// each residue modulo `periods[j]`. The predicates checked below are
/// periodic with these periods, so this visits every outcome the full box
/// would. Stops early when `f` returns false.
fn tuples(rows: &[&[i128]], periods: &[i128], bound: i64, shift: &[i128], mut f: impl FnMut(&[i128]) -> bool) -> bool {
    let width = 2 * bound as i128 + 1;
    let ranges: Vec<i64> = periods.iter().map(|&p| p.min(width) as i64).collect();
    let mut cur: Vec<i64> = vec![-bound; rows.len()];
    let mut v = shift.to_vec();
    for row in rows {
        for (vi, r) in v.iter_mut().zip(row.iter()) {
            *vi -= bound as i128 * r;
        }
    }
    loop {
        if !f(&v) {
            return false;
        }
        let mut j = 0;
        while j < cur.len() {
            cur[j] += 1;
            if cur[j] < -bound + ranges[j] {
                for (vi, r) in v.iter_mut().zip(rows[j].iter()) {
                    *vi += r;
                }
                break;
            }
            // wrap: undo the ranges[j] - 1 steps taken on this coordinate
            cur[j] = -bound;
            for (vi, r) in v.iter_mut().zip(rows[j].iter()) {
                *vi -= (ranges[j] - 1) as i128 * r;
            }
            j += 1;
        }
        if j == cur.len() {
            return true;
        }
    }
}

/// Checks three conclusions about `g_1…g_k` and `g_0 = g − Σ g_j`:
/// `⟨g_1…g_i⟩ + Q_{π_0} ⊆ Q_{π_i}` and `⟨g_i…g_k⟩ ∩ Q_{π_{i−1}} ⊆ sZ^m`
/// over coefficient tuples bounded by `bound`, and
/// `l·g_0 ∉ ⟨g_j : j ∈ J⟩ + Q_{π_0}` for proper `J` and `0 < |l| ≤ k`
/// exactly (plus a bounded search as a cross-check).
pub fn check_lemma_iterative(seq: &GSequence, g: &QVec, bound: i64) -> Report {
    let mut r = Report::new();
    let k = seq.gs.len();
    let pi0 = &seq.pis[0];
    let Ok(s) = i128::try_from(seq.s.clone()) else {
        r.fail("setup", "modulus does not fit in i128");
        return r;
    };
    let mut all = seq.gs.clone();
    all.push(g.clone());
    let Some(c) = Combos::new(&all) else {
        r.fail("setup", "coordinates do not fit in i128");
        return r;
    };
    // n ↦ n·row_j is periodic modulo `modulus` with this period
    let period_mod = |j: usize, modulus: i128| -> i128 { modulus.max(1) / gcd_row(&c.rows[j], modulus) };
    let period = |j: usize| period_mod(j, c.l * s.abs());
    let m = g.dim();
    let zero = vec![0i128; m];

    let nested = seq.pis.windows(2).all(|w| w[0].is_subset(&w[1]));
    r.check("π_0 ⊆ π_1 ⊆ … ⊆ π_k", nested, || "prime sets are not increasing".into());
    // with Q_π0 ⊆ Q_πi from the nesting, the first check reduces to the combinations
    let mut a1 = true;
    for i in 1..=k {
        let out = c.outside(&seq.pis[i]);
        let periods: Vec<i128> = (0..i).map(|j| period_mod(j, out)).collect();
        let rows: Vec<&[i128]> = c.rows[..i].iter().map(Vec::as_slice).collect();
        a1 &= tuples(&rows, &periods, bound, &zero, |v| c.in_qpi(v, out));
    }
    r.check("<g_1..g_i> + Q_π0 ⊆ Q_πi", a1, || "a bounded combination escapes".into());

    let mut a2 = true;
    for i in 1..=k {
        let periods: Vec<i128> = (i - 1..k).map(period).collect();
        let out = c.outside(&seq.pis[i - 1]);
        let rows: Vec<&[i128]> = c.rows[i - 1..k].iter().map(Vec::as_slice).collect();
        a2 &= tuples(&rows, &periods, bound, &zero, |v| !c.in_qpi(v, out) || c.in_lattice(v, s));
    }
    r.check("<g_i..g_k> ∩ Q_π(i-1) ⊆ sZ^m", a2, || "a bounded combination lands outside sZ^m".into());

    let in_pi0 = localized_member(g, pi0);
    r.check("precondition g ∈ Q_π0", in_pi0, || format!("{g} ∉ Q_{pi0}"));
    let g0 = seq.gs.iter().fold(g.clone(), |acc, gj| acc.sub(gj));
    let mut exact = true;
    let mut brute_agrees = true;
    let out0 = c.outside(pi0);
    let g0_scaled: Vec<i128> = (0..m).map(|i| c.rows[k][i] - (0..k).map(|j| c.rows[j][i]).sum::<i128>()).collect();
    for mask in 0u32..(1u32 << k) - 1 {
        let js: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        let gens: Vec<QVec> = js.iter().map(|&j| seq.gs[j].clone()).collect();
        for l in 1..=k as i64 {
            for l in [l, -l] {
                let target = g0.scale_i(l);
                let member = member_mod_qpi(&target, &gens, pi0);
                exact &= !member;
                let shift: Vec<i128> = g0_scaled.iter().map(|x| x * l as i128).collect();
                let periods: Vec<i128> = js.iter().map(|&j| period_mod(j, out0)).collect();
                // the box is symmetric, so adding Σ n_j g_j covers subtracting it
                let rows: Vec<&[i128]> = js.iter().map(|&j| c.rows[j].as_slice()).collect();
                let found = !tuples(&rows, &periods, bound, &shift, |v| !c.in_qpi(v, out0));
                brute_agrees &= !found || member;
            }
        }
    }
    r.check("l·g_0 ∉ <g_J> + Q_π0 (exact)", exact, || "some l·g_0 lies in a proper sub-span".into());
    r.check("bounded search agrees", brute_agrees, || "bounded search found a decomposition the exact test missed".into());
    r
}

fn gcd_row(row: &[i128], m: i128) -> i128 {
    row.iter().fold(m, |acc, &x| gcd(acc, x)).max(1)
}
