//! The ambient group `K = G ⊕ H`: finitely generated `H`, wide subgroups
//! `G ⊆ Q^m`, a deterministic enumeration of `K`, and the element finders
//! that feed the SSGP extension step.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{
    fmt_rat, int_valuation, is_prime, localized_member, next_prime, parse_rat, prime_factors,
    qpi_member, PrimeSet, QVec, Rat,
};
use crate::error::{Error, Result};
use crate::symsets::{cyclic_cap_localized, cyclic_cap_qpi};

/// Presentation `Z^a ⊕ Z/d_1 ⊕ … ⊕ Z/d_b`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HSpec {
    pub free_rank: usize,
    pub torsion_orders: Vec<u64>,
}

impl HSpec {
    pub fn new(free_rank: usize, torsion_orders: Vec<u64>) -> Result<Self> {
        if let Some(d) = torsion_orders.iter().find(|&&d| d < 2) {
            return Err(Error::Config(format!("torsion order {d} must be at least 2")));
        }
        Ok(HSpec { free_rank, torsion_orders })
    }

    pub fn trivial() -> Self {
        HSpec { free_rank: 0, torsion_orders: vec![] }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HElem {
    pub free: Vec<BigInt>,
    pub torsion: Vec<u64>,
}

impl HElem {
    pub fn is_zero(&self) -> bool {
        self.free.iter().all(Zero::is_zero) && self.torsion.iter().all(|&t| t == 0)
    }
}

/// An element `g + h` of `Q^m ⊕ H`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "KElemRepr", try_from = "KElemRepr")]
pub struct KElem {
    pub q: QVec,
    pub h: HElem,
}

#[derive(Serialize, Deserialize)]
struct KElemRepr {
    q: Vec<String>,
    free: Vec<String>,
    torsion: Vec<u64>,
}

impl From<KElem> for KElemRepr {
    fn from(x: KElem) -> Self {
        KElemRepr {
            q: x.q.0.iter().map(fmt_rat).collect(),
            free: x.h.free.iter().map(|n| n.to_string()).collect(),
            torsion: x.h.torsion,
        }
    }
}

impl TryFrom<KElemRepr> for KElem {
    type Error = Error;
    fn try_from(r: KElemRepr) -> Result<Self> {
        let q = r.q.iter().map(|s| parse_rat(s)).collect::<Result<Vec<_>>>()?;
        let free = r
            .free
            .iter()
            .map(|s| s.parse::<BigInt>().map_err(|_| Error::Parse(format!("bad integer {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(KElem { q: QVec(q), h: HElem { free, torsion: r.torsion } })
    }
}

impl KElem {
    pub fn is_zero(&self) -> bool {
        self.q.is_zero() && self.h.is_zero()
    }

    /// Element literal: q-part fractions separated by commas, then `;` and
    /// the h-part (free coordinates first, then torsion residues).
    pub fn literal(&self) -> String {
        let q: Vec<String> = self.q.0.iter().map(fmt_rat).collect();
        let mut h: Vec<String> = self.h.free.iter().map(|n| n.to_string()).collect();
        h.extend(self.h.torsion.iter().map(|t| t.to_string()));
        if h.is_empty() {
            q.join(",")
        } else {
            format!("{};{}", q.join(","), h.join(","))
        }
    }
}

impl fmt::Display for KElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.literal())
    }
}

/// The shape of `Q^m ⊕ H`; element arithmetic needs the torsion orders.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Space {
    pub m: usize,
    pub h: HSpec,
}

impl Space {
    pub fn new(m: usize, h: HSpec) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("m must be positive".into()));
        }
        Ok(Space { m, h })
    }

    pub fn zero(&self) -> KElem {
        KElem {
            q: QVec::zero(self.m),
            h: HElem {
                free: vec![BigInt::zero(); self.h.free_rank],
                torsion: vec![0; self.h.torsion_orders.len()],
            },
        }
    }

    pub fn from_q(&self, q: QVec) -> KElem {
        assert_eq!(q.dim(), self.m);
        KElem { q, ..self.zero() }
    }

    pub fn elem(&self, q: QVec, free: Vec<i64>, torsion: Vec<u64>) -> Result<KElem> {
        let x = KElem {
            q,
            h: HElem { free: free.into_iter().map(BigInt::from).collect(), torsion },
        };
        self.check(&x)?;
        Ok(x)
    }

    pub fn check(&self, x: &KElem) -> Result<()> {
        if x.q.dim() != self.m
            || x.h.free.len() != self.h.free_rank
            || x.h.torsion.len() != self.h.torsion_orders.len()
        {
            return Err(Error::Argument(format!("element {x} has the wrong shape")));
        }
        for (t, d) in x.h.torsion.iter().zip(&self.h.torsion_orders) {
            if t >= d {
                return Err(Error::Argument(format!("torsion residue {t} not reduced mod {d}")));
            }
        }
        Ok(())
    }

    pub fn add(&self, a: &KElem, b: &KElem) -> KElem {
        KElem {
            q: a.q.add(&b.q),
            h: HElem {
                free: a.h.free.iter().zip(&b.h.free).map(|(x, y)| x + y).collect(),
                torsion: a
                    .h
                    .torsion
                    .iter()
                    .zip(&b.h.torsion)
                    .zip(&self.h.torsion_orders)
                    .map(|((x, y), d)| (x + y) % d)
                    .collect(),
            },
        }
    }

    pub fn neg(&self, a: &KElem) -> KElem {
        KElem {
            q: a.q.neg(),
            h: HElem {
                free: a.h.free.iter().map(|x| -x).collect(),
                torsion: a
                    .h
                    .torsion
                    .iter()
                    .zip(&self.h.torsion_orders)
                    .map(|(x, d)| (d - x) % d)
                    .collect(),
            },
        }
    }

    pub fn sub(&self, a: &KElem, b: &KElem) -> KElem {
        self.add(a, &self.neg(b))
    }

    pub fn scale(&self, a: &KElem, k: &BigInt) -> KElem {
        KElem {
            q: a.q.scale(k),
            h: HElem {
                free: a.h.free.iter().map(|x| x * k).collect(),
                torsion: a
                    .h
                    .torsion
                    .iter()
                    .zip(&self.h.torsion_orders)
                    .map(|(x, d)| {
                        let d = BigInt::from(*d);
                        (BigInt::from(*x) * k).mod_floor(&d).to_u64().unwrap()
                    })
                    .collect(),
            },
        }
    }

    pub fn sum<'a, I: IntoIterator<Item = &'a KElem>>(&self, xs: I) -> KElem {
        xs.into_iter().fold(self.zero(), |acc, x| self.add(&acc, x))
    }

    /// Enumeration height: the largest of |numerators|, denominators,
    /// |free coordinates| and torsion residues.
    pub fn height(&self, x: &KElem) -> BigInt {
        let mut h = BigInt::zero();
        for q in &x.q.0 {
            if !q.is_zero() {
                h = h.max(q.numer().abs()).max(q.denom().clone());
            }
        }
        for f in &x.h.free {
            h = h.max(f.abs());
        }
        for t in &x.h.torsion {
            h = h.max(BigInt::from(*t));
        }
        h
    }

    pub fn parse(&self, s: &str) -> Result<KElem> {
        let (qs, hs) = match s.split_once(';') {
            Some((a, b)) => (a, b),
            None => (s, ""),
        };
        let q: Vec<Rat> = qs.split(',').filter(|t| !t.trim().is_empty()).map(parse_rat).collect::<Result<_>>()?;
        let hv: Vec<&str> = hs.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
        let a = self.h.free_rank;
        let b = self.h.torsion_orders.len();
        if q.len() != self.m || hv.len() != a + b {
            return Err(Error::Parse(format!(
                "element {s:?} must have {} q-coordinates and {} h-coordinates",
                self.m,
                a + b
            )));
        }
        let free = hv[..a]
            .iter()
            .map(|t| t.parse::<BigInt>().map_err(|_| Error::Parse(format!("bad integer {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let torsion = hv[a..]
            .iter()
            .zip(&self.h.torsion_orders)
            .map(|(t, d)| {
                let v = t.parse::<i64>().map_err(|_| Error::Parse(format!("bad residue {t:?}")))?;
                Ok(v.rem_euclid(*d as i64) as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KElem { q: QVec(q), h: HElem { free, torsion } })
    }
}

/// A class `r mod q` of primes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResidueClass {
    pub residue: u64,
    pub modulus: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    FullQ,
    /// Denominators restricted to primes in a union of residue classes.
    Localized(Vec<ResidueClass>),
}

const WITNESS_SEARCH_LIMIT: u64 = 50_000_000;

/// A wide subgroup of `Q^m`: either all of `Q^m` or the vectors whose
/// denominators only involve primes from a union of residue classes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WideGroup {
    pub m: usize,
    pub kind: GroupKind,
}

impl WideGroup {
    pub fn full_q(m: usize) -> Self {
        WideGroup { m, kind: GroupKind::FullQ }
    }

    pub fn localized(m: usize, classes: Vec<ResidueClass>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Config("localized group needs at least one residue class".into()));
        }
        for c in &classes {
            if c.modulus == 0 || c.residue >= c.modulus || c.residue.gcd(&c.modulus) != 1 {
                return Err(Error::Config(format!(
                    "residue class {} mod {} must be reduced and coprime",
                    c.residue, c.modulus
                )));
            }
        }
        let g = WideGroup { m, kind: GroupKind::Localized(classes) };
        let hits = (2..10_000u64).filter(|&p| is_prime(p) && g.admits_prime(p)).count();
        if hits < 5 {
            return Err(Error::Config("prime predicate admits fewer than 5 primes below 10^4".into()));
        }
        Ok(g)
    }

    /// Whether denominators of `G` may contain `p`.
    pub fn admits_prime(&self, p: u64) -> bool {
        match &self.kind {
            GroupKind::FullQ => true,
            GroupKind::Localized(cs) => cs.iter().any(|c| p % c.modulus == c.residue),
        }
    }

    pub fn contains(&self, x: &QVec) -> bool {
        x.dim() == self.m && x.0.iter().all(|q| prime_factors(q.denom().magnitude()).into_iter().all(|p| self.admits_prime(p)))
    }

    /// An element of `G` outside `Q^m_π`: `(1/p, 0, …, 0)` for the least
    /// admissible prime `p ∉ π`.
    pub fn witness(&self, pi: &PrimeSet) -> Result<QVec> {
        let mut p = 2;
        while pi.contains(p) || !self.admits_prime(p) {
            p = next_prime(p);
            if p > WITNESS_SEARCH_LIMIT {
                return Err(Error::Construction(format!("no witness prime outside {pi} below the search limit")));
            }
        }
        let mut v = QVec::zero(self.m);
        v.0[0] = Rat::new(BigInt::one(), BigInt::from(p));
        Ok(v)
    }
}

/// The group `K = G ⊕ H` a construction runs in.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instance {
    pub space: Space,
    pub group: WideGroup,
}

impl Instance {
    pub fn new(space: Space, group: WideGroup) -> Result<Self> {
        if space.m != group.m {
            return Err(Error::Config(format!("group lives in Q^{} but m = {}", group.m, space.m)));
        }
        Ok(Instance { space, group })
    }

    pub fn in_k(&self, x: &KElem) -> bool {
        self.space.check(x).is_ok() && self.group.contains(&x.q)
    }

    pub fn enumerate(&self) -> KEnumerator {
        KEnumerator::new(&self.space, &self.group)
    }
}

/// Enumerates `K = G ⊕ H` by height, then lexicographically.
pub struct KEnumerator {
    space: Space,
    group: WideGroup,
    height: u64,
    buffer: Vec<KElem>,
    pos: usize,
}

impl KEnumerator {
    pub fn new(space: &Space, group: &WideGroup) -> Self {
        KEnumerator { space: space.clone(), group: group.clone(), height: 0, buffer: vec![space.zero()], pos: 0 }
    }
}

/// Rationals of height at most `h`, i.e. `a/b` reduced with `|a|, b ≤ h`.
fn rationals_up_to(h: u64) -> Vec<Rat> {
    let h = h as i64;
    let mut out = vec![Rat::zero()];
    for b in 1..=h {
        for a in -h..=h {
            if a != 0 && a.gcd(&b) == 1 {
                out.push(Rat::new(BigInt::from(a), BigInt::from(b)));
            }
        }
    }
    out.sort();
    out
}

/// All elements of `K` with height exactly `h`, sorted.
pub fn elements_of_height(space: &Space, group: &WideGroup, h: u64) -> Vec<KElem> {
    let rats = rationals_up_to(h);
    let mut coord_choices: Vec<Vec<KElemCoord>> = Vec::new();
    for _ in 0..space.m {
        coord_choices.push(rats.iter().cloned().map(KElemCoord::Q).collect());
    }
    for _ in 0..space.h.free_rank {
        coord_choices.push((-(h as i64)..=h as i64).map(|v| KElemCoord::Free(BigInt::from(v))).collect());
    }
    for d in &space.h.torsion_orders {
        coord_choices.push((0..(*d).min(h + 1)).map(KElemCoord::Tor).collect());
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(coord_choices.len());
    product(&coord_choices, &mut cur, &mut |coords| {
        let mut q = Vec::new();
        let mut free = Vec::new();
        let mut torsion = Vec::new();
        for c in coords {
            match c {
                KElemCoord::Q(r) => q.push(r.clone()),
                KElemCoord::Free(f) => free.push(f.clone()),
                KElemCoord::Tor(t) => torsion.push(*t),
            }
        }
        let x = KElem { q: QVec(q), h: HElem { free, torsion } };
        if space.height(&x) == BigInt::from(h) && group.contains(&x.q) {
            out.push(x);
        }
    });
    out.sort();
    out
}

#[derive(Clone)]
enum KElemCoord {
    Q(Rat),
    Free(BigInt),
    Tor(u64),
}

fn product<'a>(choices: &'a [Vec<KElemCoord>], cur: &mut Vec<&'a KElemCoord>, f: &mut dyn FnMut(&[&KElemCoord])) {
    if cur.len() == choices.len() {
        f(cur);
        return;
    }
    for c in &choices[cur.len()] {
        cur.push(c);
        product(choices, cur, f);
        cur.pop();
    }
}

impl Iterator for KEnumerator {
    type Item = KElem;
    fn next(&mut self) -> Option<KElem> {
        while self.pos >= self.buffer.len() {
            self.height += 1;
            self.buffer = elements_of_height(&self.space, &self.group, self.height);
            self.pos = 0;
        }
        self.pos += 1;
        Some(self.buffer[self.pos - 1].clone())
    }
}

/// The `i`-th element of the enumeration; index 0 is zero.
pub fn enumerate_k(space: &Space, group: &WideGroup, i: usize) -> KElem {
    KEnumerator::new(space, group).nth(i).expect("enumeration is infinite")
}

/// Number of elements of height at most `bound`; they occupy exactly the
/// first that many indices.
pub fn count_up_to_height(space: &Space, group: &WideGroup, bound: u64) -> usize {
    1 + (1..=bound).map(|h| elements_of_height(space, group, h).len()).sum::<usize>()
}

fn lattice_contains(v: &QVec, s: &BigInt) -> bool {
    v.in_lattice(&s.abs())
}

/// An element `g ∈ G` with `⟨g⟩ ∩ Q^m_π ⊆ sZ^m` and `l·g ∉ Q^m_π` for
/// `0 < |l| ≤ k`, built from a witness outside `Q^m_{π'}` where `π'` adds
/// every prime up to `max(k, |s|)`.
pub fn find_g(group: &WideGroup, pi: &PrimeSet, k: u64, s: &BigInt) -> Result<QVec> {
    if k == 0 {
        return Err(Error::Argument("k must be positive".into()));
    }
    if s.is_zero() {
        return Err(Error::Argument("s must be nonzero".into()));
    }
    let bound = s.abs().to_u64().map_or(u64::MAX, |v| v.max(k));
    let pi_wide = pi.union(&PrimeSet::up_to(bound));
    let h = group.witness(&pi_wide)?;
    if !group.contains(&h) || localized_member(&h, &pi_wide) {
        return Err(Error::Construction(format!("witness {h} does not escape Q^m_{pi_wide}")));
    }

    // a coordinate outside Q_{π'} and a prime p ∉ π' dividing its denominator
    let (t, p) = h
        .0
        .iter()
        .enumerate()
        .find_map(|(i, q)| {
            prime_factors(q.denom().magnitude()).into_iter().find(|p| !pi_wide.contains(*p)).map(|p| (i, p))
        })
        .expect("witness escapes Q_pi'");
    debug_assert!(!localized_member(&QVec(vec![h.0[t].clone()]), &pi_wide));

    let bp = BigInt::from(p);
    let mut m0 = s.clone();
    for q in &h.0 {
        let b = q.denom();
        let n_i = int_valuation(p, b) as u32;
        let c_i = b / bp.pow(n_i);
        m0 *= c_i;
    }
    let g = h.scale(&m0);
    check_find_g_post(&g, pi, k, s)?;
    Ok(g)
}

fn check_find_g_post(g: &QVec, pi: &PrimeSet, k: u64, s: &BigInt) -> Result<()> {
    if !lattice_contains(&cyclic_cap_localized(g, pi), s) || !lattice_contains(&cyclic_cap_qpi(g, pi), s) {
        return Err(Error::Construction(format!("<{g}> ∩ Q^m_{pi} is not inside {s}Z^m")));
    }
    for l in 1..=k as i64 {
        for l in [l, -l] {
            let lg = g.scale_i(l);
            if localized_member(&lg, pi) || qpi_member(&lg, pi) {
                return Err(Error::Construction(format!("{l}·{g} lies in Q^m_{pi}")));
            }
        }
    }
    Ok(())
}

/// `π_0 ⊆ π_1 ⊆ … ⊆ π_k` together with `g_1, …, g_k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GSequence {
    pub pis: Vec<PrimeSet>,
    #[serde(with = "qvec_list")]
    pub gs: Vec<QVec>,
    #[serde(with = "crate::arith::big_str")]
    pub s: BigInt,
}

pub(crate) mod qvec_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[QVec], ser: S) -> std::result::Result<S::Ok, S::Error> {
        let strs: Vec<Vec<String>> = v.iter().map(|q| q.0.iter().map(fmt_rat).collect()).collect();
        strs.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<QVec>, D::Error> {
        let strs: Vec<Vec<String>> = Vec::deserialize(de)?;
        strs.into_iter()
            .map(|v| v.iter().map(|s| parse_rat(s)).collect::<Result<Vec<_>>>().map(QVec))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)
    }
}

/// Iterates [`find_g`], enlarging `π` by exactly the new denominator primes
/// each time, and re-checks the three per-step conditions.
pub fn find_g_sequence(group: &WideGroup, pi0: &PrimeSet, k: u64, s: &BigInt) -> Result<GSequence> {
    let mut pis = vec![pi0.clone()];
    let mut gs = Vec::with_capacity(k as usize);
    for _ in 0..k {
        let prev = pis.last().unwrap().clone();
        let g = find_g(group, &prev, k, s)?;
        let next = prev.union(&g.denominator_primes());
        check_sequence_step(&g, &prev, &next, k, s)?;
        pis.push(next);
        gs.push(g);
    }
    Ok(GSequence { pis, gs, s: s.clone() })
}

fn check_sequence_step(g: &QVec, prev: &PrimeSet, next: &PrimeSet, k: u64, s: &BigInt) -> Result<()> {
    if !localized_member(g, next) {
        return Err(Error::Construction(format!("{g} ∉ Q^m_{next}")));
    }
    if !lattice_contains(&cyclic_cap_localized(g, prev), s) {
        return Err(Error::Construction(format!("<{g}> ∩ Q^m_{prev} is not inside sZ^m")));
    }
    for l in 1..=k as i64 {
        if localized_member(&g.scale_i(l), prev) || localized_member(&g.scale_i(-l), prev) {
            return Err(Error::Construction(format!("{l}·{g} ∈ Q^m_{prev}")));
        }
    }
    Ok(())
}
