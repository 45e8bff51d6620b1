//! Exact rationals, primes, p-adic valuations and the localized subgroups
//! `Q_π` of `Q`.
//!
//! Two readings of `Q_π` coexist here. [`qpi_member`] follows the convention
//! `Q_∅ = {0}`; [`localized_member`] is the plain "every prime divisor of
//! every denominator lies in `π`" predicate, which gives `Q_∅ = Z`. They agree
//! for every nonempty `π`. The poset construction only ever needs the second
//! one (it must contain `Z^m` for every `π`, including the empty set).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced fraction with positive denominator.
pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// `"a/b"` or `"a"`, always in lowest terms.
pub fn fmt_rat(q: &Rat) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a fraction: {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
            let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
            if d.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            Ok(Rat::new(n, d))
        }
        None => Ok(Rat::from_integer(BigInt::from_str(s).map_err(|_| bad())?)),
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

pub fn next_prime(mut n: u64) -> u64 {
    n += 1;
    while !is_prime(n) {
        n += 1;
    }
    n
}

pub fn primes_up_to(n: u64) -> Vec<u64> {
    (2..=n).filter(|&p| is_prime(p)).collect()
}

/// Distinct prime divisors of `n`, ascending. Trial division.
pub fn prime_factors(n: &BigUint) -> Vec<u64> {
    let mut out = Vec::new();
    if n.is_zero() {
        return out;
    }
    let mut rest = n.clone();
    let mut p = 2u64;
    loop {
        if rest.is_one() {
            break;
        }
        if let Some(r) = rest.to_u64() {
            if p.saturating_mul(p) > r {
                out.push(r);
                break;
            }
        }
        let bp = BigUint::from(p);
        if (&rest % &bp).is_zero() {
            out.push(p);
            while (&rest % &bp).is_zero() {
                rest /= &bp;
            }
        }
        p = if p == 2 { 3 } else { p + 2 };
    }
    out
}

/// Multiplicity of the prime `p` in the nonzero integer `n`.
pub fn int_valuation(p: u64, n: &BigInt) -> u64 {
    debug_assert!(!n.is_zero());
    let bp = BigInt::from(p);
    let mut m = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = m.div_rem(&bp);
        if !r.is_zero() {
            return v;
        }
        m = q;
        v += 1;
    }
}

/// p-adic valuation; `None` stands for +∞ (the valuation of zero).
pub fn valuation(p: u64, q: &Rat) -> Result<Option<i64>> {
    if !is_prime(p) {
        return Err(Error::Argument(format!("{p} is not prime")));
    }
    if q.is_zero() {
        return Ok(None);
    }
    let up = int_valuation(p, q.numer()) as i64;
    let down = int_valuation(p, q.denom()) as i64;
    Ok(Some(up - down))
}

/// A finite set of primes, kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct PrimeSet(BTreeSet<u64>);

impl PrimeSet {
    pub fn empty() -> Self {
        PrimeSet(BTreeSet::new())
    }

    pub fn new<I: IntoIterator<Item = u64>>(primes: I) -> Result<Self> {
        let mut set = BTreeSet::new();
        for p in primes {
            if !is_prime(p) {
                return Err(Error::Argument(format!("{p} is not prime")));
            }
            set.insert(p);
        }
        Ok(PrimeSet(set))
    }

    /// Primes not exceeding `n`.
    pub fn up_to(n: u64) -> Self {
        PrimeSet(primes_up_to(n).into_iter().collect())
    }

    pub fn contains(&self, p: u64) -> bool {
        self.0.contains(&p)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &PrimeSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn union(&self, other: &PrimeSet) -> PrimeSet {
        PrimeSet(self.0.union(&other.0).copied().collect())
    }

    pub fn insert(&mut self, p: u64) {
        assert!(is_prime(p), "{p} is not prime");
        self.0.insert(p);
    }
}

impl TryFrom<Vec<u64>> for PrimeSet {
    type Error = Error;
    fn try_from(v: Vec<u64>) -> Result<Self> {
        PrimeSet::new(v)
    }
}

impl From<PrimeSet> for Vec<u64> {
    fn from(p: PrimeSet) -> Self {
        p.0.into_iter().collect()
    }
}

impl fmt::Display for PrimeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Smallest prime not in `pi`.
pub fn min_prime_outside(pi: &PrimeSet) -> u64 {
    let mut p = 2;
    while pi.contains(p) {
        p = next_prime(p);
    }
    p
}

/// Largest divisor of `n` whose prime factors all lie outside `pi`.
pub fn outside_part(n: &BigInt, pi: &PrimeSet) -> BigInt {
    let mut rest = n.abs();
    for p in pi.iter() {
        let bp = BigInt::from(p);
        while (&rest % &bp).is_zero() {
            rest /= &bp;
        }
    }
    rest
}

/// An element of `Q^m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QVec(pub Vec<Rat>);

impl QVec {
    pub fn zero(m: usize) -> Self {
        QVec(vec![Rat::zero(); m])
    }

    pub fn from_ints(v: &[i64]) -> Self {
        QVec(v.iter().map(|&n| rat_int(n)).collect())
    }

    /// Standard basis vector `e_i` of `Z^m`.
    pub fn unit(m: usize, i: usize) -> Self {
        let mut v = Self::zero(m);
        v.0[i] = Rat::one();
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn is_integral(&self) -> bool {
        self.0.iter().all(|q| q.denom().is_one())
    }

    pub fn add(&self, o: &QVec) -> QVec {
        QVec(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &QVec) -> QVec {
        QVec(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> QVec {
        QVec(self.0.iter().map(|a| -a).collect())
    }

    pub fn scale(&self, k: &BigInt) -> QVec {
        let k = Rat::from_integer(k.clone());
        QVec(self.0.iter().map(|a| a * &k).collect())
    }

    pub fn scale_i(&self, k: i64) -> QVec {
        self.scale(&BigInt::from(k))
    }

    /// lcm of the coordinate denominators.
    pub fn denom_lcm(&self) -> BigInt {
        self.0.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
    }

    /// Every prime dividing some coordinate denominator.
    pub fn denominator_primes(&self) -> PrimeSet {
        let mut set = BTreeSet::new();
        for q in &self.0 {
            set.extend(prime_factors(q.denom().magnitude()));
        }
        PrimeSet(set)
    }

    /// Whether every coordinate is an integer multiple of `s`.
    pub fn in_lattice(&self, s: &BigInt) -> bool {
        self.0
            .iter()
            .all(|q| q.denom().is_one() && (q.numer() % s).is_zero())
    }
}

impl fmt::Display for QVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(fmt_rat).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Membership in `Q^m_π` with the convention `Q_∅ = {0}`.
pub fn qpi_member(x: &QVec, pi: &PrimeSet) -> bool {
    if pi.is_empty() {
        return x.is_zero();
    }
    localized_member(x, pi)
}

/// Every coordinate denominator has all its prime divisors in `pi`.
/// For `pi = ∅` this is integrality.
pub fn localized_member(x: &QVec, pi: &PrimeSet) -> bool {
    x.0.iter().all(|q| outside_part(q.denom(), pi).is_one())
}

/// The two readings of `Q_π` membership side by side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QpiFlags {
    pub integral: bool,
    pub in_q_pi: bool,
    pub localized: bool,
}

pub fn qpi_flags(x: &QVec, pi: &PrimeSet) -> QpiFlags {
    QpiFlags {
        integral: x.is_integral(),
        in_q_pi: qpi_member(x, pi),
        localized: localized_member(x, pi),
    }
}

/// Serde adapter writing big integers as decimal strings.
pub mod big_str {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigInt, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&n.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<BigInt, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// [`big_str`] for lists.
pub mod big_str_vec {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], ser: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(|n| n.to_string()).collect::<Vec<_>>().serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<BigInt>, D::Error> {
        let v = Vec::<String>::deserialize(de)?;
        v.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_denominator_primes(d: u64) -> Vec<u64> {
        (2..=d).filter(|&p| is_prime(p) && d % p == 0).collect()
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(valuation(3, &rat(1, 3)).unwrap(), Some(-1));
        assert_eq!(valuation(5, &rat(2, 5)).unwrap(), Some(-1));
        assert_eq!(valuation(2, &Rat::zero()).unwrap(), None);
        assert_eq!(valuation(2, &rat(12, 5)).unwrap(), Some(2));
        assert!(matches!(valuation(4, &rat(1, 2)), Err(Error::Argument(_))));
    }

    #[test]
    fn qpi_examples() {
        let two = PrimeSet::new([2]).unwrap();
        assert_eq!(trial_denominator_primes(4), vec![2]);
        assert!(qpi_member(&QVec(vec![rat(3, 4)]), &two));
        assert_eq!(trial_denominator_primes(6), vec![2, 3]);
        assert!(!qpi_member(&QVec(vec![rat(1, 6)]), &two));
        assert!(qpi_member(&QVec::from_ints(&[5, -7]), &two));
    }

    #[test]
    fn empty_prime_set_conventions() {
        let empty = PrimeSet::empty();
        let one = QVec::from_ints(&[1]);
        let f = qpi_flags(&one, &empty);
        assert!(f.integral && f.localized && !f.in_q_pi);
        assert!(qpi_member(&QVec::zero(2), &empty));
        assert!(!localized_member(&QVec(vec![rat(1, 2)]), &empty));
    }

    #[test]
    fn min_prime_outside_examples() {
        assert_eq!(min_prime_outside(&PrimeSet::empty()), 2);
        assert_eq!(min_prime_outside(&PrimeSet::new([2]).unwrap()), 3);
        assert_eq!(min_prime_outside(&PrimeSet::new([2, 3, 5]).unwrap()), 7);
    }

    #[test]
    fn prime_set_rejects_composites() {
        assert!(PrimeSet::new([2, 9]).is_err());
        let s = PrimeSet::new([7, 3, 3]).unwrap();
        assert_eq!(Vec::<u64>::from(s), vec![3, 7]);
    }

    #[test]
    fn factoring() {
        assert_eq!(prime_factors(&BigUint::from(105u32)), vec![3, 5, 7]);
        assert_eq!(prime_factors(&BigUint::from(1u32)), Vec::<u64>::new());
        assert_eq!(prime_factors(&BigUint::from(4u32 * 49)), vec![2, 7]);
        assert_eq!(prime_factors(&BigUint::from(97u32)), vec![97]);
    }

    #[test]
    fn rat_parsing() {
        assert_eq!(parse_rat("-2/4").unwrap(), rat(-1, 2));
        assert_eq!(fmt_rat(&parse_rat(" 6 ").unwrap()), "6");
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
    }
}
