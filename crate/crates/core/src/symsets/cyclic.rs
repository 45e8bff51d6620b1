use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use super::snf::snf_solve;
use crate::arith::{outside_part, PrimeSet, QVec, Rat};
use crate::groups::{KElem, Space};

fn outside_denominator(g: &QVec, pi: &PrimeSet) -> BigInt {
    g.0.iter().fold(BigInt::one(), |acc, q| acc.lcm(&outside_part(q.denom(), pi)))
}

/// Generator of `⟨g⟩ ∩ Q^m_π` with `Q_∅ = {0}`.
pub fn cyclic_cap_qpi(g: &QVec, pi: &PrimeSet) -> QVec {
    if pi.is_empty() {
        return QVec::zero(g.dim());
    }
    cyclic_cap_localized(g, pi)
}

/// Generator `D·g` of `⟨g⟩ ∩ Q^m_π` when `Q_∅` is read as `Z`.
pub fn cyclic_cap_localized(g: &QVec, pi: &PrimeSet) -> QVec {
    g.scale(&outside_denominator(g, pi))
}

/// Decides `x ∈ Z·gens + Q^m_π` (with `Q_∅ = Z`). Only the denominators
/// outside `π` matter: with `M` their lcm, the question becomes a linear
/// congruence system modulo `M`.
pub fn member_mod_qpi(x: &QVec, gens: &[QVec], pi: &PrimeSet) -> bool {
    let m = x.dim();
    let big_m = gens.iter().fold(outside_denominator(x, pi), |acc, g| acc.lcm(&outside_denominator(g, pi)));
    if big_m.is_one() {
        return true;
    }
    let residue = |q: &Rat| -> BigInt {
        let b = q.denom();
        let b_out = outside_part(b, pi);
        let b_in = b / &b_out;
        let inv = mod_inverse(&b_in, &big_m);
        (q.numer() * (&big_m / &b_out) * inv).mod_floor(&big_m)
    };
    let cols = gens.len() + m;
    let mut a = vec![vec![BigInt::zero(); cols]; m];
    let mut c = Vec::with_capacity(m);
    for i in 0..m {
        for (j, g) in gens.iter().enumerate() {
            a[i][j] = residue(&g.0[i]);
        }
        a[i][gens.len() + i] = big_m.clone();
        c.push(residue(&x.0[i]));
    }
    snf_solve(&a, &c).is_some()
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> BigInt {
    let e = a.extended_gcd(m);
    debug_assert!(e.gcd.is_one());
    e.x.mod_floor(m)
}

/// All sums of at most `k` elements of `a`, repetition allowed.
pub fn grp_bounded(space: &Space, a: &[KElem], k: usize) -> Vec<KElem> {
    let mut all: BTreeSet<KElem> = BTreeSet::from([space.zero()]);
    let mut frontier = all.clone();
    for _ in 0..k {
        let mut next = BTreeSet::new();
        for x in &frontier {
            for y in a {
                let z = space.add(x, y);
                if !all.contains(&z) {
                    next.insert(z);
                }
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{localized_member, qpi_member, rat};
    use crate::groups::HSpec;

    fn ps(v: &[u64]) -> PrimeSet {
        PrimeSet::new(v.iter().copied()).unwrap()
    }

    #[test]
    fn cap_examples() {
        assert_eq!(cyclic_cap_qpi(&QVec(vec![rat(2, 5)]), &ps(&[3])), QVec::from_ints(&[2]));
        assert_eq!(cyclic_cap_qpi(&QVec::from_ints(&[4, -2]), &ps(&[7])), QVec::from_ints(&[4, -2]));
        assert!(cyclic_cap_qpi(&QVec(vec![rat(1, 3)]), &PrimeSet::empty()).is_zero());
        assert_eq!(cyclic_cap_localized(&QVec(vec![rat(1, 3)]), &PrimeSet::empty()), QVec::from_ints(&[1]));
    }

    #[test]
    fn cap_divisibility() {
        for (g, pi) in [(QVec(vec![rat(2, 15), rat(1, 7)]), ps(&[3])), (QVec(vec![rat(5, 12)]), ps(&[2, 5]))] {
            let gen = cyclic_cap_qpi(&g, &pi);
            let d = (gen.0.iter().zip(&g.0).find(|(_, b)| !b.is_zero()).map(|(a, b)| a / b).unwrap()).to_integer();
            for n in -50i64..=50 {
                let ng = g.scale_i(n);
                assert_eq!(qpi_member(&ng, &pi), (BigInt::from(n) % &d).is_zero(), "n={n}");
            }
        }
    }

    #[test]
    fn mod_qpi_examples() {
        assert!(member_mod_qpi(&QVec(vec![rat(1, 9)]), &[QVec(vec![rat(1, 5)])], &ps(&[3])));
        assert!(!member_mod_qpi(&QVec(vec![rat(1, 3)]), &[QVec(vec![rat(1, 5)])], &ps(&[5])));
        assert!(member_mod_qpi(&QVec(vec![rat(2, 15)]), &[QVec(vec![rat(1, 5)])], &ps(&[3])));
    }

    #[test]
    fn mod_qpi_matches_search() {
        let pi = ps(&[2]);
        let gens = [QVec(vec![rat(1, 6), rat(1, 5)]), QVec(vec![rat(0, 1), rat(3, 10)])];
        for a in -12i64..=12 {
            for b in [1i64, 2, 3, 5, 15, 30] {
                let x = QVec(vec![rat(a, b), rat(1, 5)]);
                let mut brute = false;
                for n1 in -8i64..=8 {
                    for n2 in -8i64..=8 {
                        let r = x.sub(&gens[0].scale_i(n1)).sub(&gens[1].scale_i(n2));
                        brute |= localized_member(&r, &pi);
                    }
                }
                assert_eq!(member_mod_qpi(&x, &gens, &pi), brute, "{x}");
            }
        }
    }

    #[test]
    fn bounded_envelope() {
        let sp = Space::new(1, HSpec::trivial()).unwrap();
        let a = sp.parse("3").unwrap();
        let got = grp_bounded(&sp, &[a.clone(), sp.neg(&a)], 2);
        let lits: Vec<String> = got.iter().map(KElem::literal).collect();
        assert_eq!(lits, vec!["-6", "-3", "0", "3", "6"]);
        assert_eq!(grp_bounded(&sp, &[sp.zero()], 4), vec![sp.zero()]);
    }
}
