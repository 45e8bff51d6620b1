use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::snf::{IntMat, Snf};
use crate::groups::{KElem, Space};

/// The coset `base + Z·g_1 + … + Z·g_r + sZ^m`, with `sZ^m` in the q-part.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub base: KElem,
    pub gens: Vec<KElem>,
    #[serde(with = "crate::arith::big_str")]
    pub modulus: BigInt,
}

/// `g` and `-g` generate the same cyclic group; keep the smaller one.
pub(crate) fn canonical_gen(space: &Space, g: &KElem) -> KElem {
    let n = space.neg(g);
    if n < *g {
        n
    } else {
        g.clone()
    }
}

impl Atom {
    pub fn new(space: &Space, base: KElem, gens: Vec<KElem>, modulus: BigInt) -> Atom {
        assert!(modulus.is_positive(), "lattice modulus must be positive");
        let mut gens: Vec<KElem> =
            gens.iter().filter(|g| !g.is_zero()).map(|g| canonical_gen(space, g)).collect();
        gens.sort();
        gens.dedup();
        Atom { base, gens, modulus }
    }

    /// `sZ^m`.
    pub fn lattice(space: &Space, s: &BigInt) -> Atom {
        Atom::new(space, space.zero(), vec![], s.clone())
    }

    pub fn point(space: &Space, x: &KElem, s: &BigInt) -> Atom {
        Atom::new(space, x.clone(), vec![], s.clone())
    }

    /// Minkowski sum: bases add, generators concatenate, moduli take the gcd.
    pub fn add(&self, space: &Space, o: &Atom) -> Atom {
        let mut gens = self.gens.clone();
        gens.extend(o.gens.iter().cloned());
        Atom::new(space, space.add(&self.base, &o.base), gens, self.modulus.gcd(&o.modulus))
    }

    pub fn neg(&self, space: &Space) -> Atom {
        Atom { base: space.neg(&self.base), gens: self.gens.clone(), modulus: self.modulus.clone() }
    }

    pub fn with_modulus(&self, s: &BigInt) -> Atom {
        Atom { base: self.base.clone(), gens: self.gens.clone(), modulus: s.clone() }
    }

    /// The sum of `t ≥ 1` copies of the atom: `t·base + span`.
    pub fn times(&self, space: &Space, t: u32) -> Atom {
        debug_assert!(t >= 1);
        Atom { base: space.scale(&self.base, &BigInt::from(t)), ..self.clone() }
    }

    pub fn is_lattice(&self) -> bool {
        self.base.is_zero() && self.gens.is_empty()
    }

    /// Least `d ≥ 1` with `d·v` in the subgroup `span(gens) + sZ^m`, or
    /// `None` if there is none.
    pub fn order_of(&self, space: &Space, v: &KElem) -> Option<BigInt> {
        Span::new(space, &self.gens, &self.modulus).order(space, v)
    }

    pub fn contains(&self, space: &Space, x: &KElem) -> bool {
        let v = space.sub(x, &self.base);
        self.order_of(space, &v).is_some_and(|d| d.is_one())
    }

    pub fn contains_zero(&self, space: &Space) -> bool {
        self.contains(space, &space.zero())
    }

    pub fn in_span(&self, space: &Space, v: &KElem) -> bool {
        self.order_of(space, v).is_some_and(|d| d.is_one())
    }

    /// Exact containment of cosets.
    pub fn subset_of(&self, space: &Space, o: &Atom) -> bool {
        if self == o {
            return true;
        }
        if !o.contains(space, &self.base) {
            return false;
        }
        if !(&self.modulus % &o.modulus).is_zero()
            && !(0..space.m).all(|i| {
                let mut e = space.zero();
                e.q.0[i] = self.modulus.clone().into();
                o.in_span(space, &e)
            })
        {
            return false;
        }
        self.gens.iter().all(|g| o.in_span(space, g))
    }

    /// Random element `base + Σ n_j g_j + s·z` with coefficients in `[-b, b]`.
    pub fn sample<R: rand::Rng>(&self, space: &Space, rng: &mut R, b: i64) -> KElem {
        let mut x = self.base.clone();
        for g in &self.gens {
            x = space.add(&x, &space.scale(g, &BigInt::from(rng.gen_range(-b..=b))));
        }
        for c in x.q.0.iter_mut() {
            *c += num_rational::BigRational::from_integer(&self.modulus * BigInt::from(rng.gen_range(-b..=b)));
        }
        x
    }
}

/// The subgroup `span(gens) + sZ^m` as an integer system: columns are the
/// generators, the lattice and the torsion relations, and q-rows are
/// scaled by the lcm `l` of the generator denominators.
pub(crate) struct Span {
    snf: Snf,
    l: BigInt,
}

impl Span {
    pub(crate) fn new(space: &Space, gens: &[KElem], s: &BigInt) -> Span {
        let m = space.m;
        let a = space.h.free_rank;
        let b = space.h.torsion_orders.len();
        let l = gens.iter().fold(BigInt::one(), |acc, g| acc.lcm(&g.q.denom_lcm()));
        let cols = gens.len() + m + b;
        let mut mat: IntMat = vec![vec![BigInt::zero(); cols]; m + a + b];
        for i in 0..m {
            for (j, g) in gens.iter().enumerate() {
                mat[i][j] = scaled(&g.q.0[i], &l);
            }
            mat[i][gens.len() + i] = s * &l;
        }
        for i in 0..a {
            for (j, g) in gens.iter().enumerate() {
                mat[m + i][j] = g.h.free[i].clone();
            }
        }
        for i in 0..b {
            for (j, g) in gens.iter().enumerate() {
                mat[m + a + i][j] = BigInt::from(g.h.torsion[i]);
            }
            mat[m + a + i][gens.len() + m + i] = BigInt::from(space.h.torsion_orders[i]);
        }
        Span { snf: Snf::new(&mat, cols), l }
    }

    /// Least `d ≥ 1` with `d·v` in the span. Any such `d` clears the
    /// denominators of `v` that `l` lacks, so `d = t·order(t·v)` with `t`
    /// the least such factor.
    pub(crate) fn order(&self, space: &Space, v: &KElem) -> Option<BigInt> {
        let t = v.q.0.iter().fold(BigInt::one(), |acc, c| {
            let d = c.denom();
            acc.lcm(&(d / d.gcd(&self.l)))
        });
        let tv = space.scale(v, &t);
        let mut rhs: Vec<BigInt> = tv.q.0.iter().map(|c| scaled(c, &self.l)).collect();
        rhs.extend(tv.h.free.iter().cloned());
        rhs.extend(tv.h.torsion.iter().map(|&r| BigInt::from(r)));
        self.snf.order_mod_span(&rhs).map(|d| d * t)
    }
}

fn scaled(q: &num_rational::BigRational, l: &BigInt) -> BigInt {
    (q * num_rational::BigRational::from_integer(l.clone())).to_integer()
}
