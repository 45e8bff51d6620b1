//! Symbolic subsets of `K`: finite unions of cosets
//! `b + Z·g_1 + … + Z·g_r + sZ^m`, with exact membership.
//!
//! Sums of unions grow fast, so a [`SymSet`] is a union of [`Term`]s, each a
//! factored family of atoms (a core atom plus a fixed number of picks from
//! pools of atoms). Membership is still decided exactly.

mod atom;
mod cyclic;
pub mod snf;
mod term;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

pub use atom::Atom;
pub use cyclic::{cyclic_cap_localized, cyclic_cap_qpi, grp_bounded, member_mod_qpi};
pub use snf::snf_solve;
pub use term::{Choice, Term};

use crate::groups::{KElem, Space};

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymSet {
    pub terms: Vec<Term>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CyclicMode {
    Syntactic,
    Bounded(u32),
}

impl SymSet {
    pub fn empty() -> Self {
        SymSet { terms: vec![] }
    }

    pub fn from_atoms(space: &Space, atoms: Vec<Atom>) -> Self {
        SymSet::from_terms(space, atoms.into_iter().map(Term::atom).collect())
    }

    /// Sorted, deduplicated, with terms contained in another term dropped.
    pub fn from_terms(space: &Space, terms: Vec<Term>) -> Self {
        let mut terms: Vec<Term> = terms.into_iter().map(|t| t.normalize(space)).collect();
        terms.sort();
        terms.dedup();
        let mut keep = vec![true; terms.len()];
        for i in 0..terms.len() {
            for j in 0..terms.len() {
                if i != j && keep[j] && terms[i].subset_of(space, &terms[j]) {
                    // of two equal sets keep the earlier one
                    if j > i && terms[j].subset_of(space, &terms[i]) {
                        continue;
                    }
                    keep[i] = false;
                    break;
                }
            }
        }
        let terms = terms.into_iter().zip(keep).filter(|(_, k)| *k).map(|(t, _)| t).collect();
        SymSet { terms }
    }

    pub fn lattice(space: &Space, s: &BigInt) -> Self {
        SymSet { terms: vec![Term::atom(Atom::lattice(space, s))] }
    }

    pub fn member(&self, space: &Space, x: &KElem) -> bool {
        self.terms.iter().any(|t| t.contains(space, x))
    }

    pub fn union(&self, space: &Space, o: &SymSet) -> SymSet {
        let mut terms = self.terms.clone();
        terms.extend(o.terms.iter().cloned());
        SymSet::from_terms(space, terms)
    }

    /// `{x + y : x ∈ self, y ∈ o}`, distributing the sum over both unions.
    pub fn sum(&self, space: &Space, o: &SymSet) -> SymSet {
        let mut terms = Vec::with_capacity(self.terms.len() * o.terms.len());
        for (i, a) in self.terms.iter().enumerate() {
            for (j, b) in o.terms.iter().enumerate() {
                // a + b = b + a when both sides are the same set
                if self == o && j < i {
                    continue;
                }
                terms.push(a.add(space, b));
            }
        }
        SymSet::from_terms(space, terms)
    }

    pub fn neg(&self, space: &Space) -> SymSet {
        SymSet::from_terms(space, self.terms.iter().map(|t| t.neg(space)).collect())
    }

    /// Every term's negation lies inside some term.
    pub fn is_symmetric(&self, space: &Space) -> bool {
        self.terms.iter().all(|t| {
            let n = t.neg(space);
            self.terms.iter().any(|u| n.subset_of(space, u))
        })
    }

    /// Term-level containment `self ⊆ o`; sound, not complete.
    pub fn subset_of(&self, space: &Space, o: &SymSet) -> bool {
        self.terms.iter().all(|t| o.terms.iter().any(|u| t.subset_of(space, u)))
    }

    pub fn atom_count(&self, space: &Space) -> usize {
        self.terms.iter().map(|t| t.expand(space).len()).sum()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Collapses the union into a single pooled term `sZ^m + (one pick)`.
    /// Only valid when the set already satisfies `U + sZ^m = U` and
    /// contains 0, which the deepest level of a condition does.
    pub fn pooled(&self, space: &Space, s: &BigInt) -> SymSet {
        let lat = Atom::lattice(space, s);
        let mut pool = vec![lat.clone()];
        let mut rest = Vec::new();
        for t in &self.terms {
            if t.is_atom() {
                pool.push(t.core.clone());
            } else if t.core == lat && t.choices.len() == 1 && t.choices[0].count == 1 {
                pool.extend(t.choices[0].pool.iter().cloned());
            } else {
                rest.push(t.clone());
            }
        }
        rest.push(Term { core: lat, choices: vec![Choice { pool, count: 1 }] });
        SymSet::from_terms(space, rest)
    }

    pub fn sample<R: rand::Rng>(&self, space: &Space, rng: &mut R, b: i64) -> Option<KElem> {
        if self.terms.is_empty() {
            return None;
        }
        let t = &self.terms[rng.gen_range(0..self.terms.len())];
        Some(t.sample(space, rng, b))
    }
}

/// `⟨g⟩ ⊆ S`, either read off the structure of `S` or checked on `n·g`
/// for `|n| ≤ N`.
pub fn cyclic_in_set(space: &Space, g: &KElem, s: &SymSet, mode: CyclicMode) -> bool {
    match mode {
        CyclicMode::Syntactic => s.terms.iter().any(|t| syntactic_cyclic(space, g, t)),
        CyclicMode::Bounded(n) => (-(n as i64)..=n as i64)
            .all(|k| s.member(space, &space.scale(g, &BigInt::from(k)))),
    }
}

fn syntactic_cyclic(space: &Space, g: &KElem, t: &Term) -> bool {
    let g = atom::canonical_gen(space, g);
    if g.is_zero() {
        return t.contains_zero(space);
    }
    if !t.core.base.is_zero() {
        return false;
    }
    let fillable = |c: &Choice| c.pool.iter().any(|a| a.base.is_zero());
    if t.core.gens.contains(&g) {
        return t.choices.iter().all(fillable);
    }
    t.choices.iter().enumerate().any(|(i, c)| {
        c.pool.iter().any(|a| a.base.is_zero() && a.gens.contains(&g))
            && (c.count == 1 || fillable(c))
            && t.choices.iter().enumerate().all(|(j, d)| j == i || fillable(d))
    })
}

/// `target = head + Σ cyclic_parts`, with `head ∈ U_level` and each
/// `⟨cyclic_part⟩ ⊆ U_level`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SSGPWitness {
    pub target: KElem,
    pub level: usize,
    pub head: KElem,
    pub cyclic_parts: Vec<KElem>,
}

impl SSGPWitness {
    pub fn identity_holds(&self, space: &Space) -> bool {
        space.add(&self.head, &space.sum(&self.cyclic_parts)) == self.target
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::HSpec;
    use num_traits::One;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sp() -> Space {
        Space::new(1, HSpec::new(0, vec![2]).unwrap()).unwrap()
    }

    fn worked_deepest(space: &Space) -> SymSet {
        let one = BigInt::one();
        let atoms = vec![
            Atom::lattice(space, &one),
            Atom::point(space, &space.parse("-1/105;0").unwrap(), &one),
            Atom::point(space, &space.parse("1/105;0").unwrap(), &one),
            Atom::new(space, space.zero(), vec![space.parse("1/5;0").unwrap()], one.clone()),
            Atom::new(space, space.zero(), vec![space.parse("1/7;0").unwrap()], one.clone()),
        ];
        SymSet::from_atoms(space, atoms).pooled(space, &one)
    }

    #[test]
    fn sum_examples() {
        let space = sp();
        let z = SymSet::lattice(&space, &BigInt::one());
        assert_eq!(z.sum(&space, &z), z);
        let a = SymSet::from_atoms(&space, vec![Atom::point(&space, &space.parse("1/3;1").unwrap(), &BigInt::from(2))]);
        let b = SymSet::from_atoms(&space, vec![Atom::point(&space, &space.parse("1/5;0").unwrap(), &BigInt::from(4))]);
        let s = a.sum(&space, &b);
        assert_eq!(s.terms.len(), 1);
        assert_eq!(s.terms[0].core, Atom::point(&space, &space.parse("8/15;1").unwrap(), &BigInt::from(2)));
    }

    #[test]
    fn sampled_sums_are_members() {
        let space = sp();
        let u = worked_deepest(&space);
        let uu = u.sum(&space, &u);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..60 {
            let x = u.sample(&space, &mut rng, 12).unwrap();
            let y = u.sample(&space, &mut rng, 12).unwrap();
            assert!(uu.member(&space, &space.add(&x, &y)));
        }
        assert!(!u.member(&space, &space.parse("2/105;0").unwrap()));
        assert!(uu.member(&space, &space.parse("2/105;0").unwrap()));
    }

    #[test]
    fn cyclic_membership() {
        let space = sp();
        let u = worked_deepest(&space);
        let g = space.parse("1/5;0").unwrap();
        assert!(cyclic_in_set(&space, &g, &u, CyclicMode::Syntactic));
        assert!(cyclic_in_set(&space, &g, &u, CyclicMode::Bounded(25)));
        assert!(cyclic_in_set(&space, &space.neg(&g), &u, CyclicMode::Syntactic));
        let h = space.parse("1/105;0").unwrap();
        assert!(!cyclic_in_set(&space, &h, &u, CyclicMode::Syntactic));
        assert!(!cyclic_in_set(&space, &h, &u, CyclicMode::Bounded(3)));
    }

    #[test]
    fn symmetry_and_serialization() {
        let space = sp();
        let u = worked_deepest(&space);
        assert!(u.is_symmetric(&space));
        let one_sided = SymSet::from_atoms(&space, vec![Atom::point(&space, &space.parse("1/3;0").unwrap(), &BigInt::one())]);
        assert!(!one_sided.is_symmetric(&space));
        let json = serde_json::to_string(&u).unwrap();
        let back: SymSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, u);
        assert!(json.contains("\"1/105\""));
    }

    #[test]
    fn witness_identity() {
        let space = sp();
        let w = SSGPWitness {
            target: space.parse("1/3;0").unwrap(),
            level: 1,
            head: space.parse("-1/105;0").unwrap(),
            cyclic_parts: vec![space.parse("1/5;0").unwrap(), space.parse("1/7;0").unwrap()],
        };
        assert!(w.identity_holds(&space));
    }
}
