use std::collections::{HashMap, HashSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::atom::{Atom, Span};
use crate::arith::{int_valuation, prime_factors, valuation};
use crate::groups::{KElem, Space};

/// Exactly `count` atoms drawn from `pool` with repetition and added up.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Choice {
    pub pool: Vec<Atom>,
    pub count: u32,
}

/// `core + Σ_c (sum of count_c atoms from pool_c)`: a finite union of atoms
/// kept in factored form. A term without choices is a single atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term {
    pub core: Atom,
    pub choices: Vec<Choice>,
}

impl Term {
    pub fn atom(a: Atom) -> Term {
        Term { core: a, choices: vec![] }
    }

    pub fn is_atom(&self) -> bool {
        self.choices.is_empty()
    }

    /// Brings the term to normal form without changing the set it denotes.
    pub fn normalize(mut self, space: &Space) -> Term {
        loop {
            let s = self.core.modulus.clone();
            let mut changed = false;
            let mut choices: Vec<Choice> = Vec::new();
            for mut ch in std::mem::take(&mut self.choices) {
                if ch.count == 0 || ch.pool.is_empty() {
                    continue;
                }
                // the core already contributes sZ^m
                for a in ch.pool.iter_mut() {
                    let g = a.modulus.gcd(&s);
                    if g != a.modulus {
                        *a = a.with_modulus(&g);
                    }
                }
                ch.pool.sort();
                ch.pool.dedup();
                if ch.pool.iter().all(|a| a.is_lattice() && a.modulus == s) {
                    continue;
                }
                if ch.pool.len() == 1 {
                    self.core = self.core.add(space, &ch.pool[0].times(space, ch.count));
                    changed = true;
                    continue;
                }
                match choices.iter_mut().find(|c| c.pool == ch.pool) {
                    Some(c) => c.count += ch.count,
                    None => choices.push(ch),
                }
            }
            choices.sort();
            self.choices = choices;
            if !changed {
                return self;
            }
        }
    }

    pub fn add(&self, space: &Space, o: &Term) -> Term {
        let mut choices = self.choices.clone();
        choices.extend(o.choices.iter().cloned());
        Term { core: self.core.add(space, &o.core), choices }.normalize(space)
    }

    pub fn neg(&self, space: &Space) -> Term {
        Term {
            core: self.core.neg(space),
            choices: self
                .choices
                .iter()
                .map(|c| Choice { pool: c.pool.iter().map(|a| a.neg(space)).collect(), count: c.count })
                .collect(),
        }
        .normalize(space)
    }

    pub fn sample<R: rand::Rng>(&self, space: &Space, rng: &mut R, b: i64) -> KElem {
        let mut x = self.core.sample(space, rng, b);
        for c in &self.choices {
            for _ in 0..c.count {
                let a = &c.pool[rng.gen_range(0..c.pool.len())];
                x = space.add(&x, &a.sample(space, rng, b));
            }
        }
        x
    }

    /// Every atom the term stands for; exponential in the choice counts, so
    /// only meant for small terms and tests.
    pub fn expand(&self, space: &Space) -> Vec<Atom> {
        let mut acc = vec![self.core.clone()];
        for c in &self.choices {
            for _ in 0..c.count {
                let mut next = Vec::new();
                for a in &acc {
                    for p in &c.pool {
                        next.push(a.add(space, p));
                    }
                }
                next.sort();
                next.dedup();
                acc = next;
            }
        }
        acc
    }

    pub fn contains(&self, space: &Space, x: &KElem) -> bool {
        if self.is_atom() {
            return self.core.contains(space, x);
        }
        Search::new(space, self, x).run()
    }

    pub fn contains_zero(&self, space: &Space) -> bool {
        self.contains(space, &space.zero())
    }

    /// Sound but incomplete containment test: `true` only when `self ⊆ o`.
    pub fn subset_of(&self, space: &Space, o: &Term) -> bool {
        if self == o {
            return true;
        }
        if !self.core.subset_of(space, &o.core) {
            return false;
        }
        let group = Atom { base: space.zero(), ..o.core.clone() };
        let mut capacity: Vec<u32> = o.choices.iter().map(|c| c.count).collect();
        for ch in &self.choices {
            if ch.pool.iter().all(|a| a.subset_of(space, &group)) {
                continue;
            }
            let slot = o.choices.iter().enumerate().find(|(j, oc)| {
                capacity[*j] >= ch.count
                    && ch.pool.iter().all(|a| oc.pool.iter().any(|b| a == b || a.subset_of(space, b)))
            });
            match slot {
                Some((j, _)) => capacity[j] -= ch.count,
                None => return false,
            }
        }
        o.choices
            .iter()
            .zip(&capacity)
            .all(|(c, &left)| left == 0 || c.pool.iter().any(|a| a.contains_zero(space)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Key {
    Prime(u64),
    Free,
}

/// Depth-first search over the multisets of pool picks. At each node the
/// picked atoms are added to the core; if the target is not in that atom,
/// the order of the residue modulo the atom's subgroup tells which primes
/// (or the free part) still disagree, and only pool atoms able to change
/// that component are tried next.
struct Search<'a> {
    space: &'a Space,
    term: &'a Term,
    x: &'a KElem,
    offsets: Vec<usize>,
    zero_fill: Vec<bool>,
    // index of the negated atom in the same pool, when picking both is
    // dominated by picking the zero atom twice
    twin: Vec<Vec<Option<usize>>>,
    seen: HashSet<Vec<u32>>,
    spans: HashMap<(Vec<KElem>, BigInt), Span>,
    // per pool atom: whether it has a free part, and per prime the least
    // valuation of its q-coordinates, the valuation of its modulus and
    // whether a torsion residue is not divisible by the full p-power
    has_free: Vec<Vec<bool>>,
    prime_info: HashMap<(usize, usize, u64), (i64, i64, bool)>,
}

impl<'a> Search<'a> {
    fn new(space: &'a Space, term: &'a Term, x: &'a KElem) -> Self {
        let mut offsets = Vec::new();
        let mut total = 0;
        for c in &term.choices {
            offsets.push(total);
            total += c.pool.len();
        }
        let zero_fill = term.choices.iter().map(|c| c.pool.iter().any(|a| a.contains_zero(space))).collect();
        let twin = term
            .choices
            .iter()
            .map(|c| {
                c.pool
                    .iter()
                    .map(|a| {
                        let dominated = c
                            .pool
                            .iter()
                            .any(|z| z.is_lattice() && (&a.modulus % &z.modulus).is_zero());
                        if !a.gens.is_empty() || a.base.is_zero() || !dominated {
                            return None;
                        }
                        let n = a.neg(space);
                        c.pool.iter().position(|b| *b == n)
                    })
                    .collect()
            })
            .collect();
        let free_part = |e: &KElem| e.h.free.iter().any(|f| !f.is_zero());
        let has_free = term
            .choices
            .iter()
            .map(|c| c.pool.iter().map(|a| free_part(&a.base) || a.gens.iter().any(free_part)).collect())
            .collect();
        Search {
            space,
            term,
            x,
            offsets,
            zero_fill,
            twin,
            seen: HashSet::new(),
            spans: HashMap::new(),
            has_free,
            prime_info: HashMap::new(),
        }
    }

    fn run(&mut self) -> bool {
        let total = self.offsets.last().map_or(0, |o| o + self.term.choices.last().unwrap().pool.len());
        let mut picked = vec![0u32; total];
        let mut remaining: Vec<u32> = self.term.choices.iter().map(|c| c.count).collect();
        let core = self.term.core.clone();
        self.dfs(&core, &mut remaining, &mut picked)
    }

    fn relevant(&mut self, (c, i): (usize, usize), key: Key, e: &HashMap<u64, i64>) -> bool {
        if self.has_free[c][i] {
            return true;
        }
        let p = match key {
            Key::Free => return false,
            Key::Prime(p) => p,
        };
        let e = e[&p];
        let (min_val, mod_val, torsion) = *self.prime_info.entry((c, i, p)).or_insert_with(|| {
            let a = &self.term.choices[c].pool[i];
            let orders = &self.space.h.torsion_orders;
            let elems = || std::iter::once(&a.base).chain(&a.gens);
            let min_val = elems()
                .flat_map(|g| g.q.0.iter().filter_map(|q| valuation(p, q).unwrap()))
                .min()
                .unwrap_or(i64::MAX);
            let torsion = elems().any(|g| {
                g.h.torsion.iter().zip(orders).any(|(&t, &d)| {
                    if d % p != 0 {
                        return false;
                    }
                    let mut pe = 1;
                    while d % (pe * p) == 0 {
                        pe *= p;
                    }
                    t % pe != 0
                })
            });
            (min_val, int_valuation(p, &a.modulus) as i64, torsion)
        });
        mod_val < e || min_val < e || torsion
    }

    fn order(&mut self, acc: &Atom, v: &KElem) -> Option<BigInt> {
        let space = self.space;
        self.spans
            .entry((acc.gens.clone(), acc.modulus.clone()))
            .or_insert_with(|| Span::new(space, &acc.gens, &acc.modulus))
            .order(space, v)
    }

    fn dfs(&mut self, acc: &Atom, remaining: &mut [u32], picked: &mut [u32]) -> bool {
        if !self.seen.insert(picked.to_vec()) {
            return false;
        }
        let v = self.space.sub(self.x, &acc.base);
        let keys: Vec<Key> = match self.order(acc, &v) {
            Some(d) if d.is_one() => vec![],
            Some(d) => prime_factors(d.magnitude()).into_iter().map(Key::Prime).collect(),
            None => vec![Key::Free],
        };

        let candidates: Vec<(usize, usize)> = if keys.is_empty() {
            match (0..remaining.len()).find(|&c| remaining[c] > 0 && !self.zero_fill[c]) {
                None => return true,
                Some(c) => (0..self.term.choices[c].pool.len()).map(|i| (c, i)).collect(),
            }
        } else {
            let open: Vec<(usize, usize)> = (0..remaining.len())
                .filter(|&c| remaining[c] > 0)
                .flat_map(|c| (0..self.term.choices[c].pool.len()).map(move |i| (c, i)))
                .collect();
            let e: HashMap<u64, i64> = keys
                .iter()
                .filter_map(|k| match k {
                    Key::Prime(p) => Some((*p, int_valuation(*p, &acc.modulus) as i64)),
                    Key::Free => None,
                })
                .collect();
            let mut per_key: Vec<Vec<(usize, usize)>> = Vec::with_capacity(keys.len());
            for &k in &keys {
                let mut list = Vec::new();
                for &ci in &open {
                    if self.relevant(ci, k, &e) {
                        list.push(ci);
                    }
                }
                per_key.push(list);
            }
            if per_key.iter().any(Vec::is_empty) {
                return false;
            }
            let max_cover = open
                .iter()
                .map(|ci| per_key.iter().filter(|l| l.contains(ci)).count())
                .max()
                .unwrap_or(0)
                .max(1);
            let left: u32 = remaining.iter().sum();
            if keys.len().div_ceil(max_cover) > left as usize {
                return false;
            }
            per_key.into_iter().min_by_key(Vec::len).unwrap()
        };

        for (c, i) in candidates {
            if let Some(j) = self.twin[c][i] {
                if picked[self.offsets[c] + j] > 0 {
                    continue;
                }
            }
            let next = acc.add(self.space, &self.term.choices[c].pool[i]);
            remaining[c] -= 1;
            picked[self.offsets[c] + i] += 1;
            let found = self.dfs(&next, remaining, picked);
            remaining[c] += 1;
            picked[self.offsets[c] + i] -= 1;
            if found {
                return true;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::HSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sp() -> Space {
        Space::new(1, HSpec::new(0, vec![2]).unwrap()).unwrap()
    }

    fn pt(space: &Space, s: &str, m: i64) -> Atom {
        Atom::point(space, &space.parse(s).unwrap(), &BigInt::from(m))
    }

    fn worked_pool(space: &Space) -> Vec<Atom> {
        vec![
            pt(space, "0;0", 1),
            pt(space, "-1/105;1", 1),
            pt(space, "1/105;1", 1),
            Atom::new(space, space.zero(), vec![space.parse("1/5;0").unwrap()], BigInt::one()),
            Atom::new(space, space.zero(), vec![space.parse("1/7;0").unwrap()], BigInt::one()),
        ]
    }

    #[test]
    fn factored_membership_agrees_with_expansion() {
        let space = sp();
        let term = Term {
            core: Atom::lattice(&space, &BigInt::one()),
            choices: vec![Choice { pool: worked_pool(&space), count: 3 }],
        }
        .normalize(&space);
        let atoms = term.expand(&space);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let den = [1, 3, 5, 7, 15, 21, 35, 105, 2][rand::Rng::gen_range(&mut rng, 0..9)];
            let num = rand::Rng::gen_range(&mut rng, -40i64..=40);
            let t = rand::Rng::gen_range(&mut rng, 0..2u64);
            let x = space.parse(&format!("{num}/{den};{t}")).unwrap();
            let brute = atoms.iter().any(|a| a.contains(&space, &x));
            assert_eq!(term.contains(&space, &x), brute, "{x}");
        }
    }

    #[test]
    fn samples_are_members() {
        let space = sp();
        let term = Term {
            core: Atom::lattice(&space, &BigInt::from(2)),
            choices: vec![Choice { pool: worked_pool(&space), count: 2 }],
        }
        .normalize(&space);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = term.sample(&space, &mut rng, 12);
            assert!(term.contains(&space, &x));
            assert!(term.contains(&space, &space.neg(&x)));
        }
    }

    #[test]
    fn single_atom_pools_fold() {
        let space = sp();
        let a = pt(&space, "1/3;1", 1);
        let t = Term { core: Atom::lattice(&space, &BigInt::one()), choices: vec![Choice { pool: vec![a], count: 2 }] }
            .normalize(&space);
        assert!(t.is_atom());
        assert_eq!(t.core.base, space.parse("2/3;0").unwrap());
    }

    #[test]
    fn lattice_pools_vanish() {
        let space = sp();
        let t = Term {
            core: Atom::lattice(&space, &BigInt::from(2)),
            choices: vec![Choice { pool: vec![pt(&space, "0;0", 4), pt(&space, "0;0", 6)], count: 3 }],
        }
        .normalize(&space);
        assert!(t.is_atom());
    }

    #[test]
    fn subsumption_is_sound() {
        let space = sp();
        let lat = Atom::lattice(&space, &BigInt::one());
        let small = Term { core: lat.clone(), choices: vec![Choice { pool: worked_pool(&space)[..3].to_vec(), count: 2 }] }
            .normalize(&space);
        let big = Term { core: lat.clone(), choices: vec![Choice { pool: worked_pool(&space), count: 2 }] }.normalize(&space);
        assert!(small.subset_of(&space, &big));
        assert!(!big.subset_of(&space, &small));
        let bigger = Term { core: lat, choices: vec![Choice { pool: worked_pool(&space), count: 4 }] }.normalize(&space);
        assert!(big.subset_of(&space, &bigger));
    }
}
