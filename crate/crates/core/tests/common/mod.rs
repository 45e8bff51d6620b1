//! Random instances and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use rand::Rng;
use ssgp::arith::{rat, QVec};
use ssgp::groups::{HSpec, KElem, Space};
use ssgp::symsets::Atom;

pub const BOX: i64 = 15;

pub fn spaces() -> Vec<Space> {
    vec![
        Space::new(1, HSpec::trivial()).unwrap(),
        Space::new(1, HSpec::new(0, vec![2]).unwrap()).unwrap(),
        Space::new(2, HSpec::new(0, vec![3, 2]).unwrap()).unwrap(),
        Space::new(2, HSpec::new(1, vec![]).unwrap()).unwrap(),
        Space::new(3, HSpec::trivial()).unwrap(),
        Space::new(3, HSpec::new(1, vec![4]).unwrap()).unwrap(),
    ]
}

pub fn random_q<R: Rng>(rng: &mut R, m: usize, num: i64, dens: &[i64]) -> QVec {
    QVec((0..m).map(|_| rat(rng.gen_range(-num..=num), dens[rng.gen_range(0..dens.len())])).collect())
}

/// A random element; free coordinates only when `free` is set.
pub fn random_elem<R: Rng>(rng: &mut R, sp: &Space, free: bool) -> KElem {
    let q = random_q(rng, sp.m, 6, &[1, 1, 2, 3, 4, 5, 6]);
    let f = (0..sp.h.free_rank).map(|_| if free { rng.gen_range(-3..=3) } else { 0 }).collect();
    let t = sp.h.torsion_orders.iter().map(|&d| rng.gen_range(0..d)).collect();
    sp.elem(q, f, t).unwrap()
}

/// Order of `g` modulo the lattice `sZ^m ⊕ 0`, computed coordinate by
/// coordinate; `None` when a free coordinate is nonzero.
pub fn order_mod_lattice(sp: &Space, g: &KElem, s: i64) -> Option<i64> {
    if g.h.free.iter().any(|f| !f.is_zero()) {
        return None;
    }
    let mut o = BigInt::from(1);
    let s = BigInt::from(s);
    for q in &g.q.0 {
        let bs = q.denom() * &s;
        o = o.lcm(&(&bs / bs.gcd(q.numer())));
    }
    for (t, d) in g.h.torsion.iter().zip(&sp.h.torsion_orders) {
        o = o.lcm(&BigInt::from(d / d.gcd(t)));
    }
    i64::try_from(o).ok()
}

/// Random atom whose generators all have order at most `BOX` modulo its
/// lattice, so every membership question has a witness inside the box.
pub fn random_atom<R: Rng>(rng: &mut R, sp: &Space, max_gens: usize) -> Atom {
    let s = rng.gen_range(1..=12i64);
    let r = rng.gen_range(0..=max_gens);
    let mut gens = Vec::with_capacity(r);
    while gens.len() < r {
        let g = random_elem(rng, sp, false);
        if order_mod_lattice(sp, &g, s).is_some_and(|o| o <= BOX) {
            gens.push(g);
        }
    }
    Atom::new(sp, random_elem(rng, sp, true), gens, BigInt::from(s))
}

fn in_lattice(r: &KElem, s: &BigInt) -> bool {
    r.h.is_zero() && r.q.in_lattice(s)
}

/// Exhaustive search over generator coefficients in `[-BOX, BOX]`.
pub fn brute_member(sp: &Space, a: &Atom, x: &KElem) -> bool {
    let r0 = sp.sub(x, &a.base);
    let steps: Vec<(KElem, i64)> = a
        .gens
        .iter()
        .map(|g| {
            let o = order_mod_lattice(sp, g, i64::try_from(&a.modulus).unwrap()).unwrap_or(BOX + 1);
            (g.clone(), o.min(2 * BOX + 1))
        })
        .collect();
    search(sp, &r0, &steps, &a.modulus)
}

fn search(sp: &Space, r: &KElem, steps: &[(KElem, i64)], s: &BigInt) -> bool {
    let Some(((g, o), rest)) = steps.split_first() else {
        return in_lattice(r, s);
    };
    // a finite order `o` means coefficients in [0, o) cover every class;
    // otherwise walk the whole box
    let range = if *o <= BOX { 0..*o } else { -BOX..BOX + 1 };
    let mut cur = sp.sub(r, &sp.scale(g, &BigInt::from(range.start)));
    for _ in range {
        if search(sp, &cur, rest, s) {
            return true;
        }
        cur = sp.sub(&cur, g);
    }
    false
}

/// `base + Σ n_j g_j + s·z` with small random coefficients.
pub fn random_member<R: Rng>(rng: &mut R, sp: &Space, a: &Atom) -> KElem {
    let mut x = a.base.clone();
    for g in &a.gens {
        x = sp.add(&x, &sp.scale(g, &BigInt::from(rng.gen_range(-BOX..=BOX))));
    }
    let z = QVec((0..sp.m).map(|_| rat(rng.gen_range(-4..=4), 1)).collect()).scale(&a.modulus);
    sp.add(&x, &sp.from_q(z))
}
