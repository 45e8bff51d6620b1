//! Smith normal form over `Z` and the integer linear feasibility it decides.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

pub type IntMat = Vec<Vec<BigInt>>;

/// `u · a · v = diag(d_0, …, d_{rank-1}, 0, …)` with `d_i | d_{i+1}`,
/// `u` and `v` unimodular.
#[derive(Clone, Debug)]
pub struct Snf {
    pub rows: usize,
    pub cols: usize,
    pub diag: Vec<BigInt>,
    pub u: IntMat,
    pub v: IntMat,
}

fn identity(n: usize) -> IntMat {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect()
}

fn row_axpy(m: &mut IntMat, dst: usize, src: usize, k: &BigInt) {
    if k.is_zero() {
        return;
    }
    let add: Vec<BigInt> = m[src].iter().map(|x| x * k).collect();
    for (a, b) in m[dst].iter_mut().zip(add) {
        *a += b;
    }
}

fn col_axpy(m: &mut IntMat, dst: usize, src: usize, k: &BigInt) {
    if k.is_zero() {
        return;
    }
    for row in m.iter_mut() {
        let add = &row[src] * k;
        row[dst] += add;
    }
}

fn col_swap(m: &mut IntMat, i: usize, j: usize) {
    for row in m.iter_mut() {
        row.swap(i, j);
    }
}

impl Snf {
    pub fn new(a: &IntMat, cols: usize) -> Snf {
        let rows = a.len();
        debug_assert!(a.iter().all(|r| r.len() == cols));
        let mut m = a.clone();
        let mut u = identity(rows);
        let mut v = identity(cols);
        let mut diag = Vec::new();

        for t in 0..rows.min(cols) {
            loop {
                // smallest nonzero entry of the trailing block becomes the pivot
                let mut best: Option<(usize, usize)> = None;
                for i in t..rows {
                    for j in t..cols {
                        if !m[i][j].is_zero()
                            && best.is_none_or(|(bi, bj)| m[i][j].abs() < m[bi][bj].abs())
                        {
                            best = Some((i, j));
                        }
                    }
                }
                let Some((pi, pj)) = best else {
                    return Snf { rows, cols, diag, u, v };
                };
                m.swap(t, pi);
                u.swap(t, pi);
                col_swap(&mut m, t, pj);
                col_swap(&mut v, t, pj);

                let mut dirty = false;
                for i in t + 1..rows {
                    let q = m[i][t].div_floor(&m[t][t]);
                    let nq = -q;
                    row_axpy(&mut m, i, t, &nq);
                    row_axpy(&mut u, i, t, &nq);
                    dirty |= !m[i][t].is_zero();
                }
                for j in t + 1..cols {
                    let q = m[t][j].div_floor(&m[t][t]);
                    let nq = -q;
                    col_axpy(&mut m, j, t, &nq);
                    col_axpy(&mut v, j, t, &nq);
                    dirty |= !m[t][j].is_zero();
                }
                if dirty {
                    continue;
                }
                let piv = m[t][t].clone();
                let bad = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| !(&m[i][j] % &piv).is_zero()));
                if let Some(i) = bad {
                    let one = BigInt::one();
                    row_axpy(&mut m, t, i, &one);
                    row_axpy(&mut u, t, i, &one);
                    continue;
                }
                break;
            }
            if m[t][t].is_negative() {
                for x in m[t].iter_mut() {
                    *x = -x.clone();
                }
                for x in u[t].iter_mut() {
                    *x = -x.clone();
                }
            }
            diag.push(m[t][t].clone());
        }
        Snf { rows, cols, diag, u, v }
    }

    pub fn rank(&self) -> usize {
        self.diag.len()
    }

    fn transform(&self, c: &[BigInt]) -> Vec<BigInt> {
        self.u
            .iter()
            .map(|row| row.iter().zip(c).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// One integer solution of `a · y = c`, if any.
    pub fn solve(&self, c: &[BigInt]) -> Option<Vec<BigInt>> {
        let w = self.transform(c);
        let r = self.rank();
        if w[r..].iter().any(|x| !x.is_zero()) {
            return None;
        }
        let mut y1 = vec![BigInt::zero(); self.cols];
        for i in 0..r {
            let (q, rem) = w[i].div_rem(&self.diag[i]);
            if !rem.is_zero() {
                return None;
            }
            y1[i] = q;
        }
        Some(
            self.v
                .iter()
                .map(|row| row.iter().zip(&y1).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    /// Least `d ≥ 1` with `d·c` in the integer column span of `a`; `None`
    /// when no positive multiple lies in the span.
    pub fn order_mod_span(&self, c: &[BigInt]) -> Option<BigInt> {
        let w = self.transform(c);
        let r = self.rank();
        if w[r..].iter().any(|x| !x.is_zero()) {
            return None;
        }
        let mut d = BigInt::one();
        for i in 0..r {
            let g = self.diag[i].gcd(&w[i]);
            d = d.lcm(&(&self.diag[i] / g));
        }
        Some(d)
    }
}

/// One integer solution of `a · y = c`, or `None` when infeasible.
pub fn snf_solve(a: &IntMat, c: &[BigInt]) -> Option<Vec<BigInt>> {
    let cols = a.first().map_or(0, Vec::len);
    Snf::new(a, cols).solve(c)
}

pub fn mat_from_i64(rows: &[&[i64]]) -> IntMat {
    rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mul(a: &IntMat, b: &IntMat) -> IntMat {
        let n = b.first().map_or(0, Vec::len);
        a.iter()
            .map(|row| (0..n).map(|j| row.iter().zip(b).map(|(x, br)| x * &br[j]).sum()).collect())
            .collect()
    }

    fn apply(a: &IntMat, y: &[BigInt]) -> Vec<BigInt> {
        a.iter().map(|r| r.iter().zip(y).map(|(x, z)| x * z).sum()).collect()
    }

    // exhaustive search over the box |y_i| <= bound
    fn brute(a: &[Vec<i64>], c: &[i64], bound: i64) -> bool {
        let n = a[0].len();
        let mut y = vec![-bound; n];
        loop {
            if a.iter().zip(c).all(|(r, &ci)| r.iter().zip(&y).map(|(p, q)| p * q).sum::<i64>() == ci) {
                return true;
            }
            let mut i = 0;
            while i < n {
                y[i] += 1;
                if y[i] <= bound {
                    break;
                }
                y[i] = -bound;
                i += 1;
            }
            if i == n {
                return false;
            }
        }
    }

    #[test]
    fn scalar_examples() {
        let y = snf_solve(&mat_from_i64(&[&[1]]), &[BigInt::from(3)]).unwrap();
        assert_eq!(y, vec![BigInt::from(3)]);
        assert!(snf_solve(&mat_from_i64(&[&[2]]), &[BigInt::from(3)]).is_none());
    }

    #[test]
    fn diagonal_is_smith() {
        let a = mat_from_i64(&[&[2, 4, 4], &[-6, 6, 12], &[10, -4, -16]]);
        let s = Snf::new(&a, 3);
        assert_eq!(s.diag, vec![BigInt::from(2), BigInt::from(6), BigInt::from(12)]);
        let d = mul(&mul(&s.u, &a), &s.v);
        for (i, row) in d.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                if i != j {
                    assert!(x.is_zero());
                }
            }
        }
    }

    #[test]
    fn order_modulo_span() {
        // span of (4) in Z: 6 has order 2 modulo 4Z
        let s = Snf::new(&mat_from_i64(&[&[4]]), 1);
        assert_eq!(s.order_mod_span(&[BigInt::from(6)]), Some(BigInt::from(2)));
        let s = Snf::new(&mat_from_i64(&[&[0], &[1]]), 1);
        assert_eq!(s.order_mod_span(&[BigInt::from(1), BigInt::from(0)]), None);
    }

    #[test]
    fn empty_column_set() {
        let a: IntMat = vec![vec![], vec![]];
        assert!(snf_solve(&a, &[BigInt::zero(), BigInt::zero()]).is_some());
        assert!(snf_solve(&a, &[BigInt::one(), BigInt::zero()]).is_none());
    }

    #[test]
    fn random_systems_agree_with_box_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut feasible = 0;
        for _ in 0..150 {
            let a: Vec<Vec<i64>> = (0..4).map(|_| (0..5).map(|_| rng.gen_range(-3..=3)).collect()).collect();
            let y0: Vec<i64> = (0..5).map(|_| rng.gen_range(-2..=2)).collect();
            let mut c: Vec<i64> = a.iter().map(|r| r.iter().zip(&y0).map(|(p, q)| p * q).sum()).collect();
            if rng.gen_bool(0.5) {
                c[rng.gen_range(0..4)] += 1;
            }
            let big: IntMat = a.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
            let cb: Vec<BigInt> = c.iter().map(|&x| BigInt::from(x)).collect();
            let got = snf_solve(&big, &cb);
            if let Some(y) = &got {
                assert_eq!(apply(&big, y), cb);
                feasible += 1;
            } else {
                // no solution at all, in particular none in the box
                assert!(!brute(&a, &c, 4));
            }
        }
        assert!(feasible > 50);
    }
}
