//! Banded matrices and an LU factorization with partial pivoting.
//!
//! Storage is row-wise: row `i` keeps columns `i - kl ..= i + ku + kl`, the
//! extra `kl` super-diagonals absorbing fill-in from row interchanges.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    /// True if `(i, j)` lies inside the declared band.
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        self.data[self.slot(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.data[s] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += value;
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Overwrites `self` with `I - scale * other` (same shape).
    pub fn set_identity_minus(&mut self, scale: f64, other: &BandMatrix) {
        assert_eq!((self.n, self.kl, self.ku), (other.n, other.kl, other.ku));
        for (d, s) in self.data.iter_mut().zip(&other.data) {
            *d = -scale * s;
        }
        for i in 0..self.n {
            let s = self.slot(i, i);
            self.data[s] += 1.0;
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            *yi = (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum();
        }
    }
}

/// LU factors of a [`BandMatrix`], reusable across factorizations of the same shape.
#[derive(Debug, Clone)]
pub struct BandLu {
    a: BandMatrix,
    pivots: Vec<usize>,
    multipliers: Vec<f64>,
}

impl BandLu {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        Self { a: BandMatrix::zeros(n, kl, ku), pivots: vec![0; n], multipliers: vec![0.0; n * kl.max(1)] }
    }

    pub fn factorize(matrix: &BandMatrix) -> Result<Self> {
        let mut lu = Self::new(matrix.n, matrix.kl, matrix.ku);
        lu.refactor(matrix)?;
        Ok(lu)
    }

    /// Factorizes `matrix` into the existing buffers.
    pub fn refactor(&mut self, matrix: &BandMatrix) -> Result<()> {
        assert_eq!((self.a.n, self.a.kl, self.a.ku), (matrix.n, matrix.kl, matrix.ku));
        self.a.data.copy_from_slice(&matrix.data);
        let n = self.a.n;
        let kl = self.a.kl;
        let ku = self.a.ku;
        let scale = matrix.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let tiny = scale * f64::EPSILON * 1e-3;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.a.data[self.a.slot(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.a.data[self.a.slot(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::Singular { row: k });
            }
            self.pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let (sk, sp) = (self.a.slot(k, c), self.a.slot(p, c));
                    self.a.data.swap(sk, sp);
                }
            }
            let pivot = self.a.data[self.a.slot(k, k)];
            for r in k + 1..=last_row {
                let sr = self.a.slot(r, k);
                let l = self.a.data[sr] / pivot;
                self.a.data[sr] = 0.0;
                self.multipliers[k * kl + (r - k - 1)] = l;
                if l != 0.0 {
                    for c in k + 1..=last_col {
                        let upd = l * self.a.data[self.a.slot(k, c)];
                        let s = self.a.slot(r, c);
                        self.a.data[s] -= upd;
                    }
                }
            }
        }
        Ok(())
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.a.n;
        let kl = self.a.kl;
        let ku = self.a.ku;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for r in k + 1..=(k + kl).min(n - 1) {
                b[r] -= self.multipliers[k * kl + (r - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for c in k + 1..=(k + kl + ku).min(n - 1) {
                acc -= self.a.data[self.a.slot(k, c)] * b[c];
            }
            b[k] = acc / self.a.data[self.a.slot(k, k)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn solves_tridiagonal_system() {
        let n = 6;
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&x, &mut b);
        BandLu::factorize(&a).unwrap().solve(&mut b);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn needs_pivoting() {
        // zero leading diagonal forces a row interchange
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.set(0, 0, 0.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 0.0);
        a.set(1, 2, 1.0);
        a.set(2, 1, 1.0);
        a.set(2, 2, 1.0);
        let mut b = vec![2.0, 4.0, 5.0];
        BandLu::factorize(&a).unwrap().solve(&mut b);
        // x = (1, 2, 3)
        assert!((b[0] - 1.0).abs() < 1e-14 && (b[1] - 2.0).abs() < 1e-14 && (b[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn reports_singular_matrix() {
        let a = BandMatrix::zeros(4, 1, 1);
        assert_eq!(BandLu::factorize(&a).unwrap_err(), Error::Singular { row: 0 });
    }

    proptest! {
        #[test]
        fn random_banded_solves(
            n in 1usize..30,
            kl in 0usize..4,
            ku in 0usize..4,
            seed in proptest::collection::vec(-1.0f64..1.0, 30 * 9),
            x in proptest::collection::vec(-5.0f64..5.0, 30),
        ) {
            let mut a = BandMatrix::zeros(n, kl, ku);
            let mut k = 0;
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    // diagonally weighted but not dominant, so pivoting gets exercised
                    let v = seed[k % seed.len()] + if i == j { 0.5 } else { 0.0 };
                    a.set(i, j, v);
                    k += 1;
                }
            }
            let x = &x[..n];
            let mut b = vec![0.0; n];
            a.mul_vec(x, &mut b);
            if let Ok(lu) = BandLu::factorize(&a) {
                let mut sol = b.clone();
                lu.solve(&mut sol);
                let mut back = vec![0.0; n];
                a.mul_vec(&sol, &mut back);
                let resid = back.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                let size = sol.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
                prop_assert!(resid < 1e-12 * size * n as f64, "residual {resid}");
            }
        }
    }
}
