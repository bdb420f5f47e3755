//! Square banded matrix with in-place LU factorization (no pivoting).
//!
//! Storage follows the usual compact layout: entry `(i, j)` with
//! `-lower <= j - i <= upper` lives at `data[(i - j + upper) * n + j]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
    factorized: bool,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self { n, lower, upper, data: vec![0.0; n * (lower + upper + 1)], factorized: false }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.lower >= i && i + self.upper >= j, "({i}, {j}) outside band");
        (i + self.upper - j) * self.n + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.lower);
            let hi = (i + self.upper).min(self.n - 1);
            for j in lo..=hi {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    /// Doolittle LU in place; `L` has a unit diagonal.
    pub fn factorize(&mut self) -> Result<()> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.get(k, k);
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Singular(format!("zero pivot at row {k}")));
            }
            let iend = (k + self.lower).min(n - 1);
            let jend = (k + self.upper).min(n - 1);
            for i in k + 1..=iend {
                let f = self.get(i, k) / pivot;
                self.set(i, k, f);
                if f != 0.0 {
                    for j in k + 1..=jend {
                        let v = self.get(i, j) - f * self.get(k, j);
                        self.set(i, j, v);
                    }
                }
            }
        }
        self.factorized = true;
        Ok(())
    }

    /// Solves `A x = b` for every column of `b`, in place.
    pub fn solve(&self, b: &mut DMatrix<f64>) {
        assert!(self.factorized, "solve before factorize");
        let n = self.n;
        for c in 0..b.ncols() {
            for i in 0..n {
                let lo = i.saturating_sub(self.lower);
                let mut s = b[(i, c)];
                for j in lo..i {
                    s -= self.get(i, j) * b[(j, c)];
                }
                b[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let hi = (i + self.upper).min(n - 1);
                let mut s = b[(i, c)];
                for j in i + 1..=hi {
                    s -= self.get(i, j) * b[(j, c)];
                }
                b[(i, c)] = s / self.get(i, i);
            }
        }
    }

    /// Solves `A^T x = b` for every column of `b`, in place.
    pub fn solve_transposed(&self, b: &mut DMatrix<f64>) {
        assert!(self.factorized, "solve before factorize");
        let n = self.n;
        for c in 0..b.ncols() {
            // U^T y = b
            for i in 0..n {
                let lo = i.saturating_sub(self.upper);
                let mut s = b[(i, c)];
                for j in lo..i {
                    s -= self.get(j, i) * b[(j, c)];
                }
                b[(i, c)] = s / self.get(i, i);
            }
            // L^T x = y
            for i in (0..n).rev() {
                let hi = (i + self.lower).min(n - 1);
                let mut s = b[(i, c)];
                for j in i + 1..=hi {
                    s -= self.get(j, i) * b[(j, c)];
                }
                b[(i, c)] = s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> BandedMatrix {
        let mut a = BandedMatrix::zeros(n, 2, 1);
        for i in 0..n {
            a.set(i, i, 4.0 + i as f64 * 0.1);
            if i + 1 < n {
                a.set(i, i + 1, -1.0 + 0.05 * i as f64);
            }
            if i >= 1 {
                a.set(i, i - 1, 0.7);
            }
            if i >= 2 {
                a.set(i, i - 2, -0.3);
            }
        }
        a
    }

    #[test]
    fn solves_match_dense() {
        let n = 9;
        let a = sample(n);
        let dense = a.to_dense();
        let mut f = a.clone();
        f.factorize().unwrap();
        let b = DMatrix::from_fn(n, 2, |i, j| (i as f64 + 1.0) * if j == 0 { 1.0 } else { -0.5 });
        let mut x = b.clone();
        f.solve(&mut x);
        assert!((&dense * &x - &b).norm() < 1e-12);
        let mut y = b.clone();
        f.solve_transposed(&mut y);
        assert!((dense.transpose() * &y - &b).norm() < 1e-12);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut a = BandedMatrix::zeros(3, 1, 1);
        a.set(1, 1, 1.0);
        a.set(2, 2, 1.0);
        assert!(a.factorize().is_err());
    }
}
