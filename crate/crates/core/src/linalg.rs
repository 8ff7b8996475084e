//! Small dense kernels: a growable packed lower-triangular factor and the
//! triangular solves the conditioning code runs in its inner loop.

use crate::error::{Error, Result};

/// Lower-triangular matrix stored row by row; row `i` holds `i + 1` entries.
///
/// Rows can be appended, which is how the history factor grows one slot
/// block at a time without refactorizing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PackedLower {
    n: usize,
    data: Vec<f64>,
}

impl PackedLower {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn row_start(i: usize) -> usize {
        i * (i + 1) / 2
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let s = Self::row_start(i);
        &self.data[s..s + i + 1]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[Self::row_start(i) + j]
        }
    }

    /// Appends one row; `row.len()` must equal the current dimension + 1.
    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.n + 1, "packed row has wrong length");
        self.data.extend_from_slice(row);
        self.n += 1;
    }

    /// Cholesky factor of the symmetric matrix whose `(i, j)` entry (`j <= i`)
    /// is produced by `entry`.
    pub fn factorize(n: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut l = PackedLower {
            n: 0,
            data: Vec::with_capacity(n * (n + 1) / 2),
        };
        let mut row = vec![0.0; n];
        for i in 0..n {
            for j in 0..i {
                let lj = l.row(j);
                let s = entry(i, j) - dot(&row[..j], &lj[..j]);
                row[j] = s / lj[j];
            }
            let d = entry(i, i) - dot(&row[..i], &row[..i]);
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::ConditioningFailure { pivot: i, value: d });
            }
            row[i] = d.sqrt();
            l.push_row(&row[..=i]);
        }
        Ok(l)
    }

    /// Solves `L x = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let r = self.row(i);
            let mut s = b[i];
            for k in 0..i {
                s -= r[k] * b[k];
            }
            b[i] = s / r[i];
        }
    }

    /// Solves `L x = b` for two right-hand sides in a single sweep.
    pub fn forward_solve2(&self, a: &mut [f64], b: &mut [f64]) {
        debug_assert_eq!(a.len(), self.n);
        debug_assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let r = self.row(i);
            let (mut sa, mut sb) = (a[i], b[i]);
            for k in 0..i {
                sa -= r[k] * a[k];
                sb -= r[k] * b[k];
            }
            a[i] = sa / r[i];
            b[i] = sb / r[i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn backward_solve_transpose(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in (0..self.n).rev() {
            let r = self.row(i);
            b[i] /= r[i];
            let bi = b[i];
            for k in 0..i {
                b[k] -= r[k] * bi;
            }
        }
    }

    /// Dense row-major copy, mostly for diagnostics and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            out[i * n..i * n + i + 1].copy_from_slice(self.row(i));
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
