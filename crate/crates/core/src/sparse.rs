//! Compressed-sparse-row matrices with sorted column indices.

use std::io::Write;
use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<T>,
}

pub type ComplexSparseMatrix = CsrMatrix<Complex64>;
pub type RealSparseMatrix = CsrMatrix<f64>;

impl<T: Copy + Default> CsrMatrix<T> {
    /// Zero-valued matrix on a given pattern. Columns of each row must be
    /// strictly increasing.
    pub fn from_pattern(n: usize, row_ptr: Vec<usize>, cols: Vec<usize>) -> Result<Self> {
        if row_ptr.len() != n + 1 || row_ptr[n] != cols.len() {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                got: row_ptr.len(),
            });
        }
        for i in 0..n {
            let row = &cols[row_ptr[i]..row_ptr[i + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&c| c >= n) {
                return Err(Error::InvalidConfig(format!("row {i} of sparsity pattern is not sorted")));
            }
        }
        let values = vec![T::default(); cols.len()];
        Ok(Self {
            n,
            row_ptr,
            cols,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Result<Self>
    where
        T: Add<Output = T>,
    {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        if let Some(&(r, c, _)) = sorted.iter().find(|(r, c, _)| *r >= n || *c >= n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: r.max(c) + 1,
            });
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                let lv = values.last_mut().expect("non-empty");
                *lv = *lv + v;
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            cols,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.values[r])
    }

    /// Storage position of entry `(i, j)`, if structurally present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.cols[start..self.row_ptr[i + 1]]
            .binary_search(&j)
            .ok()
            .map(|k| start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.position(i, j).map_or_else(T::default, |k| self.values[k])
    }

    /// Same pattern, values mapped by `f`.
    pub fn map<U>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn same_pattern<U>(&self, other: &CsrMatrix<U>) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.cols == other.cols
    }

    /// `y = A x` for any scalar that real or complex entries multiply into.
    pub fn matvec<X>(&self, x: &[X]) -> Vec<X>
    where
        X: Copy + Default + Add<Output = X>,
        T: Mul<X, Output = X>,
    {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .fold(X::default(), |acc, (&j, &v)| acc + v * x[j])
            })
            .collect()
    }

    /// Whether the pattern is symmetric.
    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).0.iter().all(|&j| self.position(j, i).is_some()))
    }
}

impl ComplexSparseMatrix {
    /// Largest `|A_ij - A_ji|` relative to the largest entry magnitude.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Matrix Market coordinate format, complex general.
    pub fn write_matrix_market<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(out, "{} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, v) in cols.iter().zip(vals) {
                writeln!(out, "{} {} {:e} {:e}", i + 1, j + 1, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

impl RealSparseMatrix {
    /// `u^H A u` for a real symmetric `A` (a real number).
    pub fn quadratic_form(&self, u: &[Complex64]) -> f64 {
        let au = self.matvec(u);
        u.iter().zip(&au).map(|(a, b)| (a.conj() * b).re).sum()
    }
}
