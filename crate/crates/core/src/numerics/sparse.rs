use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{Scalar, C64};
use crate::error::{check_len, Result};

/// Compressed-row sparsity structure with sorted column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl CsrPattern {
    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }
    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|i| self.row(i).iter().all(|&j| self.find(j, i).is_some()))
    }

    /// Position of entry `(i, j)` in the value array.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }
}

/// CSR matrix whose pattern may be shared between several value arrays
/// (mass and stiffness matrices from one assembly share theirs).
#[derive(Debug, Clone)]
pub struct CsrMatrix<T> {
    pattern: Arc<CsrPattern>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut rows: Vec<BTreeMap<usize, T>> = vec![BTreeMap::new(); nrows];
        for &(i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            *rows[i].entry(j).or_insert_with(T::zero) += v;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        let pattern = CsrPattern {
            nrows,
            ncols,
            row_ptr,
            col_idx,
        };
        Self {
            pattern: Arc::new(pattern),
            values,
        }
    }

    pub fn from_parts(pattern: Arc<CsrPattern>, values: Vec<T>) -> Self {
        assert_eq!(pattern.nnz(), values.len());
        Self { pattern, values }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, T::one())).collect();
        Self::from_triplets(n, n, &t)
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &t)
    }

    /// Keeps the nonzero entries of a dense matrix.
    pub fn from_dense(a: &DMatrix<T>) -> Self
    where
        T: nalgebra::Scalar,
    {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != T::zero() {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &t)
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }
    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }
    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Iterates over `(column, value)` in row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.pattern.row_range(i);
        self.pattern.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.pattern
            .find(i, j)
            .map_or(T::zero(), |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows()).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.nrows())
            .map(|i| self.row(i).fold(T::zero(), |acc, (_, v)| acc + v))
            .collect()
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols());
        assert_eq!(y.len(), self.nrows());
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for (j, v) in self.row(i) {
                s += v * x[j];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.ncols(), x.len())?;
        let mut y = vec![T::zero(); self.nrows()];
        self.mul_vec_into(x, &mut y);
        Ok(y)
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            pattern: Arc::clone(&self.pattern),
            values: self.values.iter().map(|&v| a * v).collect(),
        }
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        (0..self.nrows())
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i)).modulus())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<T>
    where
        T: nalgebra::Scalar,
    {
        let mut a = DMatrix::from_element(self.nrows(), self.ncols(), T::zero());
        for i in 0..self.nrows() {
            for (j, v) in self.row(i) {
                a[(i, j)] = v;
            }
        }
        a
    }
}

impl CsrMatrix<f64> {
    /// Real matrix times complex vector.
    pub fn mul_complex(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols());
        (0..self.nrows())
            .map(|i| self.row(i).map(|(j, v)| x[j] * v).sum())
            .collect()
    }

    /// `a * self + b * other`, merging sparsity patterns when they differ.
    pub fn combine(&self, a: C64, other: &CsrMatrix<f64>, b: C64) -> CsrMatrix<C64> {
        assert_eq!(self.nrows(), other.nrows());
        assert_eq!(self.ncols(), other.ncols());
        if Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern {
            let values = self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| a * x + b * y)
                .collect();
            return CsrMatrix::from_parts(Arc::clone(&self.pattern), values);
        }
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows() {
            t.extend(self.row(i).map(|(j, v)| (i, j, a * v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, b * v)));
        }
        CsrMatrix::from_triplets(self.nrows(), self.ncols(), &t)
    }

    /// Real combination `a * self + b * other`.
    pub fn combine_real(&self, a: f64, other: &CsrMatrix<f64>, b: f64) -> CsrMatrix<f64> {
        let c = self.combine(C64::new(a, 0.0), other, C64::new(b, 0.0));
        let values = c.values.iter().map(|v| v.re).collect();
        CsrMatrix::from_parts(c.pattern, values)
    }

    /// `x^T A x` for real `x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.nrows())
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>())
            .sum()
    }
}
