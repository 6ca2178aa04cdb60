//! Row-major dense matrices and vectors with cached squared norms.
//!
//! Matrices are immutable once built. Row and column squared norms and the
//! squared Frobenius norm are computed eagerly because every sampler and
//! every projection step reads them.

use std::ops::Deref;

use crate::error::{dim, Error, Result};

/// Dense real vector whose entries are all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(dim("vector must have at least one entry"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Dense real matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    row_sqnorms: Vec<f64>,
    col_sqnorms: Vec<f64>,
    frob_sq: f64,
}

impl DenseMatrix {
    /// Builds a matrix from `rows * cols` row-major values.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(dim(format!("matrix dimensions must be positive, got {rows}x{cols}")));
        }
        if values.len() != rows * cols {
            return Err(dim(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }

        let mut row_sqnorms = vec![0.0; rows];
        let mut col_sqnorms = vec![0.0; cols];
        for (i, row) in values.chunks_exact(cols).enumerate() {
            for (j, &a) in row.iter().enumerate() {
                let sq = a * a;
                row_sqnorms[i] += sq;
                col_sqnorms[j] += sq;
            }
        }
        let frob_sq = row_sqnorms.iter().sum();

        Ok(Self {
            rows,
            cols,
            data: values,
            row_sqnorms,
            col_sqnorms,
            frob_sq,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(dim("ragged rows"));
        }
        let values = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), cols, values)
    }

    /// Builds a matrix from a closure evaluated at each `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
            .expect("identity of positive size is valid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row_sqnorms(&self) -> &[f64] {
        &self.row_sqnorms
    }

    pub fn col_sqnorms(&self) -> &[f64] {
        &self.col_sqnorms
    }

    pub fn row_sqnorm(&self, i: usize) -> f64 {
        self.row_sqnorms[i]
    }

    pub fn col_sqnorm(&self, j: usize) -> f64 {
        self.col_sqnorms[j]
    }

    pub fn frob_sq(&self) -> f64 {
        self.frob_sq
    }

    /// Read-only view of row `i`.
    pub fn row(&self, i: usize) -> Result<&[f64]> {
        if i >= self.rows {
            return Err(Error::OutOfRange { index: i, len: self.rows });
        }
        Ok(self.row_view(i))
    }

    /// Copy of column `j` (columns are strided in row-major storage).
    pub fn col(&self, j: usize) -> Result<Vec<f64>> {
        if j >= self.cols {
            return Err(Error::OutOfRange { index: j, len: self.cols });
        }
        Ok(self.data.iter().skip(j).step_by(self.cols).copied().collect())
    }

    /// Unchecked-by-`Result` row view for hot loops; panics if `i` is out of range.
    #[inline]
    pub fn row_view(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `<A_(j), v>` over column `j`.
    #[inline]
    pub fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.rows);
        let mut acc = 0.0;
        for (i, vi) in v.iter().enumerate() {
            acc += self.data[i * self.cols + j] * vi;
        }
        acc
    }

    /// `v += alpha * A_(j)`.
    #[inline]
    pub fn col_axpy(&self, j: usize, alpha: f64, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        for (i, vi) in v.iter_mut().enumerate() {
            *vi += alpha * self.data[i * self.cols + j];
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(dim(format!(
                "matvec: {}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(self.data.chunks_exact(self.cols).map(|row| dot_unchecked(row, v)).collect())
    }

    /// `A^T v`; the adjoint is the transpose because scalars are real.
    pub fn matvec_adjoint(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(dim(format!(
                "matvec_adjoint: ({}x{})^T times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (row, &vi) in self.data.chunks_exact(self.cols).zip(v) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
            .expect("transpose of a valid matrix is valid")
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(dim(format!(
                "matmul: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let dst = &mut out[i * other.cols..(i + 1) * other.cols];
            for (l, &a) in self.row_view(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, b) in dst.iter_mut().zip(other.row_view(l)) {
                    *d += a * b;
                }
            }
        }
        Self::new(self.rows, other.cols, out)
    }

    /// `self - other`, used for residual-style checks in tests and the oracle.
    pub fn sub(&self, other: &DenseMatrix) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(dim("sub: shapes differ"));
        }
        let values = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self::new(self.rows, self.cols, values)
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(dim(format!("dot: lengths {} and {}", u.len(), v.len())));
    }
    Ok(dot_unchecked(u, v))
}

/// `alpha * u + v`.
pub fn axpy(alpha: f64, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(dim(format!("axpy: lengths {} and {}", u.len(), v.len())));
    }
    Ok(u.iter().zip(v).map(|(a, b)| alpha * a + b).collect())
}

#[inline]
pub(crate) fn dot_unchecked(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// `||u - v||^2`.
pub fn dist_sq(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_norms() {
        let a = DenseMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(a.frob_sq(), 2.0);
        assert_eq!(a.row_sqnorms(), &[1.0, 1.0]);
    }

    #[test]
    fn three_four_five() {
        let a = DenseMatrix::new(1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(a.row_sqnorms(), &[25.0]);
        assert_eq!(a.col_sqnorms(), &[9.0, 16.0]);
        assert_eq!(a.frob_sq(), 25.0);
    }

    #[test]
    fn rejects_nan_and_bad_shape() {
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0, f64::NAN, 0.0, 1.0]),
            Err(Error::NonFinite(1))
        ));
        assert!(matches!(DenseMatrix::new(2, 2, vec![1.0; 3]), Err(Error::Dimension(_))));
        assert!(DenseMatrix::new(0, 2, vec![]).is_err());
        assert!(DenseVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn row_and_col_access() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(a.row(1).unwrap(), &[3.0, 4.0]);
        assert_eq!(a.col(0).unwrap(), vec![1.0, 3.0]);
        assert!(matches!(a.row(2), Err(Error::OutOfRange { index: 2, len: 2 })));
        assert!(a.col(5).is_err());
    }

    #[test]
    fn kernels() {
        let eye = DenseMatrix::identity(2);
        assert_eq!(eye.matvec(&[5.0, 7.0]).unwrap(), vec![5.0, 7.0]);
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(a.matvec_adjoint(&[1.0, 0.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(axpy(2.0, &[1.0, 1.0], &[0.5, -1.0]).unwrap(), vec![2.5, 1.0]);
        assert!(a.matvec(&[1.0]).is_err());
        assert!(a.matvec_adjoint(&[1.0, 2.0, 3.0]).is_err());
        assert!(dot(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn column_helpers_match_copies() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let v = [0.5, -2.0];
        let col = a.col(2).unwrap();
        assert_eq!(a.col_dot(2, &v), dot(&col, &v).unwrap());
        let mut w = vec![1.0, 1.0];
        a.col_axpy(1, 2.0, &mut w);
        assert_eq!(w, vec![5.0, 11.0]);
    }

    #[test]
    fn matmul_and_transpose() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let at = a.transpose();
        assert_eq!(at.rows(), 2);
        assert_eq!(at.row(0).unwrap(), &[1.0, 3.0, 5.0]);
        let g = at.matmul(&a).unwrap();
        assert_eq!(g.data(), &[35.0, 44.0, 44.0, 56.0]);
        assert!(a.matmul(&a).is_err());
    }
}
