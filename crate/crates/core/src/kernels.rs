//! Single-row and single-column projection kernels shared by every solver,
//! together with the FLOP model used to account for them.
//!
//! FLOP model, per kernel call on a vector of length `len`:
//!
//! | kernel                  | dot      | scalar | vector update | total      |
//! |-------------------------|----------|--------|---------------|------------|
//! | row projection (RK)     | `2len-1` | 3      | `2len`        | `4len + 2` |
//! | column projection (REK) | `2len-1` | 3      | `2len`        | `4len + 2` |
//! | Gauss-Seidel coordinate | `2len-1` | 3      | `2len`        | `4len + 2` |
//!
//! Method costs are sums of kernel costs (see [`cost`]).

use crate::dense::{dot_unchecked, DenseMatrix};

/// Per-step FLOP counts for each method on an `rows x cols` matrix.
pub mod cost {
    #[inline]
    pub const fn projection(len: usize) -> u64 {
        4 * len as u64 + 2
    }

    pub const fn rk(_rows: usize, cols: usize) -> u64 {
        projection(cols)
    }

    pub const fn rek(rows: usize, cols: usize) -> u64 {
        projection(cols) + projection(rows)
    }

    pub const fn rgs(rows: usize, _cols: usize) -> u64 {
        projection(rows)
    }

    pub const fn regs(rows: usize, cols: usize) -> u64 {
        projection(rows) + projection(cols)
    }
}

/// Projects `x` onto the hyperplane `<a_i, x> = rhs` and returns the step
/// coefficient `c`, so that `x_new = x_old + c * a_i`.
#[inline]
pub fn kaczmarz_update(a: &DenseMatrix, i: usize, rhs: f64, x: &mut [f64]) -> f64 {
    let row = a.row_view(i);
    let c = (rhs - dot_unchecked(row, x)) / a.row_sqnorm(i);
    for (xi, ai) in x.iter_mut().zip(row) {
        *xi += c * ai;
    }
    c
}

/// Removes from `z` its component along column `j`.
#[inline]
pub fn project_out_column(a: &DenseMatrix, j: usize, z: &mut [f64]) {
    let c = a.col_dot(j, z) / a.col_sqnorm(j);
    a.col_axpy(j, -c, z);
}

/// Removes from `w` its component along row `i`, i.e. applies
/// `I - a_i^T a_i / ||a_i||^2` without forming it.
#[inline]
pub fn project_out_row(a: &DenseMatrix, i: usize, w: &mut [f64]) {
    let row = a.row_view(i);
    let c = dot_unchecked(row, w) / a.row_sqnorm(i);
    for (wi, ai) in w.iter_mut().zip(row) {
        *wi -= c * ai;
    }
}

/// Coordinate step along `e_j` against a maintained residual
/// `res = rhs - A beta`. Updates both in place and returns the step `gamma`.
#[inline]
pub fn gauss_seidel_update(a: &DenseMatrix, j: usize, beta: &mut [f64], res: &mut [f64]) -> f64 {
    let gamma = a.col_dot(j, res) / a.col_sqnorm(j);
    beta[j] += gamma;
    a.col_axpy(j, -gamma, res);
    gamma
}
