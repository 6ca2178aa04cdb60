//! Direct reference solutions and spectral constants.
//!
//! Everything here goes through a one-sided (Hestenes) Jacobi SVD, which is
//! accurate to working precision on the desk-scale matrices used for
//! verification. The pseudo-inverse solve covers the unique, least-squares,
//! least-norm and least-norm least-squares solutions alike.
//!
//! This is also the only place where the product `UV` of a factored system
//! is ever formed ([`explicit_product`]); the iterative solvers never call it.

use crate::dense::{dot_unchecked, norm_sq, DenseMatrix};
use crate::error::{dim, Error, Result};
use crate::factored::{BoundVariant, FactoredSystem, TheoremInputs};

/// Relative threshold below which a singular value counts as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;

/// Thin SVD `A = sum_i sigma_i u_i v_i^T` with `p = min(m, n)` terms.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `p` orthonormal vectors of length `m`.
    left: Vec<Vec<f64>>,
    /// Non-increasing, length `p`.
    singular_values: Vec<f64>,
    /// `p` orthonormal vectors of length `n`.
    right: Vec<Vec<f64>>,
    rank: usize,
    rows: usize,
    cols: usize,
}

impl SvdFactors {
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn left_vectors(&self) -> &[Vec<f64>] {
        &self.left
    }

    pub fn right_vectors(&self) -> &[Vec<f64>] {
        &self.right
    }

    /// Left singular vectors as the columns of an `m x p` matrix.
    pub fn left_matrix(&self) -> DenseMatrix {
        columns_to_matrix(&self.left, self.rows)
    }

    /// Right singular vectors as the columns of an `n x p` matrix.
    pub fn right_matrix(&self) -> DenseMatrix {
        columns_to_matrix(&self.right, self.cols)
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let (m, n) = (self.rows, self.cols);
        let mut out = vec![0.0; m * n];
        for ((u, v), &s) in self.left.iter().zip(&self.right).zip(&self.singular_values) {
            for i in 0..m {
                let c = s * u[i];
                for (o, vj) in out[i * n..(i + 1) * n].iter_mut().zip(v) {
                    *o += c * vj;
                }
            }
        }
        DenseMatrix::new(m, n, out).expect("finite reconstruction")
    }

    /// `A^+ y`.
    pub fn pinv_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(dim(format!("pinv: expected length {}, got {}", self.rows, y.len())));
        }
        let mut out = vec![0.0; self.cols];
        for idx in 0..self.rank {
            let c = dot_unchecked(&self.left[idx], y) / self.singular_values[idx];
            for (o, v) in out.iter_mut().zip(&self.right[idx]) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// The Moore-Penrose pseudo-inverse as an explicit `n x m` matrix.
    pub fn pinv(&self) -> DenseMatrix {
        let (m, n) = (self.rows, self.cols);
        let mut out = vec![0.0; n * m];
        for idx in 0..self.rank {
            let (u, v, s) = (&self.left[idx], &self.right[idx], self.singular_values[idx]);
            for i in 0..n {
                let c = v[i] / s;
                for (o, uj) in out[i * m..(i + 1) * m].iter_mut().zip(u) {
                    *o += c * uj;
                }
            }
        }
        DenseMatrix::new(n, m, out).expect("finite pseudo-inverse")
    }

    /// Projector onto the row space, `v -> A^+ A v`.
    pub fn row_space_projector(&self) -> SubspaceProjector {
        SubspaceProjector { basis: self.right[..self.rank].to_vec(), dim: self.cols }
    }

    /// Projector onto the column space, `w -> A A^+ w`.
    pub fn col_space_projector(&self) -> SubspaceProjector {
        SubspaceProjector { basis: self.left[..self.rank].to_vec(), dim: self.rows }
    }

    pub fn rate_constants(&self, frob_sq: f64) -> Result<RateConstants> {
        if self.rank == 0 || frob_sq <= 0.0 {
            return Err(Error::ZeroMatrix);
        }
        let sigma_max_sq = self.singular_values[0].powi(2);
        let sigma_min_sq = self.singular_values[self.rank - 1].powi(2);
        Ok(RateConstants {
            alpha: 1.0 - sigma_min_sq / frob_sq,
            kappa_sq: sigma_max_sq / sigma_min_sq,
            theta: 1.0 / sigma_min_sq,
            sigma_min_sq,
            sigma_max_sq,
            frob_sq,
        })
    }
}

fn columns_to_matrix(cols: &[Vec<f64>], len: usize) -> DenseMatrix {
    DenseMatrix::from_fn(len, cols.len(), |i, j| cols[j][i]).expect("finite singular vectors")
}

/// Orthogonal projector onto the span of an orthonormal basis.
#[derive(Debug, Clone)]
pub struct SubspaceProjector {
    basis: Vec<Vec<f64>>,
    dim: usize,
}

impl SubspaceProjector {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(dim(format!("projector: expected length {}, got {}", self.dim, v.len())));
        }
        let mut out = vec![0.0; self.dim];
        for b in &self.basis {
            let c = dot_unchecked(b, v);
            for (o, bi) in out.iter_mut().zip(b) {
                *o += c * bi;
            }
        }
        Ok(out)
    }

    /// `v - P v`.
    pub fn complement(&self, v: &[f64]) -> Result<Vec<f64>> {
        let p = self.apply(v)?;
        Ok(v.iter().zip(&p).map(|(a, b)| a - b).collect())
    }
}

/// Convergence constants of randomized Kaczmarz on a matrix `A`:
/// `alpha = 1 - sigma_min^2 / ||A||_F^2`, `kappa^2 = sigma_max^2 / sigma_min^2`,
/// `theta = 1 / sigma_min^2`, where `sigma_min` is the smallest singular
/// value above the rank threshold.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RateConstants {
    pub alpha: f64,
    pub kappa_sq: f64,
    pub theta: f64,
    pub sigma_min_sq: f64,
    pub sigma_max_sq: f64,
    pub frob_sq: f64,
}

impl RateConstants {
    /// Expected-error bound of RK from the zero start on a consistent system:
    /// `alpha^t ||beta*||^2`.
    pub fn rk_bound(&self, t: u64, solution_sq: f64) -> f64 {
        self.alpha.powf(t as f64) * solution_sq
    }

    /// Expected-error bound of REK from the zero start:
    /// `alpha^floor(t/2) (1 + 2 kappa^2) ||beta*||^2`.
    pub fn rek_bound(&self, t: u64, solution_sq: f64) -> f64 {
        self.alpha.powf((t / 2) as f64) * (1.0 + 2.0 * self.kappa_sq) * solution_sq
    }
}

/// One-sided Jacobi SVD with `rank = #{sigma_i > rank_tol * sigma_max}`.
pub fn svd(a: &DenseMatrix, rank_tol: f64) -> SvdFactors {
    let (m, n) = (a.rows(), a.cols());
    // Orthogonalize the columns of A (m >= n) or of A^T (m < n).
    let (work, other_len) = if m >= n {
        ((0..n).map(|j| a.col(j).expect("in range")).collect::<Vec<_>>(), n)
    } else {
        ((0..m).map(|i| a.row_view(i).to_vec()).collect::<Vec<_>>(), m)
    };
    let (long, accum, sigma) = hestenes(work, other_len);
    let p = sigma.len();
    let long_len = m.max(n);

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));
    let singular_values: Vec<f64> = order.iter().map(|&i| sigma[i]).collect();
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);

    let mut long_vecs: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut missing = Vec::new();
    for (slot, &i) in order.iter().enumerate() {
        let s = sigma[i];
        if s > 0.0 && s.is_normal() {
            long_vecs.push(long[i].iter().map(|v| v / s).collect());
        } else {
            long_vecs.push(vec![0.0; long_len]);
            missing.push(slot);
        }
    }
    complete_basis(&mut long_vecs, &missing, long_len);
    let short_vecs: Vec<Vec<f64>> = order.iter().map(|&i| accum[i].clone()).collect();

    let rank = singular_values.iter().filter(|&&s| s > rank_tol * sigma_max && s > 0.0).count();
    let (left, right) = if m >= n { (long_vecs, short_vecs) } else { (short_vecs, long_vecs) };
    SvdFactors { left, singular_values, right, rank, rows: m, cols: n }
}

/// Rotates the vectors in `work` until they are mutually orthogonal,
/// accumulating the same rotations on an identity of size `other_len`.
/// Returns (rotated vectors, accumulated rotation columns, their norms).
fn hestenes(mut work: Vec<Vec<f64>>, other_len: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let p = work.len();
    let mut accum: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let mut e = vec![0.0; other_len];
            e[j] = 1.0;
            e
        })
        .collect();
    let mut norms: Vec<f64> = work.iter().map(|w| norm_sq(w)).collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for pi in 0..p {
            for qi in (pi + 1)..p {
                let alpha = norms[pi];
                let beta = norms[qi];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot_unchecked(&work[pi], &work[qi]);
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut work, pi, qi, c, s);
                rotate_pair(&mut accum, pi, qi, c, s);
                norms[pi] = norm_sq(&work[pi]);
                norms[qi] = norm_sq(&work[qi]);
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = norms.iter().map(|v| v.sqrt()).collect();
    (work, accum, sigma)
}

fn rotate_pair(vecs: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = vecs.split_at_mut(q);
    let (vp, vq) = (&mut head[p], &mut tail[0]);
    for (a, b) in vp.iter_mut().zip(vq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Fills the `missing` slots with unit vectors orthogonal to all others.
fn complete_basis(vecs: &mut [Vec<f64>], missing: &[usize], len: usize) {
    let mut candidate = 0;
    for &slot in missing {
        loop {
            assert!(candidate < len, "cannot complete an orthonormal basis");
            let mut e = vec![0.0; len];
            e[candidate] = 1.0;
            candidate += 1;
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for (k, v) in vecs.iter().enumerate() {
                    if k == slot || v.iter().all(|x| *x == 0.0) {
                        continue;
                    }
                    let c = dot_unchecked(v, &e);
                    for (ei, vi) in e.iter_mut().zip(v) {
                        *ei -= c * vi;
                    }
                }
            }
            let nrm = norm_sq(&e).sqrt();
            if nrm > 0.5 {
                vecs[slot] = e.into_iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
}

/// `A^+ y` via the SVD; this is the optimal solution of `A beta = y` in
/// every setting (unique, least squares, least norm).
pub fn pinv_solve(a: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != a.rows() {
        return Err(dim(format!("pinv_solve: {} rows, rhs length {}", a.rows(), y.len())));
    }
    svd(a, DEFAULT_RANK_TOL).pinv_apply(y)
}

pub fn rate_constants(a: &DenseMatrix) -> Result<RateConstants> {
    if a.frob_sq() == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    svd(a, DEFAULT_RANK_TOL).rate_constants(a.frob_sq())
}

/// Row-space projector `v -> A^+ A v`.
pub fn projector_rowspace(a: &DenseMatrix) -> Result<SubspaceProjector> {
    if a.frob_sq() == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(svd(a, DEFAULT_RANK_TOL).row_space_projector())
}

/// Forms `X = UV`. Only for reference computations.
pub fn explicit_product(sys: &FactoredSystem) -> DenseMatrix {
    sys.u().matmul(sys.v()).expect("factored system has conforming inner dimensions")
}

/// Reference quantities of a factored system: the optimal solutions of the
/// full system and of both subsystems, and the rate constants of U, V, X.
#[derive(Debug, Clone)]
pub struct FactoredOracle {
    pub beta_star: Vec<f64>,
    pub x_star: Vec<f64>,
    pub b_star: Vec<f64>,
    pub u: RateConstants,
    pub v: RateConstants,
    pub x: RateConstants,
    pub rank_u: usize,
    pub rank_v: usize,
    pub rank_x: usize,
}

impl FactoredOracle {
    pub fn analyze(sys: &FactoredSystem) -> Result<Self> {
        let x_mat = explicit_product(sys);
        let svd_u = svd(sys.u(), DEFAULT_RANK_TOL);
        let svd_v = svd(sys.v(), DEFAULT_RANK_TOL);
        let svd_x = svd(&x_mat, DEFAULT_RANK_TOL);
        let x_star = svd_u.pinv_apply(sys.y())?;
        let b_star = svd_v.pinv_apply(&x_star)?;
        let beta_star = svd_x.pinv_apply(sys.y())?;
        Ok(Self {
            beta_star,
            x_star,
            b_star,
            u: svd_u.rate_constants(sys.u().frob_sq())?,
            v: svd_v.rate_constants(sys.v().frob_sq())?,
            x: svd_x.rate_constants(x_mat.frob_sq())?,
            rank_u: svd_u.rank(),
            rank_v: svd_v.rank(),
            rank_x: svd_x.rank(),
        })
    }

    pub fn theorem_inputs(&self) -> TheoremInputs {
        TheoremInputs {
            alpha_u: self.u.alpha,
            alpha_v: self.v.alpha,
            theta_v: self.v.theta,
            kappa_sq_u: self.u.kappa_sq,
            b_star_sq: norm_sq(&self.b_star),
            x_star_sq: norm_sq(&self.x_star),
        }
    }

    pub fn bound(&self, variant: BoundVariant, t: u64) -> f64 {
        crate::factored::theorem_bound(variant, t, &self.theorem_inputs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frob(a: &DenseMatrix) -> f64 {
        a.frob_sq().sqrt()
    }

    #[test]
    fn identity_svd() {
        let f = svd(&DenseMatrix::identity(3), DEFAULT_RANK_TOL);
        assert_eq!(f.singular_values(), &[1.0, 1.0, 1.0]);
        assert_eq!(f.rank(), 3);
    }

    #[test]
    fn rank_one_diagonal() {
        let a = DenseMatrix::from_rows(&[[3.0, 0.0], [0.0, 0.0]]).unwrap();
        let f = svd(&a, DEFAULT_RANK_TOL);
        assert_eq!(f.singular_values(), &[3.0, 0.0]);
        assert_eq!(f.rank(), 1);
        let u = f.left_matrix();
        let utu = u.transpose().matmul(&u).unwrap();
        assert!(utu.sub(&DenseMatrix::identity(2)).unwrap().frob_sq() < 1e-24);
        assert!(frob(&f.reconstruct().sub(&a).unwrap()) < 1e-14);
    }

    #[test]
    fn wide_matrix_reconstructs() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0, 4.0], [2.0, 0.5, -1.0, 0.0]]).unwrap();
        let f = svd(&a, DEFAULT_RANK_TOL);
        assert_eq!(f.rank(), 2);
        assert!(frob(&f.reconstruct().sub(&a).unwrap()) <= 1e-13 * frob(&a));
    }

    #[test]
    fn pinv_solve_cases() {
        assert_eq!(pinv_solve(&DenseMatrix::identity(2), &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let wide = DenseMatrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let ln = pinv_solve(&wide, &[2.0]).unwrap();
        assert!((ln[0] - 1.0).abs() < 1e-15 && (ln[1] - 1.0).abs() < 1e-15);
        assert!(pinv_solve(&wide, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rate_constant_examples() {
        let rc = rate_constants(&DenseMatrix::identity(2)).unwrap();
        assert_eq!((rc.alpha, rc.kappa_sq, rc.theta), (0.5, 1.0, 1.0));
        let d = DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let rc = rate_constants(&d).unwrap();
        assert!((rc.alpha - 0.8).abs() < 1e-15);
        assert!((rc.kappa_sq - 4.0).abs() < 1e-14);
        assert!((rc.theta - 1.0).abs() < 1e-14);
        let z = DenseMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(rate_constants(&z), Err(Error::ZeroMatrix)));
        assert!(matches!(projector_rowspace(&z), Err(Error::ZeroMatrix)));
    }

    #[test]
    fn rank_deficient_uses_smallest_nonzero_sigma() {
        let a = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]]).unwrap();
        let rc = rate_constants(&a).unwrap();
        // single nonzero sigma^2 = ||A||_F^2 = 12
        assert!(rc.alpha.abs() < 1e-14);
        assert!((rc.kappa_sq - 1.0).abs() < 1e-14);
    }

    #[test]
    fn projector_examples() {
        let full = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [0.0, 1.0]]).unwrap();
        let p = projector_rowspace(&full).unwrap();
        let v = [0.3, -1.7];
        let pv = p.apply(&v).unwrap();
        assert!((pv[0] - v[0]).abs() < 1e-14 && (pv[1] - v[1]).abs() < 1e-14);

        let axis = DenseMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let p = projector_rowspace(&axis).unwrap();
        assert_eq!(p.apply(&[5.0, 7.0]).unwrap(), vec![5.0, 0.0]);
        assert!(p.apply(&[1.0]).is_err());
    }
}
