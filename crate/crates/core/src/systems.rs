//! Gaussian scenario generators and factored-system file I/O.
//!
//! Scenario shapes (all with full-rank Gaussian factors):
//!
//! | tag   | dimensions                         | right-hand side |
//! |-------|------------------------------------|-----------------|
//! | `S1`  | `k < min(m, n)`, or `n < k < m`    | consistent      |
//! | `S2`  | `k > m` (U underdetermined)        | consistent      |
//! | `S3a` | `m > n`, `n < k < m`               | inconsistent    |
//! | `S3b` | `k < n < m`                        | inconsistent    |
//!
//! Inconsistent right-hand sides are `X beta + r` with `r` in the left null
//! space of `X = UV`, scaled to half the signal norm. Building `r` needs the
//! column space of `X`, so that step goes through the oracle.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dense::{dot_unchecked, norm_sq, DenseMatrix, DenseVector};
use crate::error::{dim, Error, Result};
use crate::factored::FactoredSystem;
use crate::oracle::{explicit_product, svd, DEFAULT_RANK_TOL};
use crate::solvers::LinearSystem;
use crate::textio::{read_matrix, read_vector, write_matrix, write_vector};

/// `||r|| / ||X beta||` for generated inconsistent systems.
pub const RESIDUAL_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Scenario {
    S1,
    S2,
    S3a,
    S3b,
    #[serde(rename = "custom")]
    Custom,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S3a => "S3a",
            Scenario::S3b => "S3b",
            Scenario::Custom => "custom",
        }
    }

    /// Whether generated instances of this scenario have a consistent
    /// right-hand side. `Custom` systems come from files and are unknown.
    pub fn consistent(self) -> Option<bool> {
        match self {
            Scenario::S1 | Scenario::S2 => Some(true),
            Scenario::S3a | Scenario::S3b => Some(false),
            Scenario::Custom => None,
        }
    }

    /// Checks the scenario's dimension relations; `Ok` carries nothing.
    pub fn check_dims(self, m: usize, n: usize, k: usize) -> std::result::Result<(), String> {
        if m == 0 || n == 0 || k == 0 {
            return Err("dimensions must be positive".into());
        }
        let ok = match self {
            Scenario::S1 => k < m.min(n) || (n < k && k < m),
            Scenario::S2 => k > m,
            Scenario::S3a => m > n && n < k && k < m,
            Scenario::S3b => k < n && n < m,
            Scenario::Custom => true,
        };
        if ok {
            Ok(())
        } else {
            Err(match self {
                Scenario::S1 => "S1 needs k < min(m, n) or n < k < m".into(),
                Scenario::S2 => "S2 needs k > m".into(),
                Scenario::S3a => "S3a needs n < k < m".into(),
                Scenario::S3b => "S3b needs k < n < m".into(),
                Scenario::Custom => unreachable!(),
            })
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Scenario::S1),
            "s2" => Ok(Scenario::S2),
            "s3a" => Ok(Scenario::S3a),
            "s3b" => Ok(Scenario::S3b),
            "custom" => Ok(Scenario::Custom),
            _ => Err(Error::Config(format!(
                "unknown scenario {s:?}; expected one of S1, S2, S3a, S3b, custom"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, m: usize, n: usize, k: usize, seed: u64) -> Result<Self> {
        if scenario == Scenario::Custom {
            return Err(Error::Config("custom systems are loaded, not generated".into()));
        }
        scenario.check_dims(m, n, k).map_err(|reason| Error::Scenario {
            scenario: scenario.to_string(),
            m,
            n,
            k,
            reason,
        })?;
        Ok(Self { scenario, m, n, k, seed })
    }

    pub fn consistent(&self) -> bool {
        self.scenario.consistent().unwrap_or(true)
    }
}

/// A generated system together with the vector it was generated from.
#[derive(Debug, Clone)]
pub struct Generated {
    pub system: FactoredSystem,
    pub beta: Vec<f64>,
    /// `||r|| / ||X beta||`, zero for consistent systems.
    pub residual_ratio: f64,
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal)).expect("finite samples")
}

pub fn gaussian_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Draws U, V, beta (in that order) and builds y.
pub fn generate<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<Generated> {
    let spec = ScenarioSpec::new(spec.scenario, spec.m, spec.n, spec.k, spec.seed)?;
    let u = gaussian_matrix(spec.m, spec.k, rng);
    let v = gaussian_matrix(spec.k, spec.n, rng);
    let beta = gaussian_vector(spec.n, rng);
    assemble(u, v, beta, spec.consistent(), spec.scenario, rng)
}

fn assemble<R: Rng + ?Sized>(
    u: DenseMatrix,
    v: DenseMatrix,
    beta: Vec<f64>,
    consistent: bool,
    scenario: Scenario,
    rng: &mut R,
) -> Result<Generated> {
    let (y, residual_ratio) = if consistent {
        (u.matvec(&v.matvec(&beta)?)?, 0.0)
    } else {
        let y = make_inconsistent_rhs(&u, &v, &beta, rng)?;
        (y, RESIDUAL_RATIO)
    };
    let system = FactoredSystem::new(u, v, DenseVector::new(y)?, scenario)?;
    Ok(Generated { system, beta, residual_ratio })
}

pub fn gen_gaussian_factored<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<FactoredSystem> {
    Ok(generate(spec, rng)?.system)
}

/// Component of `w` orthogonal to the column space of `x`: `w - X X^+ w`.
pub fn left_null_component(x: &DenseMatrix, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != x.rows() {
        return Err(dim(format!("{} rows but w has length {}", x.rows(), w.len())));
    }
    let f = svd(x, DEFAULT_RANK_TOL);
    if f.rank() >= x.rows() {
        return Err(Error::TrivialNullSpace);
    }
    f.col_space_projector().complement(w)
}

/// `y = U V beta + r`, with `r` a Gaussian vector projected onto the left
/// null space of `UV` and rescaled to `RESIDUAL_RATIO * ||U V beta||`.
pub fn make_inconsistent_rhs<R: Rng + ?Sized>(
    u: &DenseMatrix,
    v: &DenseMatrix,
    beta: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if u.cols() != v.rows() || v.cols() != beta.len() {
        return Err(dim("U, V, beta do not conform"));
    }
    let signal = u.matvec(&v.matvec(beta)?)?;
    let x = u.matmul(v)?;
    let w = gaussian_vector(u.rows(), rng);
    let r = left_null_component(&x, &w)?;
    add_scaled_residual(&signal, &r)
}

fn add_scaled_residual(signal: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    let rn = norm_sq(r).sqrt();
    let sn = norm_sq(signal).sqrt();
    if rn <= f64::EPSILON * sn.max(1.0) {
        return Err(Error::TrivialNullSpace);
    }
    let scale = RESIDUAL_RATIO * sn / rn;
    Ok(signal.iter().zip(r).map(|(s, ri)| s + scale * ri).collect())
}

/// A plain Gaussian system `A beta = y` with `A` of size `m x n`.
pub fn gen_gaussian_plain<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    consistent: bool,
    rng: &mut R,
) -> Result<(LinearSystem, Vec<f64>)> {
    if m == 0 || n == 0 {
        return Err(dim("dimensions must be positive"));
    }
    let a = gaussian_matrix(m, n, rng);
    let beta = gaussian_vector(n, rng);
    let signal = a.matvec(&beta)?;
    let y = if consistent {
        signal
    } else {
        let w = gaussian_vector(m, rng);
        add_scaled_residual(&signal, &left_null_component(&a, &w)?)?
    };
    Ok((LinearSystem::new(a, DenseVector::new(y)?)?, beta))
}

/// `len x cols` matrix with orthonormal columns (Gaussian, then two-pass
/// modified Gram-Schmidt). Requires `cols <= len`.
pub fn random_orthonormal<R: Rng + ?Sized>(len: usize, cols: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if cols > len {
        return Err(dim(format!("cannot fit {cols} orthonormal vectors in dimension {len}")));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while basis.len() < cols {
        let mut v = gaussian_vector(len, rng);
        for _ in 0..2 {
            for q in &basis {
                let c = dot_unchecked(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let nrm = norm_sq(&v).sqrt();
        if nrm > 1e-8 {
            basis.push(v.into_iter().map(|x| x / nrm).collect());
        }
    }
    Ok(basis)
}

/// `sum_i s_i l_i r_i^T` for column sets `left` (rows long) and `right`.
fn outer_sum(left: &[Vec<f64>], s: &[f64], right: &[Vec<f64>], rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |i, j| {
        left.iter().zip(right).zip(s).map(|((l, r), si)| si * l[i] * r[j]).sum()
    })
    .expect("finite product")
}

/// Log-spaced values from `1` down to `1 / sqrt(kappa_sq)`, so the ratio of
/// the extreme squares is `kappa_sq`.
fn log_spaced(count: usize, kappa_sq: f64) -> Vec<f64> {
    let kappa = kappa_sq.sqrt();
    (0..count)
        .map(|i| {
            let f = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            kappa.powf(-f)
        })
        .collect()
}

/// Factored instance with prescribed conditioning: `U = Q1 S_U Q2^T`,
/// `V = Q2 S_V Q3^T` with aligned log-spaced spectra, so that
/// `kappa_X^2 = kappa_U^2 * kappa_V^2`. Requires `k <= min(m, n)`.
pub fn gen_conditioned_factored<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    kappa_sq_u: f64,
    kappa_sq_v: f64,
    rng: &mut R,
) -> Result<Generated> {
    let spec = ScenarioSpec::new(spec.scenario, spec.m, spec.n, spec.k, spec.seed)?;
    let (m, n, k) = (spec.m, spec.n, spec.k);
    if k > m.min(n) {
        return Err(Error::Scenario {
            scenario: spec.scenario.to_string(),
            m,
            n,
            k,
            reason: "conditioned generation needs k <= min(m, n)".into(),
        });
    }
    if !(kappa_sq_u >= 1.0 && kappa_sq_v >= 1.0) {
        return Err(Error::Config("condition numbers must be >= 1".into()));
    }
    let q1 = random_orthonormal(m, k, rng)?;
    let q2 = random_orthonormal(k, k, rng)?;
    let q3 = random_orthonormal(n, k, rng)?;
    let u = outer_sum(&q1, &log_spaced(k, kappa_sq_u), &q2, m, k);
    let v = outer_sum(&q2, &log_spaced(k, kappa_sq_v), &q3, k, n);
    let beta = gaussian_vector(n, rng);
    assemble(u, v, beta, spec.consistent(), spec.scenario, rng)
}

pub fn save_factored(dir: &Path, sys: &FactoredSystem) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    write_matrix(&dir.join("U.mat"), sys.u())?;
    write_matrix(&dir.join("V.mat"), sys.v())?;
    write_vector(&dir.join("y.vec"), sys.y())
}

/// Loads `U`, `V`, `y` from dense text files; the scenario is `custom`.
pub fn load_factored(path_u: &Path, path_v: &Path, path_y: &Path) -> Result<FactoredSystem> {
    let u = read_matrix(path_u)?;
    let v = read_matrix(path_v)?;
    let y = read_vector(path_y)?;
    FactoredSystem::new(u, v, y, Scenario::Custom)
}

/// Loads a factored system stored as `U.mat`, `V.mat`, `y.vec` in `dir`.
pub fn load_factored_dir(dir: &Path) -> Result<FactoredSystem> {
    load_factored(&dir.join("U.mat"), &dir.join("V.mat"), &dir.join("y.vec"))
}

/// `X = UV`, delegated to the oracle. Test and reference use only.
pub fn materialize(sys: &FactoredSystem) -> Result<LinearSystem> {
    LinearSystem::new(explicit_product(sys), sys.y().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::generation_rng;

    #[test]
    fn scenario_rules() {
        assert!(ScenarioSpec::new(Scenario::S1, 200, 150, 100, 0).is_ok());
        assert!(ScenarioSpec::new(Scenario::S1, 120, 50, 80, 0).is_ok());
        assert!(matches!(
            ScenarioSpec::new(Scenario::S1, 2, 2, 3, 0),
            Err(Error::Scenario { .. })
        ));
        assert!(ScenarioSpec::new(Scenario::S2, 40, 60, 50, 0).is_ok());
        assert!(ScenarioSpec::new(Scenario::S2, 60, 40, 50, 0).is_err());
        assert!(ScenarioSpec::new(Scenario::S3a, 120, 50, 80, 0).is_ok());
        assert!(ScenarioSpec::new(Scenario::S3a, 50, 120, 80, 0).is_err());
        assert!(ScenarioSpec::new(Scenario::S3b, 120, 75, 50, 0).is_ok());
        assert!(ScenarioSpec::new(Scenario::S3b, 75, 120, 50, 0).is_err());
        assert!(ScenarioSpec::new(Scenario::Custom, 3, 3, 3, 0).is_err());
    }

    #[test]
    fn scenario_parse_roundtrip() {
        for s in [Scenario::S1, Scenario::S2, Scenario::S3a, Scenario::S3b, Scenario::Custom] {
            assert_eq!(s.to_string().parse::<Scenario>().unwrap(), s);
        }
        assert!("S4".parse::<Scenario>().is_err());
    }

    #[test]
    fn axis_null_component() {
        let x = DenseMatrix::from_rows(&[[1.0], [0.0]]).unwrap();
        assert_eq!(left_null_component(&x, &[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert!(matches!(
            left_null_component(&DenseMatrix::identity(2), &[1.0, 2.0]),
            Err(Error::TrivialNullSpace)
        ));
    }

    #[test]
    fn square_factors_have_no_room_for_a_residual() {
        let mut rng = generation_rng(1);
        let u = gaussian_matrix(3, 3, &mut rng);
        let v = gaussian_matrix(3, 3, &mut rng);
        let b = gaussian_vector(3, &mut rng);
        assert!(matches!(make_inconsistent_rhs(&u, &v, &b, &mut rng), Err(Error::TrivialNullSpace)));
    }

    #[test]
    fn consistent_rhs_is_two_matvecs() {
        let spec = ScenarioSpec::new(Scenario::S1, 6, 5, 2, 3).unwrap();
        let g = generate(&spec, &mut generation_rng(3)).unwrap();
        let direct = g.system.u().matvec(&g.system.v().matvec(&g.beta).unwrap()).unwrap();
        assert_eq!(g.system.y().as_slice(), direct.as_slice());
        assert_eq!(g.residual_ratio, 0.0);
    }

    #[test]
    fn residual_has_requested_size() {
        let spec = ScenarioSpec::new(Scenario::S3b, 12, 8, 4, 5).unwrap();
        let g = generate(&spec, &mut generation_rng(5)).unwrap();
        let s = &g.system;
        let signal = s.u().matvec(&s.v().matvec(&g.beta).unwrap()).unwrap();
        let r: Vec<f64> = s.y().iter().zip(&signal).map(|(a, b)| a - b).collect();
        let ratio = (norm_sq(&r) / norm_sq(&signal)).sqrt();
        assert!((ratio - RESIDUAL_RATIO).abs() < 1e-12);
    }

    #[test]
    fn conditioned_spectra() {
        let spec = ScenarioSpec::new(Scenario::S3b, 30, 20, 8, 1).unwrap();
        let g = gen_conditioned_factored(&spec, 25.0, 16.0, &mut generation_rng(1)).unwrap();
        let ku = crate::oracle::rate_constants(g.system.u()).unwrap().kappa_sq;
        let kv = crate::oracle::rate_constants(g.system.v()).unwrap().kappa_sq;
        let kx = crate::oracle::rate_constants(&explicit_product(&g.system)).unwrap().kappa_sq;
        assert!((ku - 25.0).abs() < 1e-8 && (kv - 16.0).abs() < 1e-8);
        assert!((kx - 400.0).abs() < 1e-6);
    }

    #[test]
    fn orthonormal_rejects_too_many_columns() {
        assert!(random_orthonormal(2, 3, &mut generation_rng(0)).is_err());
    }
}
