//! Randomized row- and column-action solvers on a plain system `A beta = y`:
//! Kaczmarz (RK), extended Kaczmarz (REK), Gauss-Seidel (RGS) and extended
//! Gauss-Seidel (REGS).
//!
//! Rows are drawn with probability `||A^i||^2 / ||A||_F^2` and columns with
//! `||A_(j)||^2 / ||A||_F^2`. When a method needs both, the row is drawn
//! first, then the column, from the same stream.
//!
//! Each method has a deterministic `*_update` taking the drawn indices and a
//! `*_step` that draws them.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::dense::{norm_sq, DenseMatrix, DenseVector};
use crate::driver::{drive, Recorder, RunOptions, RunReport, Stepper};
use crate::error::{dim, Error, Result};
use crate::kernels::{
    cost, gauss_seidel_update, kaczmarz_update, project_out_column, project_out_row,
};
use crate::sampling::NormSampler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Rk,
    Rek,
    Rgs,
    Regs,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Rk, Method::Rek, Method::Rgs, Method::Regs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Rk => "rk",
            Method::Rek => "rek",
            Method::Rgs => "rgs",
            Method::Regs => "regs",
        }
    }

    pub fn needs_row_sampler(self) -> bool {
        matches!(self, Method::Rk | Method::Rek | Method::Regs)
    }

    pub fn needs_col_sampler(self) -> bool {
        matches!(self, Method::Rek | Method::Rgs | Method::Regs)
    }

    /// FLOPs of one step on a `rows x cols` matrix.
    pub fn step_cost(self, rows: usize, cols: usize) -> u64 {
        match self {
            Method::Rk => cost::rk(rows, cols),
            Method::Rek => cost::rek(rows, cols),
            Method::Rgs => cost::rgs(rows, cols),
            Method::Regs => cost::regs(rows, cols),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown base method {s:?}")))
    }
}

/// A plain linear system with conforming dimensions.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    a: DenseMatrix,
    y: DenseVector,
}

impl LinearSystem {
    pub fn new(a: DenseMatrix, y: DenseVector) -> Result<Self> {
        if a.rows() != y.len() {
            return Err(dim(format!(
                "system matrix has {} rows but right-hand side has length {}",
                a.rows(),
                y.len()
            )));
        }
        Ok(Self { a, y })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn rhs(&self) -> &DenseVector {
        &self.y
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }
}

/// Iterate and bookkeeping of a single-system solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub beta: Vec<f64>,
    /// REK: residual estimate in the column space complement (length m).
    /// REGS: auxiliary vector subtracted from `beta` (length n).
    pub z: Option<Vec<f64>>,
    /// RGS/REGS: maintained `y - A beta`.
    pub residual: Option<Vec<f64>>,
    pub t: u64,
    pub flops: u64,
}

impl SolverState {
    pub fn init(method: Method, a: &DenseMatrix, y: &[f64]) -> Self {
        let n = a.cols();
        let (z, residual) = match method {
            Method::Rk => (None, None),
            Method::Rek => (Some(y.to_vec()), None),
            Method::Rgs => (None, Some(y.to_vec())),
            Method::Regs => (Some(vec![0.0; n]), Some(y.to_vec())),
        };
        Self { beta: vec![0.0; n], z, residual, t: 0, flops: 0 }
    }

    /// Reported solution: `beta - z` for REGS, `beta` otherwise.
    pub fn estimate(&self, method: Method) -> Cow<'_, [f64]> {
        match (method, &self.z) {
            (Method::Regs, Some(z)) => {
                Cow::Owned(self.beta.iter().zip(z).map(|(b, z)| b - z).collect())
            }
            _ => Cow::Borrowed(&self.beta),
        }
    }
}

fn check_state(a: &DenseMatrix, y: &[f64], state: &SolverState, method: Method) -> Result<()> {
    if y.len() != a.rows() {
        return Err(dim(format!("rhs length {} != rows {}", y.len(), a.rows())));
    }
    if state.beta.len() != a.cols() {
        return Err(dim(format!("iterate length {} != cols {}", state.beta.len(), a.cols())));
    }
    let z_len = match method {
        Method::Rek => Some(a.rows()),
        Method::Regs => Some(a.cols()),
        _ => None,
    };
    if let Some(len) = z_len {
        match &state.z {
            Some(z) if z.len() == len => {}
            _ => return Err(dim(format!("{method} state needs an auxiliary vector of length {len}"))),
        }
    }
    if matches!(method, Method::Rgs | Method::Regs) {
        match &state.residual {
            Some(r) if r.len() == a.rows() => {}
            _ => return Err(dim(format!("{method} state needs a residual of length {}", a.rows()))),
        }
    }
    Ok(())
}

fn check_index(index: usize, len: usize) -> Result<()> {
    if index >= len {
        return Err(Error::OutOfRange { index, len });
    }
    Ok(())
}

/// RK step with row `i` already chosen.
pub fn rk_update(a: &DenseMatrix, y: &[f64], i: usize, state: &mut SolverState) -> Result<()> {
    check_state(a, y, state, Method::Rk)?;
    check_index(i, a.rows())?;
    kaczmarz_update(a, i, y[i], &mut state.beta);
    state.t += 1;
    state.flops += cost::rk(a.rows(), a.cols());
    Ok(())
}

/// REK step with row `i` and column `j` already chosen. The column
/// projection of `z` runs first; the row update then targets `y_i - z_i`.
pub fn rek_update(
    a: &DenseMatrix,
    y: &[f64],
    i: usize,
    j: usize,
    state: &mut SolverState,
) -> Result<()> {
    check_state(a, y, state, Method::Rek)?;
    check_index(i, a.rows())?;
    check_index(j, a.cols())?;
    let z = state.z.as_mut().expect("checked");
    project_out_column(a, j, z);
    let rhs = y[i] - z[i];
    kaczmarz_update(a, i, rhs, &mut state.beta);
    state.t += 1;
    state.flops += cost::rek(a.rows(), a.cols());
    Ok(())
}

/// RGS step with column `j` already chosen.
pub fn rgs_update(a: &DenseMatrix, y: &[f64], j: usize, state: &mut SolverState) -> Result<()> {
    check_state(a, y, state, Method::Rgs)?;
    check_index(j, a.cols())?;
    let res = state.residual.as_mut().expect("checked");
    gauss_seidel_update(a, j, &mut state.beta, res);
    state.t += 1;
    state.flops += cost::rgs(a.rows(), a.cols());
    Ok(())
}

/// REGS step with row `i` and column `j` already chosen.
///
/// `z_t = P_i (z_{t-1} + beta_t - beta_{t-1})`; only coordinate `j` of
/// `beta` moves, so the increment is `gamma e_j`.
pub fn regs_update(
    a: &DenseMatrix,
    y: &[f64],
    i: usize,
    j: usize,
    state: &mut SolverState,
) -> Result<()> {
    check_state(a, y, state, Method::Regs)?;
    check_index(i, a.rows())?;
    check_index(j, a.cols())?;
    let res = state.residual.as_mut().expect("checked");
    let gamma = gauss_seidel_update(a, j, &mut state.beta, res);
    let z = state.z.as_mut().expect("checked");
    z[j] += gamma;
    project_out_row(a, i, z);
    state.t += 1;
    state.flops += cost::regs(a.rows(), a.cols());
    Ok(())
}

/// Samplers a method needs, built once per system.
#[derive(Debug, Clone)]
pub struct Samplers {
    pub rows: Option<NormSampler>,
    pub cols: Option<NormSampler>,
}

impl Samplers {
    pub fn for_method(method: Method, a: &DenseMatrix) -> Result<Self> {
        let rows = method.needs_row_sampler().then(|| NormSampler::from_rows(a)).transpose()?;
        let cols = method.needs_col_sampler().then(|| NormSampler::from_cols(a)).transpose()?;
        Ok(Self { rows, cols })
    }

    fn rows(&self) -> Result<&NormSampler> {
        self.rows.as_ref().ok_or_else(|| Error::Config("row sampler not built".into()))
    }

    fn cols(&self) -> Result<&NormSampler> {
        self.cols.as_ref().ok_or_else(|| Error::Config("column sampler not built".into()))
    }
}

pub fn rk_step<R: Rng + ?Sized>(
    a: &DenseMatrix,
    y: &[f64],
    samplers: &Samplers,
    state: &mut SolverState,
    rng: &mut R,
) -> Result<()> {
    let i = samplers.rows()?.draw(rng);
    rk_update(a, y, i, state)
}

pub fn rek_step<R: Rng + ?Sized>(
    a: &DenseMatrix,
    y: &[f64],
    samplers: &Samplers,
    state: &mut SolverState,
    rng: &mut R,
) -> Result<()> {
    let i = samplers.rows()?.draw(rng);
    let j = samplers.cols()?.draw(rng);
    rek_update(a, y, i, j, state)
}

pub fn rgs_step<R: Rng + ?Sized>(
    a: &DenseMatrix,
    y: &[f64],
    samplers: &Samplers,
    state: &mut SolverState,
    rng: &mut R,
) -> Result<()> {
    let j = samplers.cols()?.draw(rng);
    rgs_update(a, y, j, state)
}

pub fn regs_step<R: Rng + ?Sized>(
    a: &DenseMatrix,
    y: &[f64],
    samplers: &Samplers,
    state: &mut SolverState,
    rng: &mut R,
) -> Result<()> {
    let i = samplers.rows()?.draw(rng);
    let j = samplers.cols()?.draw(rng);
    regs_update(a, y, i, j, state)
}

/// A method bound to a system, with its samplers prepared.
#[derive(Debug, Clone)]
pub struct RowActionSolver<'a> {
    method: Method,
    system: &'a LinearSystem,
    samplers: Samplers,
}

impl<'a> RowActionSolver<'a> {
    pub fn new(method: Method, system: &'a LinearSystem) -> Result<Self> {
        let samplers = Samplers::for_method(method, system.matrix())?;
        Ok(Self { method, system, samplers })
    }

    pub fn method(&self) -> Method {
        self.method
    }
}

impl Stepper for RowActionSolver<'_> {
    type State = SolverState;

    fn init_state(&self) -> SolverState {
        SolverState::init(self.method, self.system.matrix(), self.system.rhs())
    }

    fn step<R: Rng + ?Sized>(&self, state: &mut SolverState, rng: &mut R) -> Result<()> {
        let (a, y) = (self.system.matrix(), self.system.rhs().as_slice());
        match self.method {
            Method::Rk => rk_step(a, y, &self.samplers, state, rng),
            Method::Rek => rek_step(a, y, &self.samplers, state, rng),
            Method::Rgs => rgs_step(a, y, &self.samplers, state, rng),
            Method::Regs => regs_step(a, y, &self.samplers, state, rng),
        }
    }

    fn iteration(&self, state: &SolverState) -> u64 {
        state.t
    }

    fn flops(&self, state: &SolverState) -> u64 {
        state.flops
    }

    fn estimate<'s>(&self, state: &'s SolverState) -> Cow<'s, [f64]> {
        state.estimate(self.method)
    }

    fn residual_norm(&self, state: &SolverState) -> f64 {
        let a = self.system.matrix();
        let ax = a.matvec(&state.estimate(self.method)).expect("state dims checked by steps");
        let r: Vec<f64> = self.system.rhs().iter().zip(&ax).map(|(y, v)| y - v).collect();
        norm_sq(&r).sqrt()
    }

    fn check_interval(&self) -> u64 {
        self.system.rows() as u64
    }
}

/// Runs `method` for up to `opts.budget` steps from the zero iterate.
pub fn run<R: Rng + ?Sized>(
    method: Method,
    system: &LinearSystem,
    opts: &RunOptions<'_>,
    rng: &mut R,
    recorder: Option<&mut Recorder>,
) -> Result<RunReport<SolverState>> {
    let solver = RowActionSolver::new(method, system)?;
    drive(&solver, opts, rng, recorder)
}
