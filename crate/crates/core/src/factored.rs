//! Interlaced solvers for `U V beta = y` that never form `UV`.
//!
//! Each step runs one step of a method on `U x = y`, then one step of a
//! method on `V b = x_t`, where the second step reads the freshly updated
//! `x_t`. The supported pairings are RK-RK, REK-RK, REK-REK and RGS-RGS.
//!
//! Draw order within a step: U row, U column (if needed), then V row,
//! V column (if needed).

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::dense::{norm_sq, DenseMatrix, DenseVector};
use crate::driver::{drive, Recorder, RunOptions, RunReport, Stepper};
use crate::error::{dim, Error, Result};
use crate::kernels::{gauss_seidel_update, kaczmarz_update, project_out_column};
use crate::sampling::NormSampler;
use crate::solvers::Method;
use crate::systems::Scenario;

#[derive(Debug, Clone)]
pub struct FactoredSystem {
    u: DenseMatrix,
    v: DenseMatrix,
    y: DenseVector,
    scenario: Scenario,
}

impl FactoredSystem {
    pub fn new(u: DenseMatrix, v: DenseMatrix, y: DenseVector, scenario: Scenario) -> Result<Self> {
        if u.cols() != v.rows() {
            return Err(dim(format!(
                "inner dimensions differ: U is {}x{}, V is {}x{}",
                u.rows(),
                u.cols(),
                v.rows(),
                v.cols()
            )));
        }
        if y.len() != u.rows() {
            return Err(dim(format!("U has {} rows but y has length {}", u.rows(), y.len())));
        }
        Ok(Self { u, v, y, scenario })
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn y(&self) -> &DenseVector {
        &self.y
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn with_scenario(mut self, scenario: Scenario) -> Self {
        self.scenario = scenario;
        self
    }

    /// Rows of the full system.
    pub fn m(&self) -> usize {
        self.u.rows()
    }

    /// Columns of the full system.
    pub fn n(&self) -> usize {
        self.v.cols()
    }

    /// Inner dimension.
    pub fn k(&self) -> usize {
        self.u.cols()
    }
}

/// A supported interlacing: `first` acts on `U x = y`, `second` on `V b = x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pair {
    pub first: Method,
    pub second: Method,
}

impl Pair {
    pub const RK_RK: Pair = Pair { first: Method::Rk, second: Method::Rk };
    pub const REK_RK: Pair = Pair { first: Method::Rek, second: Method::Rk };
    pub const REK_REK: Pair = Pair { first: Method::Rek, second: Method::Rek };
    pub const RGS_RGS: Pair = Pair { first: Method::Rgs, second: Method::Rgs };
    pub const SUPPORTED: [Pair; 4] = [Pair::RK_RK, Pair::REK_RK, Pair::REK_REK, Pair::RGS_RGS];

    pub fn new(first: Method, second: Method) -> Result<Self> {
        let pair = Pair { first, second };
        if Self::SUPPORTED.contains(&pair) {
            Ok(pair)
        } else {
            Err(Error::UnsupportedPair(pair.to_string()))
        }
    }

    /// FLOPs of one interlaced step: `first` on the `m x k` factor plus
    /// `second` on the `k x n` factor.
    pub fn step_cost(self, m: usize, n: usize, k: usize) -> u64 {
        self.first.step_cost(m, k) + self.second.step_cost(k, n)
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first, self.second)
    }
}

impl FromStr for Pair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| Error::UnsupportedPair(s.to_string()))?;
        Pair::new(a.parse()?, b.parse()?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterlacedState {
    /// Iterate for `U x = y` (length k).
    pub x: Vec<f64>,
    /// Iterate for `V b = x` (length n); the reported estimate.
    pub b: Vec<f64>,
    /// REK on U: residual estimate, starts at `y` (length m).
    pub z: Option<Vec<f64>>,
    /// REK on V: residual estimate of the moving right-hand side `x_t`
    /// (length k). Starts at `x_0 = 0` and receives every change of `x`.
    pub z_v: Option<Vec<f64>>,
    /// RGS on U: maintained `y - U x`.
    pub res_u: Option<Vec<f64>>,
    /// RGS on V: maintained `x - V b`.
    pub res_v: Option<Vec<f64>>,
    pub t: u64,
    pub flops: u64,
}

impl InterlacedState {
    pub fn init(pair: Pair, sys: &FactoredSystem) -> Self {
        let (k, n) = (sys.k(), sys.n());
        let y = sys.y().as_slice();
        Self {
            x: vec![0.0; k],
            b: vec![0.0; n],
            z: (pair.first == Method::Rek).then(|| y.to_vec()),
            z_v: (pair.second == Method::Rek).then(|| vec![0.0; k]),
            res_u: (pair.first == Method::Rgs).then(|| y.to_vec()),
            res_v: (pair.second == Method::Rgs).then(|| vec![0.0; k]),
            t: 0,
            flops: 0,
        }
    }

    fn check(&self, pair: Pair, sys: &FactoredSystem) -> Result<()> {
        let (m, n, k) = (sys.m(), sys.n(), sys.k());
        let ok = |v: &Option<Vec<f64>>, need: bool, len: usize| match v {
            Some(v) => need && v.len() == len,
            None => !need,
        };
        if self.x.len() != k
            || self.b.len() != n
            || !ok(&self.z, pair.first == Method::Rek, m)
            || !ok(&self.z_v, pair.second == Method::Rek, k)
            || !ok(&self.res_u, pair.first == Method::Rgs, m)
            || !ok(&self.res_v, pair.second == Method::Rgs, k)
        {
            return Err(dim(format!(
                "interlaced state does not match {pair} on a {m}x{k} / {k}x{n} system"
            )));
        }
        Ok(())
    }
}

/// Samplers for the rows and columns of both factors, built as needed.
#[derive(Debug, Clone)]
pub struct FactorSamplers {
    pub u_rows: Option<NormSampler>,
    pub u_cols: Option<NormSampler>,
    pub v_rows: Option<NormSampler>,
    pub v_cols: Option<NormSampler>,
}

impl FactorSamplers {
    pub fn for_pair(pair: Pair, sys: &FactoredSystem) -> Result<Self> {
        let build = |need: bool, f: fn(&DenseMatrix) -> Result<NormSampler>, a: &DenseMatrix| {
            need.then(|| f(a)).transpose()
        };
        Ok(Self {
            u_rows: build(pair.first.needs_row_sampler(), NormSampler::from_rows, sys.u())?,
            u_cols: build(pair.first.needs_col_sampler(), NormSampler::from_cols, sys.u())?,
            v_rows: build(pair.second.needs_row_sampler(), NormSampler::from_rows, sys.v())?,
            v_cols: build(pair.second.needs_col_sampler(), NormSampler::from_cols, sys.v())?,
        })
    }
}

fn need(s: &Option<NormSampler>) -> Result<&NormSampler> {
    s.as_ref().ok_or_else(|| Error::Config("sampler missing for this pair".into()))
}

/// Indices drawn for one interlaced step. Unused slots are ignored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Draws {
    pub u_row: usize,
    pub u_col: usize,
    pub v_row: usize,
    pub v_col: usize,
}

impl Draws {
    pub fn sample<R: Rng + ?Sized>(pair: Pair, s: &FactorSamplers, rng: &mut R) -> Result<Self> {
        let mut d = Draws::default();
        if pair.first.needs_row_sampler() {
            d.u_row = need(&s.u_rows)?.draw(rng);
        }
        if pair.first.needs_col_sampler() {
            d.u_col = need(&s.u_cols)?.draw(rng);
        }
        if pair.second.needs_row_sampler() {
            d.v_row = need(&s.v_rows)?.draw(rng);
        }
        if pair.second.needs_col_sampler() {
            d.v_col = need(&s.v_cols)?.draw(rng);
        }
        Ok(d)
    }
}

/// One interlaced step with the indices already drawn.
pub fn interlaced_update(
    pair: Pair,
    sys: &FactoredSystem,
    draws: Draws,
    state: &mut InterlacedState,
) -> Result<()> {
    state.check(pair, sys)?;
    let (u, v, y) = (sys.u(), sys.v(), sys.y().as_slice());
    for (idx, len) in [
        (draws.u_row, u.rows()),
        (draws.u_col, u.cols()),
        (draws.v_row, v.rows()),
        (draws.v_col, v.cols()),
    ] {
        if idx >= len {
            return Err(Error::OutOfRange { index: idx, len });
        }
    }

    // first half: U x = y
    match pair.first {
        Method::Rk => {
            let c = kaczmarz_update(u, draws.u_row, y[draws.u_row], &mut state.x);
            if let Some(z_v) = state.z_v.as_mut() {
                axpy_row(u, draws.u_row, c, z_v);
            }
        }
        Method::Rek => {
            let z = state.z.as_mut().expect("checked");
            project_out_column(u, draws.u_col, z);
            let rhs = y[draws.u_row] - z[draws.u_row];
            let c = kaczmarz_update(u, draws.u_row, rhs, &mut state.x);
            if let Some(z_v) = state.z_v.as_mut() {
                axpy_row(u, draws.u_row, c, z_v);
            }
        }
        Method::Rgs => {
            let res_u = state.res_u.as_mut().expect("checked");
            let j = draws.u_col;
            let gamma = gauss_seidel_update(u, j, &mut state.x, res_u);
            if let Some(res_v) = state.res_v.as_mut() {
                res_v[j] += gamma;
            }
        }
        Method::Regs => unreachable!("pair validated"),
    }

    // second half: V b = x_t, reading the updated x
    match pair.second {
        Method::Rk => {
            let p = draws.v_row;
            kaczmarz_update(v, p, state.x[p], &mut state.b);
        }
        Method::Rek => {
            let z_v = state.z_v.as_mut().expect("checked");
            project_out_column(v, draws.v_col, z_v);
            let p = draws.v_row;
            let rhs = state.x[p] - z_v[p];
            kaczmarz_update(v, p, rhs, &mut state.b);
        }
        Method::Rgs => {
            let res_v = state.res_v.as_mut().expect("checked");
            gauss_seidel_update(v, draws.v_col, &mut state.b, res_v);
        }
        Method::Regs => unreachable!("pair validated"),
    }

    state.t += 1;
    state.flops += pair.step_cost(sys.m(), sys.n(), sys.k());
    Ok(())
}

/// `w += c * a_i^T`, the change a Kaczmarz update made to `x`.
fn axpy_row(a: &DenseMatrix, i: usize, c: f64, w: &mut [f64]) {
    for (wi, ai) in w.iter_mut().zip(a.row_view(i)) {
        *wi += c * ai;
    }
}

/// One step of the given pair, drawing its indices from `rng`.
pub fn interlaced_step<R: Rng + ?Sized>(
    pair: Pair,
    sys: &FactoredSystem,
    samplers: &FactorSamplers,
    state: &mut InterlacedState,
    rng: &mut R,
) -> Result<()> {
    let draws = Draws::sample(pair, samplers, rng)?;
    interlaced_update(pair, sys, draws, state)
}

/// RK on `U x = y`, then RK on `V b = x_t`.
pub fn rkrk_step<R: Rng + ?Sized>(
    sys: &FactoredSystem,
    samplers: &FactorSamplers,
    state: &mut InterlacedState,
    rng: &mut R,
) -> Result<()> {
    interlaced_step(Pair::RK_RK, sys, samplers, state, rng)
}

/// REK on `U x = y`, then RK on `V b = x_t`.
pub fn rekrk_step<R: Rng + ?Sized>(
    sys: &FactoredSystem,
    samplers: &FactorSamplers,
    state: &mut InterlacedState,
    rng: &mut R,
) -> Result<()> {
    interlaced_step(Pair::REK_RK, sys, samplers, state, rng)
}

#[derive(Debug, Clone)]
pub struct InterlacedSolver<'a> {
    pair: Pair,
    system: &'a FactoredSystem,
    samplers: FactorSamplers,
}

impl<'a> InterlacedSolver<'a> {
    pub fn new(pair: Pair, system: &'a FactoredSystem) -> Result<Self> {
        let pair = Pair::new(pair.first, pair.second)?;
        let samplers = FactorSamplers::for_pair(pair, system)?;
        Ok(Self { pair, system, samplers })
    }

    pub fn pair(&self) -> Pair {
        self.pair
    }

    /// `(||U x - (y - z)||, ||V b - (x - z_V)||)`, with the `z` terms only
    /// for extended methods.
    pub fn subsystem_residuals(&self, state: &InterlacedState) -> (f64, f64) {
        let sys = self.system;
        let ux = sys.u().matvec(&state.x).expect("dims checked");
        let mut r1 = 0.0;
        for (i, (y, v)) in sys.y().iter().zip(&ux).enumerate() {
            let target = y - state.z.as_ref().map_or(0.0, |z| z[i]);
            r1 += (target - v).powi(2);
        }
        let vb = sys.v().matvec(&state.b).expect("dims checked");
        let mut r2 = 0.0;
        for (p, (x, v)) in state.x.iter().zip(&vb).enumerate() {
            let target = x - state.z_v.as_ref().map_or(0.0, |z| z[p]);
            r2 += (target - v).powi(2);
        }
        (r1.sqrt(), r2.sqrt())
    }
}

impl Stepper for InterlacedSolver<'_> {
    type State = InterlacedState;

    fn init_state(&self) -> InterlacedState {
        InterlacedState::init(self.pair, self.system)
    }

    fn step<R: Rng + ?Sized>(&self, state: &mut InterlacedState, rng: &mut R) -> Result<()> {
        interlaced_step(self.pair, self.system, &self.samplers, state, rng)
    }

    fn iteration(&self, state: &InterlacedState) -> u64 {
        state.t
    }

    fn flops(&self, state: &InterlacedState) -> u64 {
        state.flops
    }

    fn estimate<'s>(&self, state: &'s InterlacedState) -> Cow<'s, [f64]> {
        Cow::Borrowed(&state.b)
    }

    /// Both subsystem residuals must be small, so the larger one is reported.
    fn residual_norm(&self, state: &InterlacedState) -> f64 {
        let (r1, r2) = self.subsystem_residuals(state);
        r1.max(r2)
    }

    fn check_interval(&self) -> u64 {
        self.system.m() as u64
    }
}

pub fn run_interlaced<R: Rng + ?Sized>(
    pair: Pair,
    system: &FactoredSystem,
    opts: &RunOptions<'_>,
    rng: &mut R,
    recorder: Option<&mut Recorder>,
) -> Result<RunReport<InterlacedState>> {
    let solver = InterlacedSolver::new(pair, system)?;
    drive(&solver, opts, rng, recorder)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundVariant {
    /// Consistent systems, RK-RK.
    A,
    /// Inconsistent systems, REK-RK.
    B,
}

impl FromStr for BoundVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(BoundVariant::A),
            "b" | "B" => Ok(BoundVariant::B),
            _ => Err(Error::Config(format!("bound variant must be `a` or `b`, got {s:?}"))),
        }
    }
}

/// Constants entering the expected-error bound of the interlaced methods.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TheoremInputs {
    pub alpha_u: f64,
    pub alpha_v: f64,
    pub theta_v: f64,
    pub kappa_sq_u: f64,
    pub b_star_sq: f64,
    pub x_star_sq: f64,
}

/// Upper bound on `E ||b_t - beta*||^2`:
///
/// * `A`: `alpha_V^t ||b*||^2 + theta_V alpha_U^t ||x*||^2`
/// * `B`: `alpha_V^t ||b*||^2 + theta_V alpha_U^floor(t/2) (1 + 2 kappa_U^2) ||x*||^2`
pub fn theorem_bound(variant: BoundVariant, t: u64, q: &TheoremInputs) -> f64 {
    let first = q.alpha_v.powf(t as f64) * q.b_star_sq;
    let second = match variant {
        BoundVariant::A => q.alpha_u.powf(t as f64),
        BoundVariant::B => q.alpha_u.powf((t / 2) as f64) * (1.0 + 2.0 * q.kappa_sq_u),
    };
    first + q.theta_v * second * q.x_star_sq
}

/// `||b - beta*||^2` helper used by reports.
pub fn error_sq(b: &[f64], beta_star: &[f64]) -> f64 {
    let diff: Vec<f64> = b.iter().zip(beta_star).map(|(a, c)| a - c).collect();
    norm_sq(&diff)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_system() -> FactoredSystem {
        FactoredSystem::new(
            DenseMatrix::identity(2),
            DenseMatrix::identity(2),
            DenseVector::new(vec![1.0, 2.0]).unwrap(),
            Scenario::Custom,
        )
        .unwrap()
    }

    #[test]
    fn rkrk_identity_factors() {
        let sys = identity_system();
        let mut s = InterlacedState::init(Pair::RK_RK, &sys);
        interlaced_update(Pair::RK_RK, &sys, Draws::default(), &mut s).unwrap();
        assert_eq!(s.x, vec![1.0, 0.0]);
        assert_eq!(s.b, vec![1.0, 0.0]);
        assert_eq!(s.flops, (4 * 2 + 2) * 2);
    }

    #[test]
    fn inner_step_reads_updated_x() {
        let sys = identity_system();
        let mut s = InterlacedState::init(Pair::RK_RK, &sys);
        let d = Draws { u_row: 1, v_row: 1, ..Draws::default() };
        interlaced_update(Pair::RK_RK, &sys, d, &mut s).unwrap();
        assert_eq!(s.b, vec![0.0, 2.0]);
    }

    #[test]
    fn rekrk_with_zero_z_matches_rkrk() {
        let u = DenseMatrix::from_rows(&[[1.0, 2.0], [0.5, -1.0], [3.0, 1.0]]).unwrap();
        let v = DenseMatrix::from_rows(&[[1.0, 0.0, 2.0], [-1.0, 1.0, 0.5]]).unwrap();
        let y = DenseVector::new(vec![1.0, -2.0, 0.5]).unwrap();
        let sys = FactoredSystem::new(u, v, y, Scenario::Custom).unwrap();
        let mut a = InterlacedState::init(Pair::RK_RK, &sys);
        let mut b = InterlacedState::init(Pair::REK_RK, &sys);
        b.z = Some(vec![0.0; 3]);
        // with u_col fixed, z stays zero
        for (i, p) in [(0, 1), (2, 0), (1, 1), (2, 1)] {
            let d = Draws { u_row: i, u_col: 0, v_row: p, v_col: 0 };
            interlaced_update(Pair::RK_RK, &sys, d, &mut a).unwrap();
            interlaced_update(Pair::REK_RK, &sys, d, &mut b).unwrap();
            assert_eq!(a.x, b.x);
            assert_eq!(a.b, b.b);
        }
        assert!(a.flops < b.flops);
    }

    #[test]
    fn pair_parsing() {
        assert_eq!("rk-rk".parse::<Pair>().unwrap(), Pair::RK_RK);
        assert_eq!("rek-rk".parse::<Pair>().unwrap(), Pair::REK_RK);
        assert!(matches!("rgs-regs".parse::<Pair>(), Err(Error::UnsupportedPair(_))));
        assert!(matches!(Pair::new(Method::Rk, Method::Rek), Err(Error::UnsupportedPair(_))));
        assert!("rk".parse::<Pair>().is_err());
    }

    #[test]
    fn flop_ordering_rekrk_vs_rekrek() {
        let (m, n, k) = (120, 75, 50);
        let rekrk = Pair::REK_RK.step_cost(m, n, k);
        let rekrek = Pair::REK_REK.step_cost(m, n, k);
        assert_eq!(rekrek - rekrk, (4 * n as u64 + 4 * k as u64 + 4) - (4 * n as u64 + 2));
        assert!(rekrk < rekrek);
    }

    #[test]
    fn bound_shapes() {
        let q = TheoremInputs {
            alpha_u: 0.9,
            alpha_v: 0.8,
            theta_v: 2.0,
            kappa_sq_u: 3.0,
            b_star_sq: 5.0,
            x_star_sq: 7.0,
        };
        assert_eq!(theorem_bound(BoundVariant::A, 0, &q), 5.0 + 2.0 * 7.0);
        let b0 = theorem_bound(BoundVariant::B, 0, &q);
        let b1 = theorem_bound(BoundVariant::B, 1, &q);
        // alpha_U factor frozen between t = 0 and t = 1
        assert!((b0 - b1 - (1.0 - 0.8) * 5.0).abs() < 1e-12);
        let mut prev = theorem_bound(BoundVariant::A, 2, &q);
        for t in 3..50 {
            let cur = theorem_bound(BoundVariant::A, t, &q);
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn mismatched_state_rejected() {
        let sys = identity_system();
        let mut s = InterlacedState::init(Pair::RK_RK, &sys);
        assert!(interlaced_update(Pair::REK_RK, &sys, Draws::default(), &mut s).is_err());
        let d = Draws { u_row: 9, ..Draws::default() };
        let mut s = InterlacedState::init(Pair::RK_RK, &sys);
        assert!(interlaced_update(Pair::RK_RK, &sys, d, &mut s).is_err());
    }
}
