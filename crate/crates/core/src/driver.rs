//! Budgeted iteration loop shared by the plain and the interlaced solvers.

use std::borrow::Cow;

use rand::Rng;

use crate::dense::dist_sq;
use crate::error::{Error, Result};

/// Default residual tolerance for early stopping.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// One recorded point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub iter: u64,
    pub error_sq: f64,
    pub flops: u64,
}

/// Anything that advances an iterate one randomized step at a time.
pub trait Stepper {
    type State;

    fn init_state(&self) -> Self::State;

    fn step<R: Rng + ?Sized>(&self, state: &mut Self::State, rng: &mut R) -> Result<()>;

    fn iteration(&self, state: &Self::State) -> u64;

    fn flops(&self, state: &Self::State) -> u64;

    /// The reported solution estimate.
    fn estimate<'s>(&self, state: &'s Self::State) -> Cow<'s, [f64]>;

    /// Residual norm used for early stopping.
    fn residual_norm(&self, state: &Self::State) -> f64;

    /// How often (in iterations) the residual check runs; the row count of
    /// the system being solved.
    fn check_interval(&self) -> u64;
}

/// Collects samples every `stride` iterations, starting at iteration 0,
/// plus the final iteration when it is not on the stride.
#[derive(Debug, Clone)]
pub struct Recorder {
    stride: u64,
    samples: Vec<Sample>,
}

impl Recorder {
    pub fn new(stride: u64) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Config("recorder stride must be >= 1".into()));
        }
        Ok(Self { stride, samples: Vec::new() })
    }

    pub fn stride(&self) -> u64 {
        self.stride
    }

    pub fn is_due(&self, iter: u64) -> bool {
        iter.is_multiple_of(self.stride)
    }

    pub fn push(&mut self, sample: Sample) {
        if self.samples.last().is_some_and(|s| s.iter == sample.iter) {
            return;
        }
        self.samples.push(sample);
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions<'a> {
    pub budget: u64,
    /// Stop once the residual norm falls to or below this value.
    pub tolerance: Option<f64>,
    /// Recorded metric is `||estimate - reference||^2` when set, the squared
    /// residual norm otherwise.
    pub reference: Option<&'a [f64]>,
}

impl<'a> RunOptions<'a> {
    pub fn budget(budget: u64) -> Self {
        Self { budget, tolerance: None, reference: None }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn with_reference(mut self, reference: &'a [f64]) -> Self {
        self.reference = Some(reference);
        self
    }
}

#[derive(Debug, Clone)]
pub struct RunReport<S> {
    pub state: S,
    pub stopped_early: bool,
}

pub fn drive<T, R>(
    solver: &T,
    opts: &RunOptions<'_>,
    rng: &mut R,
    mut recorder: Option<&mut Recorder>,
) -> Result<RunReport<T::State>>
where
    T: Stepper,
    R: Rng + ?Sized,
{
    if opts.budget == 0 {
        return Err(Error::Config("budget must be >= 1".into()));
    }
    let mut state = solver.init_state();

    let metric = |state: &T::State| match opts.reference {
        Some(reference) => dist_sq(&solver.estimate(state), reference),
        None => {
            let r = solver.residual_norm(state);
            r * r
        }
    };
    let record = |state: &T::State, recorder: &mut Option<&mut Recorder>| {
        if let Some(rec) = recorder.as_deref_mut() {
            rec.push(Sample {
                iter: solver.iteration(state),
                error_sq: metric(state),
                flops: solver.flops(state),
            });
        }
    };

    record(&state, &mut recorder);
    let interval = solver.check_interval().max(1);
    let mut stopped_early = false;
    for t in 1..=opts.budget {
        solver.step(&mut state, rng)?;
        if recorder.as_ref().is_some_and(|r| r.is_due(t)) {
            record(&state, &mut recorder);
        }
        if let Some(tol) = opts.tolerance {
            if t % interval == 0 && t < opts.budget && solver.residual_norm(&state) <= tol {
                stopped_early = true;
                break;
            }
        }
    }
    record(&state, &mut recorder);
    Ok(RunReport { state, stopped_early })
}
