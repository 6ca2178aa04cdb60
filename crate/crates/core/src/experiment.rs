//! Monte-Carlo trial runner, trajectory summaries and CSV/JSON output.
//!
//! Trials run in parallel on the rayon pool (size it with
//! `RAYON_NUM_THREADS`). Trial `i` always draws from stream `i` of the
//! master seed and results are collected in trial order, so the output does
//! not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::dense::norm_sq;
use crate::driver::{Recorder, RunOptions, Sample};
use crate::error::{Error, Result};
use crate::factored::{run_interlaced, theorem_bound, BoundVariant, FactoredSystem, Pair, TheoremInputs};
use crate::oracle::{pinv_solve, FactoredOracle};
use crate::sampling::trial_rng;
use crate::solvers::{run, LinearSystem, Method};
use crate::systems::{materialize, Scenario};
use crate::textio::format_value;

pub const DEFAULT_TRIALS: usize = 40;
pub const DEFAULT_BUDGET: u64 = 70_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodTag {
    Plain(Method),
    Interlaced(Pair),
}

impl MethodTag {
    pub const ALL: [MethodTag; 8] = [
        MethodTag::Plain(Method::Rk),
        MethodTag::Plain(Method::Rek),
        MethodTag::Plain(Method::Rgs),
        MethodTag::Plain(Method::Regs),
        MethodTag::Interlaced(Pair::RK_RK),
        MethodTag::Interlaced(Pair::REK_RK),
        MethodTag::Interlaced(Pair::REK_REK),
        MethodTag::Interlaced(Pair::RGS_RGS),
    ];

    /// The Theorem-style bound that applies to this method, if any.
    pub fn bound_variant(self) -> Option<BoundVariant> {
        match self {
            MethodTag::Interlaced(Pair::RK_RK) => Some(BoundVariant::A),
            MethodTag::Interlaced(Pair::REK_RK) => Some(BoundVariant::B),
            _ => None,
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodTag::Plain(m) => m.fmt(f),
            MethodTag::Interlaced(p) => p.fmt(f),
        }
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let want = s.to_ascii_lowercase();
        Self::ALL.into_iter().find(|t| t.to_string() == want).ok_or_else(|| {
            let valid: Vec<String> = Self::ALL.iter().map(|t| t.to_string()).collect();
            Error::Config(format!("unknown method {s:?}; valid methods: {}", valid.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: MethodTag,
    pub trials: usize,
    pub budget: u64,
    pub stride: u64,
    pub seed: u64,
    pub tolerance: Option<f64>,
}

impl RunConfig {
    /// Config with the default stride of `budget / 500` (at least 1).
    pub fn new(method: MethodTag, trials: usize, budget: u64, seed: u64) -> Self {
        Self { method, trials, budget, stride: default_stride(budget), seed, tolerance: None }
    }

    pub fn with_stride(mut self, stride: u64) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_tolerance(mut self, tol: Option<f64>) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be >= 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Config(format!("tolerance must be finite and >= 0, got {t}")));
            }
        }
        Ok(())
    }
}

pub fn default_stride(budget: u64) -> u64 {
    (budget / 500).max(1)
}

#[derive(Debug, Clone, Copy)]
pub enum SystemInput<'a> {
    Factored(&'a FactoredSystem),
    Plain(&'a LinearSystem),
}

impl SystemInput<'_> {
    pub fn kind(&self) -> &'static str {
        match self {
            SystemInput::Factored(_) => "factored",
            SystemInput::Plain(_) => "plain",
        }
    }

    pub fn scenario(&self) -> Scenario {
        match self {
            SystemInput::Factored(s) => s.scenario(),
            SystemInput::Plain(_) => Scenario::Custom,
        }
    }

    /// `(m, n, k)`; `k` is absent for plain systems.
    pub fn dims(&self) -> (usize, usize, Option<usize>) {
        match self {
            SystemInput::Factored(s) => (s.m(), s.n(), Some(s.k())),
            SystemInput::Plain(s) => (s.rows(), s.cols(), None),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub trial: usize,
    pub method: MethodTag,
    pub scenario: Scenario,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub iter: u64,
    pub mean_error_sq: f64,
    /// Sample standard deviation across trials (zero for a single trial).
    pub std_error_sq: f64,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub trajectories: Vec<Trajectory>,
    pub summary: Vec<SummaryRow>,
    pub beta_star: Vec<f64>,
    /// Oracle constants, present for factored systems.
    pub oracle: Option<FactoredOracle>,
}

impl ExperimentResult {
    pub fn beta_star_sq(&self) -> f64 {
        norm_sq(&self.beta_star)
    }

    /// Final mean error divided by `||beta*||^2`.
    pub fn final_relative_error(&self) -> f64 {
        let last = self.summary.last().map_or(f64::NAN, |r| r.mean_error_sq);
        last / self.beta_star_sq().max(f64::MIN_POSITIVE)
    }
}

/// Runs `config.trials` independent trials and summarizes them.
///
/// Plain methods on a factored system run on the materialized product; that
/// path exists for baselines only. Interlaced methods on a plain system are
/// rejected.
pub fn run_experiment(config: &RunConfig, input: SystemInput<'_>) -> Result<ExperimentResult> {
    config.validate()?;
    let scenario = input.scenario();

    let (oracle, materialized) = match input {
        SystemInput::Factored(sys) => {
            let oracle = FactoredOracle::analyze(sys)?;
            let plain = match config.method {
                MethodTag::Plain(_) => Some(materialize(sys)?),
                MethodTag::Interlaced(_) => None,
            };
            (Some(oracle), plain)
        }
        SystemInput::Plain(_) => (None, None),
    };

    let beta_star = match (&oracle, input) {
        (Some(o), _) => o.beta_star.clone(),
        (None, SystemInput::Plain(sys)) => pinv_solve(sys.matrix(), sys.rhs())?,
        (None, SystemInput::Factored(_)) => unreachable!("factored input always has an oracle"),
    };

    let trajectories: Vec<Trajectory> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(config.seed, trial as u64);
            let mut rec = Recorder::new(config.stride)?;
            let mut opts = RunOptions::budget(config.budget).with_reference(&beta_star);
            opts.tolerance = config.tolerance;
            match (config.method, input) {
                (MethodTag::Interlaced(pair), SystemInput::Factored(sys)) => {
                    run_interlaced(pair, sys, &opts, &mut rng, Some(&mut rec))?;
                }
                (MethodTag::Interlaced(_), SystemInput::Plain(_)) => {
                    return Err(Error::Incompatible {
                        method: config.method.to_string(),
                        system: input.kind().into(),
                    });
                }
                (MethodTag::Plain(method), SystemInput::Plain(sys)) => {
                    run(method, sys, &opts, &mut rng, Some(&mut rec))?;
                }
                (MethodTag::Plain(method), SystemInput::Factored(_)) => {
                    let sys = materialized.as_ref().expect("materialized above");
                    run(method, sys, &opts, &mut rng, Some(&mut rec))?;
                }
            }
            Ok(Trajectory { trial, method: config.method, scenario, samples: rec.into_samples() })
        })
        .collect::<Result<_>>()?;

    let bound = match (config.method.bound_variant(), &oracle) {
        (Some(variant), Some(o)) => Some((variant, o.theorem_inputs())),
        _ => None,
    };
    let summary = summarize(&trajectories, bound.as_ref().map(|(v, q)| (*v, q)));
    Ok(ExperimentResult { trajectories, summary, beta_star, oracle })
}

/// Mean and sample standard deviation of `error_sq` at every recorded
/// iteration, over the trajectories that reached it.
pub fn summarize(
    trajectories: &[Trajectory],
    bound: Option<(BoundVariant, &TheoremInputs)>,
) -> Vec<SummaryRow> {
    let mut by_iter: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for tr in trajectories {
        for s in &tr.samples {
            by_iter.entry(s.iter).or_default().push(s.error_sq);
        }
    }
    by_iter
        .into_iter()
        .map(|(iter, errs)| {
            let n = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / n;
            let std = if errs.len() > 1 {
                (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                iter,
                mean_error_sq: mean,
                std_error_sq: std,
                bound: bound.map(|(v, q)| theorem_bound(v, iter, q)),
            }
        })
        .collect()
}

/// `traj.csv` -> `traj_summary.csv` in the same directory.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectories");
    path.with_file_name(format!("{stem}_summary.csv"))
}

/// `traj.csv` -> `traj.manifest.jsonl` in the same directory.
pub fn manifest_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectories");
    path.with_file_name(format!("{stem}.manifest.jsonl"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn trajectories_csv(trajectories: &[Trajectory]) -> String {
    let mut out = String::from("trial,iter,error_sq,flops\n");
    let mut sorted: Vec<&Trajectory> = trajectories.iter().collect();
    sorted.sort_by_key(|t| t.trial);
    for tr in sorted {
        for s in &tr.samples {
            out.push_str(&format!("{},{},{},{}\n", tr.trial, s.iter, format_value(s.error_sq), s.flops));
        }
    }
    out
}

pub fn summary_csv(summary: &[SummaryRow]) -> String {
    let mut out = String::from("iter,mean_error_sq,std_error_sq,bound\n");
    for r in summary {
        let bound = r.bound.map(format_value).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.iter,
            format_value(r.mean_error_sq),
            format_value(r.std_error_sq),
            bound
        ));
    }
    out
}

/// Writes the trajectory CSV to `path` and the summary next to it. Returns
/// the summary path.
pub fn emit_csv(trajectories: &[Trajectory], summary: &[SummaryRow], path: &Path) -> Result<PathBuf> {
    if trajectories.is_empty() {
        return Err(Error::Config("no trajectories to write".into()));
    }
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let mut w = create(path)?;
    w.write_all(trajectories_csv(trajectories).as_bytes()).map_err(io)?;
    w.flush().map_err(io)?;

    let spath = summary_path(path);
    let io = |source| Error::Io { path: spath.clone(), source };
    let mut w = create(&spath)?;
    w.write_all(summary_csv(summary).as_bytes()).map_err(io)?;
    w.flush().map_err(io)?;
    Ok(spath)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleConstants {
    pub alpha_u: f64,
    pub alpha_v: f64,
    pub kappa_sq_u: f64,
    pub theta_v: f64,
}

/// One line of the run manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestRecord {
    pub scenario: String,
    pub m: usize,
    pub n: usize,
    pub k: Option<usize>,
    pub seed: u64,
    pub method: String,
    pub budget: u64,
    pub trials: usize,
    pub stride: u64,
    pub final_mean_error_sq: f64,
    pub beta_star_sq: f64,
    pub oracle: Option<OracleConstants>,
}

impl ManifestRecord {
    pub fn new(config: &RunConfig, input: SystemInput<'_>, result: &ExperimentResult) -> Self {
        let (m, n, k) = input.dims();
        Self {
            scenario: input.scenario().to_string(),
            m,
            n,
            k,
            seed: config.seed,
            method: config.method.to_string(),
            budget: config.budget,
            trials: config.trials,
            stride: config.stride,
            final_mean_error_sq: result.summary.last().map_or(f64::NAN, |r| r.mean_error_sq),
            beta_star_sq: result.beta_star_sq(),
            oracle: result.oracle.as_ref().map(|o| OracleConstants {
                alpha_u: o.u.alpha,
                alpha_v: o.v.alpha,
                kappa_sq_u: o.u.kappa_sq,
                theta_v: o.v.theta,
            }),
        }
    }
}

/// Appends one JSON line to `path`.
pub fn append_manifest(path: &Path, record: &ManifestRecord) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    let mut line = serde_json::to_string(record)?;
    line.push('\n');
    f.write_all(line.as_bytes()).map_err(io)
}
