//! The `ikz` command line: `gen`, `solve`, `bound`, `version`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::{
    append_manifest, default_stride, emit_csv, manifest_path, run_experiment, ManifestRecord, MethodTag,
    RunConfig, SystemInput, DEFAULT_BUDGET, DEFAULT_TRIALS,
};
use crate::factored::{theorem_bound, BoundVariant, FactoredSystem};
use crate::oracle::FactoredOracle;
use crate::sampling::generation_rng;
use crate::solvers::LinearSystem;
use crate::systems::{generate, load_factored_dir, save_factored, Scenario, ScenarioSpec};
use crate::textio::{format_value, read_matrix, read_vector};

#[derive(Debug, Parser)]
#[command(name = "ikz", about = "Randomized Kaczmarz solvers for factored linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a Gaussian factored system.
    Gen {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run Monte-Carlo trials and write trajectory CSVs.
    Solve {
        #[arg(long)]
        method: MethodTag,
        /// Directory with U.mat, V.mat, y.vec (factored) or A.mat, y.vec (plain).
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Sampling interval; defaults to budget / 500.
        #[arg(long)]
        stride: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Residual tolerance for early stopping.
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print rate constants and the expected-error bound curve.
    Bound {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        variant: BoundVariant,
        #[arg(long)]
        tmax: u64,
        /// Spacing of the printed t values; defaults to tmax / 500.
        #[arg(long)]
        step: Option<u64>,
    },
    /// Print the version.
    Version,
}

#[derive(Debug, Serialize)]
struct GenManifest {
    scenario: Scenario,
    m: usize,
    n: usize,
    k: usize,
    seed: u64,
    residual_ratio: f64,
}

/// Runs the CLI and returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    match execute(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cmd: Command, out: &mut impl Write) -> Result<()> {
    let io = |source| Error::Io { path: PathBuf::from("<stdout>"), source };
    match cmd {
        Command::Gen { scenario, m, n, k, seed, out_dir } => {
            let spec = ScenarioSpec::new(scenario, m, n, k, seed)?;
            let g = generate(&spec, &mut generation_rng(seed))?;
            save_factored(&out_dir, &g.system)?;
            let manifest = GenManifest { scenario, m, n, k, seed, residual_ratio: g.residual_ratio };
            let path = out_dir.join("manifest.json");
            std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
                .map_err(|source| Error::Io { path: path.clone(), source })?;
            writeln!(out, "wrote {}", out_dir.display()).map_err(io)?;
        }
        Command::Solve { method, dir, trials, budget, stride, seed, tolerance, out: path } => {
            let config = RunConfig::new(method, trials, budget, seed)
                .with_stride(stride.unwrap_or_else(|| default_stride(budget)))
                .with_tolerance(tolerance);
            let loaded = load_dir(&dir)?;
            let input = loaded.input();
            let result = run_experiment(&config, input)?;
            let summary = emit_csv(&result.trajectories, &result.summary, &path)?;
            append_manifest(&manifest_path(&path), &ManifestRecord::new(&config, input, &result))?;
            writeln!(
                out,
                "{method}: {} trials, final mean relative error {}\nwrote {} and {}",
                trials,
                format_value(result.final_relative_error()),
                path.display(),
                summary.display()
            )
            .map_err(io)?;
        }
        Command::Bound { dir, variant, tmax, step } => {
            let sys = match load_dir(&dir)? {
                Loaded::Factored(s) => s,
                Loaded::Plain(_) => {
                    return Err(Error::Incompatible { method: "bound".into(), system: "plain".into() })
                }
            };
            let oracle = FactoredOracle::analyze(&sys)?;
            let q = oracle.theorem_inputs();
            for (key, val) in [
                ("alpha_u", q.alpha_u),
                ("alpha_v", q.alpha_v),
                ("theta_v", q.theta_v),
                ("kappa_sq_u", q.kappa_sq_u),
                ("kappa_sq_v", oracle.v.kappa_sq),
                ("kappa_sq_x", oracle.x.kappa_sq),
                ("alpha_x", oracle.x.alpha),
                ("b_star_sq", q.b_star_sq),
                ("x_star_sq", q.x_star_sq),
            ] {
                writeln!(out, "# {key}={}", format_value(val)).map_err(io)?;
            }
            writeln!(out, "t,bound").map_err(io)?;
            let step = step.unwrap_or_else(|| default_stride(tmax)).max(1);
            let mut t = 0;
            loop {
                writeln!(out, "{t},{}", format_value(theorem_bound(variant, t, &q))).map_err(io)?;
                if t == tmax {
                    break;
                }
                t = (t + step).min(tmax);
            }
        }
        Command::Version => {
            writeln!(out, "ikz {}", env!("CARGO_PKG_VERSION")).map_err(io)?;
        }
    }
    Ok(())
}

enum Loaded {
    Factored(FactoredSystem),
    Plain(LinearSystem),
}

impl Loaded {
    fn input(&self) -> SystemInput<'_> {
        match self {
            Loaded::Factored(s) => SystemInput::Factored(s),
            Loaded::Plain(s) => SystemInput::Plain(s),
        }
    }
}

/// Factored if `U.mat` exists, plain if `A.mat` does. A `manifest.json`
/// written by `gen` restores the scenario tag.
fn load_dir(dir: &Path) -> Result<Loaded> {
    if dir.join("U.mat").exists() {
        let sys = load_factored_dir(dir)?;
        let scenario = read_scenario(&dir.join("manifest.json")).unwrap_or(Scenario::Custom);
        Ok(Loaded::Factored(sys.with_scenario(scenario)))
    } else if dir.join("A.mat").exists() {
        let a = read_matrix(&dir.join("A.mat"))?;
        let y = read_vector(&dir.join("y.vec"))?;
        Ok(Loaded::Plain(LinearSystem::new(a, y)?))
    } else {
        Err(Error::Config(format!("{} holds neither U.mat nor A.mat", dir.display())))
    }
}

fn read_scenario(path: &Path) -> Option<Scenario> {
    let text = std::fs::read_to_string(path).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    value.get("scenario")?.as_str()?.parse().ok()
}
