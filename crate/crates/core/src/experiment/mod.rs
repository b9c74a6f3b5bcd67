//! Config-driven experiments: single runs, `h` sweeps and theory checks,
//! with CSV output.
//!
//! # Config format
//!
//! Flat `key = value` lines grouped under `[experiment]`, `[problem]` and
//! one `[solver.NAME]` section per solver (TOML syntax). Unknown keys and
//! keys that do not apply to the chosen problem or algorithm are errors.
//!
//! `[experiment]`: `name`, `seed` (default 0), `grid` (list of
//! `[h, steps]`), exactly one of `x0` (list), `x0_normal = true` or
//! `x0_warm_level` (matrix factorization only), `gaps`, `timing`, `guard`,
//! `checks`, `check_solvers`, `fd_samples` (20), `ratio_trials` (200),
//! `g2`, `inject_power`.
//!
//! `[problem]`: `kind` is one of `toy`, `linreg_static`, `linreg_drift`,
//! `robust_gm`, `robust_welsch`, `mf_file`, `mf_synth`. Matrix
//! factorization adds `latent_dim` (20), `lambda` (0.01), `reveal_per_step`
//! (5), `initial_revealed` (100000), `regularizer` (`per_rating` or
//! `global`), `min_user_ratings`, `min_item_ratings`, `warm_step` (10),
//! `warm_scale` (1), `warm_max_iterations`; `mf_synth` also takes
//! `synth_users` (80), `synth_items` (70), `synth_ratings` (40000),
//! `synth_latent_dim` (5), `synth_noise_sd` (0.3) and `data_seed`.
//!
//! `[solver.NAME]`: `algorithm` (`tvgd`, `ufopc`, `foa_min`, `cp`),
//! `corrections`, `beta`; U-FOPC adds `prediction_steps`, `alpha`, `gamma`;
//! FOA-Min and CP add `zeta`, `delta` and `g` (`plain` or `extrapolated`).
//!
//! # Output files
//!
//! `run` writes `NAME.csv` per solver (`NAME_hH.csv` when the grid has
//! several entries) with columns
//! `k,t,f_pred,grad_norm,gap,pred_seconds,corr_seconds,diverged`.
//! `sweep` writes `sweep.csv` (`h,solver,max_grad,mean_grad,max_gap,mean_gap`)
//! and `slopes.csv` (`solver,statistic,slope,intercept,max_abs_residual`).
//! `check` writes `checks.csv` (`check,target,h,value,lower,upper,passed,note`).

mod config;
mod execute;
mod output;
mod presets;
mod setup;

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::par::{self, Execution};
use crate::problem::ProblemError;
use crate::problems::DataError;
use crate::solvers::SolverError;

pub use config::{CheckKind, ExperimentConfig, InitialPoint, MfSettings, NamedSolver, ProblemKind, ProblemSpec};
pub use execute::{
    for_each_run, injected_trace, prediction_gap_band, run_all, run_checks, sweep, CheckRow, RunKey, SlopeRow,
    SweepResult, SweepRow, SWEEP_STATISTICS,
};
pub use output::{float, write_atomic, CHECKS_HEADER, SLOPES_HEADER, SWEEP_HEADER, TRACE_HEADER};
pub use presets::{preset, preset_names, Preset};
pub use setup::{Instance, Setup};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Outcome of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Success,
    Diverged,
    CheckFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Diverged => 2,
            Status::CheckFailed => 3,
        }
    }
}

/// Exit code for errors: usage and configuration problems alike.
pub const ERROR_EXIT_CODE: i32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Run,
    Sweep,
    Check,
}

#[derive(Clone, Debug)]
pub struct CommandOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    /// Worker threads for concurrent runs; 0 uses every core.
    pub jobs: usize,
    pub allow_divergence: bool,
    pub ratings: Option<PathBuf>,
    pub execution: Execution,
}

impl Default for CommandOptions {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            seed: None,
            jobs: 0,
            allow_divergence: false,
            ratings: None,
            execution: Execution::Parallel,
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"))
}

/// Runs `command` for one config, writing CSVs under `options.out` and a
/// human-readable summary to `report`.
pub fn execute(
    command: Command,
    mut config: ExperimentConfig,
    options: &CommandOptions,
    report: &mut dyn Write,
) -> Result<Status, ExperimentError> {
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    let setup = Setup::new(config, options.ratings.as_deref())?;
    let text = par::with_jobs(options.jobs, || match command {
        Command::Run => command_run(&setup, options),
        Command::Sweep => command_sweep(&setup, options),
        Command::Check => command_check(&setup, options),
    })?;
    let (status, text) = text;
    report.write_all(text.as_bytes()).map_err(|source| ExperimentError::Io {
        path: PathBuf::from("<report>"),
        source,
    })?;
    Ok(status)
}

fn trace_file(out: &Path, solver: &str, h: f64, several: bool) -> PathBuf {
    if several {
        out.join(format!("{solver}_h{h}.csv"))
    } else {
        out.join(format!("{solver}.csv"))
    }
}

fn command_run(setup: &Setup, options: &CommandOptions) -> Result<(Status, String), ExperimentError> {
    let instances = setup.instances()?;
    let solvers: Vec<&NamedSolver> = setup.config.solvers.iter().collect();
    if solvers.is_empty() {
        return Err(ExperimentError::Config("`run` needs at least one [solver.NAME] section".into()));
    }
    let several = instances.len() > 1;
    let lines = for_each_run(setup, &instances, &solvers, options.execution, |key, trace| {
        let path = trace_file(&options.out, &key.solver, key.h, several);
        output::write_atomic(&path, |w| output::write_trace(w, &trace))?;
        let last = trace.records.last();
        let summary = match &trace.divergence {
            Some(d) => format!("{} h={} diverged: {d}", key.solver, key.h),
            None => format!(
                "{} h={} steps={} final grad_norm={} gap={}",
                key.solver,
                key.h,
                trace.len(),
                opt(last.map(|r| r.grad_norm)),
                opt(last.and_then(|r| r.gap)),
            ),
        };
        Ok((trace.diverged(), format!("{summary} -> {}\n", path.display())))
    })?;
    let diverged = lines.iter().any(|(d, _)| *d);
    let text: String = lines.into_iter().map(|(_, l)| l).collect();
    let status = if diverged && !options.allow_divergence { Status::Diverged } else { Status::Success };
    Ok((status, text))
}

fn command_sweep(setup: &Setup, options: &CommandOptions) -> Result<(Status, String), ExperimentError> {
    let result = sweep(setup, options.execution)?;
    output::write_atomic(&options.out.join("sweep.csv"), |w| output::write_sweep(w, &result.rows))?;
    output::write_atomic(&options.out.join("slopes.csv"), |w| output::write_slopes(w, &result.slopes))?;

    let mut text = String::new();
    let _ = writeln!(text, "{:<16} {:>12} {:>12} {:>12} {:>12} {:>12}", "solver", "h", "max_grad", "mean_grad", "max_gap", "mean_gap");
    for row in &result.rows {
        match (row.stats, row.diverged_at) {
            (Some(s), _) => {
                let _ = writeln!(
                    text,
                    "{:<16} {:>12.4e} {:>12.4e} {:>12.4e} {:>12} {:>12}",
                    row.solver,
                    row.h,
                    s.max_grad,
                    s.mean_grad,
                    opt(s.max_gap),
                    opt(s.mean_gap)
                );
            }
            (None, k) => {
                let _ = writeln!(text, "{:<16} {:>12.4e} diverged at k = {}", row.solver, row.h, k.unwrap_or(0));
            }
        }
    }
    let _ = writeln!(text, "\nfitted order p in stat ~ h^p");
    let _ = writeln!(text, "{:<16} {:>10} {:>10} {:>10} {:>10}", "solver", "max_grad", "mean_grad", "max_gap", "mean_gap");
    let mut names: Vec<&str> = Vec::new();
    for row in &result.rows {
        if !names.contains(&row.solver.as_str()) {
            names.push(&row.solver);
        }
    }
    for name in names {
        let cells: Vec<String> = SWEEP_STATISTICS
            .iter()
            .map(|stat| result.slope(name, stat).map_or_else(|| "n/a".to_string(), |p| format!("{p:.3}")))
            .collect();
        let _ = writeln!(text, "{:<16} {:>10} {:>10} {:>10} {:>10}", name, cells[0], cells[1], cells[2], cells[3]);
    }
    let status = if result.diverged() && !options.allow_divergence { Status::Diverged } else { Status::Success };
    Ok((status, text))
}

fn command_check(setup: &Setup, options: &CommandOptions) -> Result<(Status, String), ExperimentError> {
    let rows = run_checks(setup, options.execution)?;
    output::write_atomic(&options.out.join("checks.csv"), |w| output::write_checks(w, &rows))?;
    let mut text = String::new();
    let _ = writeln!(text, "{:<18} {:<28} {:>10} {:>12} {:>24}  result", "check", "target", "h", "value", "bound");
    for r in &rows {
        let bound = match (r.lower, r.upper) {
            (Some(lo), Some(hi)) => format!("[{lo:.3}, {hi:.3}]"),
            (None, Some(hi)) => format!("<= {hi:.3e}"),
            _ => "-".to_string(),
        };
        let _ = writeln!(
            text,
            "{:<18} {:<28} {:>10} {:>12.4e} {:>24}  {}{}",
            r.check.label(),
            r.target,
            r.h.map_or_else(|| "-".to_string(), |h| format!("{h}")),
            r.value,
            bound,
            if r.passed { "PASS" } else { "FAIL" },
            if r.note.is_empty() { String::new() } else { format!("  ({})", r.note) },
        );
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    let _ = writeln!(text, "{} checks, {} failed", rows.len(), failed);
    Ok((if failed > 0 { Status::CheckFailed } else { Status::Success }, text))
}
