use crate::analysis::{
    check_lipschitz_optimum, check_post_convergence, check_prediction_gap, check_tvgd_pl_envelope, fit_order,
    ratio_bound_selftest, tail_stats, AnalysisError, OrderFit, StationarityBound, TailStats,
    BOUND_TOLERANCE,
};
use crate::par::Execution;
use crate::problem::{
    finite_difference_check, Oracle, ProblemConstants, GRAD_TOLERANCE, HESS_TOLERANCE, SYMMETRY_TOLERANCE,
};
use crate::problems::{make_linreg, LinRegVariant};
use crate::solvers::{run, Algorithm, RunOptions, StepRecord, SolverError, Trace};

use super::config::{CheckKind, NamedSolver, ProblemKind};
use super::setup::{Instance, Setup};
use super::ExperimentError;

/// Identifies one `(solver, grid entry)` run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunKey {
    pub solver: String,
    pub grid_index: usize,
    pub h: f64,
}

fn solver_error(name: &str, e: SolverError) -> ExperimentError {
    match e {
        SolverError::InvalidConfig(_) | SolverError::MissingOracle { .. } | SolverError::DimensionMismatch { .. } => {
            ExperimentError::Config(format!("solver `{name}`: {e}"))
        }
        other => ExperimentError::Solver(other),
    }
}

/// Runs every `(solver, grid entry)` pair, solver-major, and hands each
/// trace to `consume` as soon as it is finished. Results keep task order.
pub fn for_each_run<R, F>(
    setup: &Setup,
    instances: &[Instance],
    solvers: &[&NamedSolver],
    execution: Execution,
    consume: F,
) -> Result<Vec<R>, ExperimentError>
where
    R: Send,
    F: Fn(&RunKey, Trace) -> Result<R, ExperimentError> + Sync + Send,
{
    let config = &setup.config;
    let tasks: Vec<(&NamedSolver, usize)> = solvers
        .iter()
        .flat_map(|s| (0..instances.len()).map(move |i| (*s, i)))
        .collect();
    let results = execution.map(&tasks, |&(solver, i)| {
        let inst = &instances[i];
        let options = RunOptions {
            compute_gaps: config.gaps.unwrap_or_else(|| inst.problem.supports(Oracle::Optimum)),
            record_iterates: false,
            record_timing: config.timing,
            guard: config.guard,
        };
        let trace = run(&*inst.problem, &solver.config, &inst.grid, &inst.x0, &options)
            .map_err(|e| solver_error(&solver.name, e))?;
        let key = RunKey {
            solver: solver.name.clone(),
            grid_index: i,
            h: inst.grid.h(),
        };
        consume(&key, trace)
    });
    results.into_iter().collect()
}

/// Every configured solver on every grid entry, traces kept in memory.
pub fn run_all(setup: &Setup, execution: Execution) -> Result<Vec<(RunKey, Trace)>, ExperimentError> {
    let instances = setup.instances()?;
    let solvers: Vec<&NamedSolver> = setup.config.solvers.iter().collect();
    for_each_run(setup, &instances, &solvers, execution, |key, trace| Ok((key.clone(), trace)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub solver: String,
    pub h: f64,
    pub steps: usize,
    /// `None` when the run diverged.
    pub stats: Option<TailStats>,
    pub diverged_at: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeRow {
    pub solver: String,
    pub statistic: &'static str,
    pub fit: OrderFit,
}

/// Tail statistics per `(h, solver)` and the fitted order of each
/// statistic in `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub slopes: Vec<SlopeRow>,
    /// `(solver, statistic, reason)` for fits that could not be made.
    pub skipped: Vec<(String, &'static str, String)>,
}

impl SweepResult {
    pub fn slope(&self, solver: &str, statistic: &str) -> Option<f64> {
        self.slopes
            .iter()
            .find(|s| s.solver == solver && s.statistic == statistic)
            .map(|s| s.fit.slope)
    }

    pub fn diverged(&self) -> bool {
        self.rows.iter().any(|r| r.diverged_at.is_some())
    }
}

pub const SWEEP_STATISTICS: [&str; 4] = ["max_grad", "mean_grad", "max_gap", "mean_gap"];

fn statistic(stats: &TailStats, name: &str) -> Option<f64> {
    match name {
        "max_grad" => Some(stats.max_grad),
        "mean_grad" => Some(stats.mean_grad),
        "max_gap" => stats.max_gap,
        "mean_gap" => stats.mean_gap,
        _ => None,
    }
}

/// Trace with `grad = gap = h^power` at every step, for checking the sweep
/// plumbing without running a solver.
pub fn injected_trace(h: f64, steps: usize, power: f64) -> Trace {
    let value = h.powf(power);
    let records = (0..steps)
        .map(|k| StepRecord {
            k,
            t: k as f64 * h,
            f_pred: value,
            f_corr: value,
            grad_norm: value,
            gap: Some(value),
            pred_seconds: 0.0,
            corr_seconds: 0.0,
        })
        .collect();
    Trace {
        algorithm: Algorithm::Tvgd,
        h,
        records,
        predicted: Vec::new(),
        corrected: Vec::new(),
        divergence: None,
    }
}

fn sweep_row(key: &RunKey, steps: usize, trace: &Trace) -> Result<SweepRow, ExperimentError> {
    let (stats, diverged_at) = match tail_stats(trace) {
        Ok(s) => (Some(s), None),
        Err(AnalysisError::Diverged(k)) => (None, Some(k)),
        Err(e) => return Err(e.into()),
    };
    Ok(SweepRow {
        solver: key.solver.clone(),
        h: key.h,
        steps,
        stats,
        diverged_at,
    })
}

pub fn sweep(setup: &Setup, execution: Execution) -> Result<SweepResult, ExperimentError> {
    let config = &setup.config;
    let rows: Vec<SweepRow> = if let Some(power) = config.inject_power {
        config
            .grid
            .iter()
            .enumerate()
            .map(|(i, &(h, steps))| {
                let key = RunKey {
                    solver: "injected".into(),
                    grid_index: i,
                    h,
                };
                sweep_row(&key, steps, &injected_trace(h, steps, power))
            })
            .collect::<Result<_, _>>()?
    } else {
        let instances = setup.instances()?;
        let solvers: Vec<&NamedSolver> = config.solvers.iter().collect();
        for_each_run(setup, &instances, &solvers, execution, |key, trace| {
            sweep_row(key, instances[key.grid_index].grid.steps(), &trace)
        })?
    };

    let mut names: Vec<&str> = Vec::new();
    for row in &rows {
        if !names.contains(&row.solver.as_str()) {
            names.push(&row.solver);
        }
    }
    let mut slopes = Vec::new();
    let mut skipped = Vec::new();
    for name in names {
        let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.solver == name).collect();
        for stat in SWEEP_STATISTICS {
            if let Some(r) = mine.iter().find(|r| r.diverged_at.is_some()) {
                skipped.push((name.to_string(), stat, format!("diverged at h = {}", r.h)));
                continue;
            }
            let points: Option<Vec<(f64, f64)>> = mine
                .iter()
                .map(|r| r.stats.as_ref().and_then(|s| statistic(s, stat)).map(|v| (r.h, v)))
                .collect();
            let Some(points) = points else {
                skipped.push((name.to_string(), stat, "not recorded".into()));
                continue;
            };
            match fit_order(&points) {
                Ok(fit) => slopes.push(SlopeRow {
                    solver: name.to_string(),
                    statistic: stat,
                    fit,
                }),
                Err(e) => skipped.push((name.to_string(), stat, e.to_string())),
            }
        }
    }
    Ok(SweepResult { rows, slopes, skipped })
}

/// One line of a check report. `lower` / `upper` bound `value` when set.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub check: CheckKind,
    pub target: String,
    pub h: Option<f64>,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
    pub note: String,
}

impl CheckRow {
    fn upper(check: CheckKind, target: impl Into<String>, h: Option<f64>, value: f64, upper: f64, passed: bool) -> Self {
        Self {
            check,
            target: target.into(),
            h,
            value,
            lower: None,
            upper: Some(upper),
            passed,
            note: String::new(),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

/// Relative band `[lo, hi]` around the expected ratio `(h / h')^p` of the
/// largest per-step increases at two sampling periods: `p = 1` without a
/// prediction step, `p = 2` with one.
pub fn prediction_gap_band(algorithm: Algorithm) -> (f64, f64, f64) {
    match algorithm {
        Algorithm::Tvgd => (1.0, 0.8, 1.2),
        _ => (2.0, 0.75, 1.25),
    }
}

fn check_solvers<'a>(setup: &'a Setup, check: CheckKind, allowed: &[Algorithm]) -> Result<Vec<&'a NamedSolver>, ExperimentError> {
    let config = &setup.config;
    let listed: Vec<&NamedSolver> = match &config.check_solvers {
        Some(names) => config.solvers.iter().filter(|s| names.contains(&s.name)).collect(),
        None => config.solvers.iter().collect(),
    };
    let explicit = config.check_solvers.is_some();
    let mut chosen = Vec::new();
    for s in listed {
        if allowed.contains(&s.config.algorithm) {
            chosen.push(s);
        } else if explicit {
            return Err(ExperimentError::Config(format!(
                "check `{}` does not apply to solver `{}` ({})",
                check.label(),
                s.name,
                s.config.algorithm
            )));
        }
    }
    if chosen.is_empty() {
        let labels: Vec<_> = allowed.iter().map(|a| a.label()).collect();
        return Err(ExperimentError::Config(format!(
            "check `{}` needs a solver with algorithm {}",
            check.label(),
            labels.join(" or ")
        )));
    }
    Ok(chosen)
}

/// `G2` from the config, then the problem, then (for the static linear
/// regression only) from the largest loss seen along the trace.
fn resolve_g2(setup: &Setup, constants: &ProblemConstants, trace: Option<&Trace>, h: f64) -> Result<f64, ExperimentError> {
    if let Some(g2) = setup.config.g2.or(constants.g2) {
        return Ok(g2);
    }
    if setup.config.problem.kind == ProblemKind::LinregStatic {
        let max_value = trace.map_or(0.0, |t| {
            t.records
                .iter()
                .flat_map(|r| [r.f_pred, r.f_corr])
                .fold(0.0, f64::max)
        });
        if let Some(g2) = make_linreg(LinRegVariant::StaticA).static_g2(max_value, h) {
            return Ok(g2);
        }
    }
    Err(AnalysisError::MissingConstant("G2 (set `g2` in [experiment])").into())
}

fn diverged_row(check: CheckKind, key: &RunKey, trace: &Trace) -> Option<CheckRow> {
    trace.divergence.as_ref().map(|d| CheckRow {
        check,
        target: key.solver.clone(),
        h: Some(key.h),
        value: f64::NAN,
        lower: None,
        upper: None,
        passed: false,
        note: format!("run diverged: {d}"),
    })
}

/// Runs the configured checks. Trace-based checks share one run per
/// `(solver, grid entry)`.
pub fn run_checks(setup: &Setup, execution: Execution) -> Result<Vec<CheckRow>, ExperimentError> {
    let config = &setup.config;
    if config.checks.is_empty() {
        return Err(ExperimentError::Config("no checks requested; set `checks` in [experiment]".into()));
    }
    let instances = setup.instances()?;
    let first = &instances[0];

    // solvers needed by the trace-based checks, in config order
    let mut needed: Vec<&NamedSolver> = Vec::new();
    let mut per_check: Vec<(CheckKind, Vec<&NamedSolver>)> = Vec::new();
    for &check in &config.checks {
        let allowed: &[Algorithm] = match check {
            CheckKind::PlEnvelope => &[Algorithm::Tvgd],
            CheckKind::PostConvergence => &[Algorithm::Tvgd, Algorithm::FoaMin],
            CheckKind::PredictionGap => &[Algorithm::Tvgd, Algorithm::Ufopc, Algorithm::FoaMin, Algorithm::CauchyPoint],
            _ => continue,
        };
        if check == CheckKind::PredictionGap && instances.len() < 2 {
            return Err(ExperimentError::Config("check `prediction_gap` needs at least two grid entries".into()));
        }
        let solvers = check_solvers(setup, check, allowed)?;
        for s in &solvers {
            if !needed.iter().any(|n| n.name == s.name) {
                needed.push(s);
            }
        }
        per_check.push((check, solvers));
    }
    let ordered: Vec<&NamedSolver> = config
        .solvers
        .iter()
        .filter(|s| needed.iter().any(|n| n.name == s.name))
        .collect();
    let traces = for_each_run(setup, &instances, &ordered, execution, |key, trace| Ok((key.clone(), trace)))?;
    let trace_of = |name: &str, i: usize| {
        traces
            .iter()
            .find(|(k, _)| k.solver == name && k.grid_index == i)
            .expect("every needed run was made")
    };

    let mut rows = Vec::new();
    for &check in &config.checks {
        match check {
            CheckKind::Gradients => {
                let fd = finite_difference_check(&*first.problem, config.fd_samples, config.seed)?;
                let name = first.problem.name().to_string();
                let mut push = |oracle: &str, value: Option<f64>, tol: f64| {
                    if let Some(v) = value {
                        rows.push(CheckRow::upper(check, format!("{name}:{oracle}"), None, v, tol, v < tol));
                    }
                };
                push("grad_x", Some(fd.grad_x), GRAD_TOLERANCE);
                push("grad_t", fd.grad_t, GRAD_TOLERANCE);
                push("hess_xx", fd.hess_xx, HESS_TOLERANCE);
                push("hess_symmetry", fd.hess_asymmetry, SYMMETRY_TOLERANCE);
            }
            CheckKind::RatioBound => {
                let r = ratio_bound_selftest(config.ratio_trials, config.seed);
                rows.push(
                    CheckRow::upper(check, "random_instances", None, r.max_violation, BOUND_TOLERANCE, r.passed())
                        .with_note(format!("{} trials", r.trials)),
                );
            }
            CheckKind::LipschitzOptimum => {
                for inst in &instances {
                    let h = inst.grid.h();
                    let g2 = resolve_g2(setup, &inst.problem.constants(), None, h)?;
                    let r = check_lipschitz_optimum(&*inst.problem, &inst.grid, g2)?;
                    rows.push(
                        CheckRow::upper(check, inst.problem.name(), Some(h), r.worst, 0.0, r.passed)
                            .with_note(format!("G2 = {g2}; worst at k = {}", r.worst_k)),
                    );
                }
            }
            CheckKind::PlEnvelope | CheckKind::PostConvergence | CheckKind::PredictionGap => {}
        }
        let Some((_, solvers)) = per_check.iter().find(|(c, _)| *c == check) else {
            continue;
        };
        for solver in solvers {
            for (i, inst) in instances.iter().enumerate() {
                let (key, trace) = trace_of(&solver.name, i);
                let h = inst.grid.h();
                if check == CheckKind::PredictionGap {
                    if i + 1 == instances.len() {
                        break;
                    }
                    let (fine_key, fine) = trace_of(&solver.name, i + 1);
                    if let Some(row) = diverged_row(check, key, trace).or_else(|| diverged_row(check, fine_key, fine)) {
                        rows.push(row);
                        continue;
                    }
                    let report = check_prediction_gap(trace, fine)?;
                    let (order, lo, hi) = prediction_gap_band(solver.config.algorithm);
                    let expected = (h / fine_key.h).powf(order);
                    let (lower, upper) = (lo * expected, hi * expected);
                    rows.push(CheckRow {
                        check,
                        target: solver.name.clone(),
                        h: Some(h),
                        value: report.ratio,
                        lower: Some(lower),
                        upper: Some(upper),
                        passed: report.ratio >= lower && report.ratio <= upper,
                        note: format!(
                            "h' = {}; increases {:e} -> {:e}; expected ratio {expected}",
                            fine_key.h, report.coarse, report.fine
                        ),
                    });
                    continue;
                }
                if let Some(row) = diverged_row(check, key, trace) {
                    rows.push(row);
                    continue;
                }
                let mut constants = inst.problem.constants();
                let needs_g2 = check == CheckKind::PlEnvelope || solver.config.algorithm == Algorithm::Tvgd;
                if needs_g2 {
                    constants.g2 = Some(resolve_g2(setup, &constants, Some(trace), h)?);
                }
                let g2_note = constants.g2.map(|g| format!("G2 = {g}; ")).unwrap_or_default();
                if check == CheckKind::PlEnvelope {
                    let r = check_tvgd_pl_envelope(trace, &constants, &inst.grid)?;
                    let slack = BOUND_TOLERANCE * (1.0 + r.envelope_at_worst.abs());
                    rows.push(
                        CheckRow::upper(check, solver.name.clone(), Some(h), r.worst, slack, r.passed).with_note(format!(
                            "{g2_note}worst at k = {}; envelope limit {:e}",
                            r.worst_k, r.limit
                        )),
                    );
                } else {
                    let bound = match solver.config.algorithm {
                        Algorithm::Tvgd => StationarityBound::tvgd(&constants, h)?,
                        _ => StationarityBound::foa_min(&constants, solver.config.zeta, solver.config.delta, h)?,
                    };
                    let r = check_post_convergence(trace, &bound)?;
                    let note = match r.first_crossing {
                        Some(k) => format!(
                            "{g2_note}threshold {:e} first met at k = {k}; {} checked, {} stationary",
                            r.threshold, r.checked, r.stationary
                        ),
                        None => format!("{g2_note}not converged: threshold {:e} never met", r.threshold),
                    };
                    rows.push(
                        CheckRow::upper(check, solver.name.clone(), Some(h), r.violations.len() as f64, 0.0, r.passed())
                            .with_note(note),
                    );
                }
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ExperimentConfig;

    fn setup(text: &str) -> Setup {
        Setup::new(ExperimentConfig::parse(text).unwrap(), None).unwrap()
    }

    const TOY: &str = r#"
[experiment]
grid = [[0.1, 20], [0.05, 40], [0.025, 80]]
x0 = [8.0]

[problem]
kind = "toy"

[solver.gd]
algorithm = "tvgd"

[solver.foa]
algorithm = "foa_min"
zeta = 10.0
"#;

    #[test]
    fn run_all_is_solver_major_and_sequential_equals_parallel() {
        let s = setup(TOY);
        let seq = run_all(&s, Execution::Sequential).unwrap();
        let par = run_all(&s, Execution::Parallel).unwrap();
        let keys: Vec<_> = seq.iter().map(|(k, _)| (k.solver.as_str(), k.grid_index)).collect();
        assert_eq!(keys, [("gd", 0), ("gd", 1), ("gd", 2), ("foa", 0), ("foa", 1), ("foa", 2)]);
        assert_eq!(seq, par);
        assert!(seq.iter().all(|(_, t)| t.records.iter().all(|r| r.gap.is_some())));
    }

    #[test]
    fn injected_sweep_recovers_the_power() {
        let text = "[experiment]\ngrid = [[0.1, 10], [0.01, 10], [0.001, 10]]\nx0 = [0.0]\ninject_power = 2.0\n[problem]\nkind = \"toy\"\n";
        let result = sweep(&setup(text), Execution::Sequential).unwrap();
        assert_eq!(result.rows.len(), 3);
        for stat in SWEEP_STATISTICS {
            let slope = result.slope("injected", stat).unwrap();
            assert!((slope - 2.0).abs() < 1e-9, "{stat}: {slope}");
        }
        assert!(result.skipped.is_empty());
    }

    #[test]
    fn sweep_fits_every_statistic() {
        let result = sweep(&setup(TOY), Execution::Parallel).unwrap();
        assert_eq!(result.rows.len(), 6);
        assert_eq!(result.slopes.len(), 8, "{:?}", result.skipped);
        assert!(!result.diverged());
    }

    #[test]
    fn diverged_runs_are_reported_not_fitted() {
        let text = TOY.to_string() + "[solver.wild]\nalgorithm = \"ufopc\"\ngamma = 1.0\n";
        let result = sweep(&setup(&text), Execution::Sequential).unwrap();
        assert!(result.diverged());
        assert!(result.slope("wild", "max_grad").is_none());
        assert!(result.skipped.iter().any(|(s, _, why)| s == "wild" && why.contains("diverged")));
        let wild: Vec<_> = result.rows.iter().filter(|r| r.solver == "wild").collect();
        assert!(wild.iter().all(|r| r.stats.is_none() && r.diverged_at.is_some()));
    }

    #[test]
    fn checks_need_a_request_and_applicable_solvers() {
        assert!(matches!(run_checks(&setup(TOY), Execution::Sequential), Err(ExperimentError::Config(_))));
        let text = TOY.replace("x0 = [8.0]", "x0 = [8.0]\nchecks = [\"pl_envelope\"]\ncheck_solvers = [\"foa\"]");
        let err = run_checks(&setup(&text), Execution::Sequential).unwrap_err();
        assert!(err.to_string().contains("does not apply"), "{err}");
    }

    #[test]
    fn missing_g2_is_a_named_error() {
        let text = TOY.replace("x0 = [8.0]", "x0 = [8.0]\nchecks = [\"lipschitz_optimum\"]");
        let err = run_checks(&setup(&text), Execution::Sequential).unwrap_err();
        assert!(err.to_string().contains("G2"), "{err}");
    }

    #[test]
    fn toy_checks_pass() {
        let text = TOY.replace(
            "x0 = [8.0]",
            "x0 = [8.0]\nchecks = [\"gradients\", \"ratio_bound\", \"post_convergence\"]\ncheck_solvers = [\"foa\"]",
        );
        let rows = run_checks(&setup(&text), Execution::Sequential).unwrap();
        assert!(rows.iter().all(|r| r.passed), "{rows:#?}");
        assert_eq!(rows.iter().filter(|r| r.check == CheckKind::PostConvergence).count(), 3);
        assert!(rows.iter().any(|r| r.target == "toy:hess_xx"));
    }

    #[test]
    fn prediction_gap_rows_pair_adjacent_periods() {
        let text = TOY.replace("x0 = [8.0]", "x0 = [8.0]\nchecks = [\"prediction_gap\"]");
        let rows = run_checks(&setup(&text), Execution::Sequential).unwrap();
        assert_eq!(rows.len(), 4);
        let gd = &rows[0];
        assert_eq!((gd.target.as_str(), gd.h), ("gd", Some(0.1)));
        assert!((gd.lower.unwrap() - 1.6).abs() < 1e-12 && (gd.upper.unwrap() - 2.4).abs() < 1e-12);
        let foa = &rows[2];
        assert!((foa.lower.unwrap() - 3.0).abs() < 1e-12 && (foa.upper.unwrap() - 5.0).abs() < 1e-12);
    }
}
