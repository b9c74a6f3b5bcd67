use crate::problem::{Oracle, Problem, ProblemConstants, TimeGrid, Vector};
use crate::solvers::Trace;

use super::{within_tolerance, AnalysisError, BOUND_TOLERANCE};

fn require(value: Option<f64>, name: &'static str) -> Result<f64, AnalysisError> {
    value.ok_or(AnalysisError::MissingConstant(name))
}

fn gaps_of(trace: &Trace) -> Result<Vec<f64>, AnalysisError> {
    trace.gaps().ok_or(AnalysisError::MissingGaps)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzReport {
    /// `max_k |delta (f* - gauge)| - G2 h`; non-positive when the bound holds.
    pub worst: f64,
    pub worst_k: usize,
    pub passed: bool,
}

/// Checks that the gauged optimal value moves by at most `G2 h` between
/// adjacent grid times `t_0, ..., t_steps`. Numeric optima are chained, each
/// one started from the previous minimizer.
pub fn check_lipschitz_optimum<P: Problem + ?Sized>(
    problem: &P,
    grid: &TimeGrid,
    g2: f64,
) -> Result<LipschitzReport, AnalysisError> {
    if !problem.supports(Oracle::Optimum) {
        return Err(problem.unsupported(Oracle::Optimum).into());
    }
    let constants = problem.constants();
    let h = grid.h();
    let optimum_at = |t: f64, hint: &Vector| {
        problem
            .optimum(t, hint)
            .ok_or_else(|| AnalysisError::from(problem.unsupported(Oracle::Optimum)))
    };
    let mut prev = optimum_at(grid.time(0), &Vector::zeros(problem.dim()))?;
    let mut prev_value = prev.value - constants.gauge_at(grid.time(0));
    let mut report = LipschitzReport {
        worst: f64::NEG_INFINITY,
        worst_k: 0,
        passed: true,
    };
    for k in 1..=grid.steps() {
        let t = grid.time(k);
        let next = optimum_at(t, &prev.x)?;
        let value = next.value - constants.gauge_at(t);
        let change = (value - prev_value).abs();
        let violation = change - g2 * h;
        if violation > report.worst {
            report.worst = violation;
            report.worst_k = k;
        }
        report.passed &= within_tolerance(change, g2 * h);
        prev = next;
        prev_value = value;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeReport {
    /// `max_k (gap_k - envelope_k)`.
    pub worst: f64,
    pub worst_k: usize,
    /// Envelope at the worst step.
    pub envelope_at_worst: f64,
    /// `2 G2 h / (1 - rho)`, the envelope's limit.
    pub limit: f64,
    pub passed: bool,
}

/// Compares the gaps of a TVGD trace with the linear-rate envelope
/// `rho^k gap_0 + 2 (1 - rho^k) / (1 - rho) G2 h`, `rho = 1 - mu / L1`.
///
/// The envelope is derived for `beta = 1 / L1` and one correction; more
/// corrections only contract faster, so the bound still applies.
pub fn check_tvgd_pl_envelope(
    trace: &Trace,
    constants: &ProblemConstants,
    grid: &TimeGrid,
) -> Result<EnvelopeReport, AnalysisError> {
    let l1 = require(constants.l1, "L1")?;
    let mu = require(constants.mu, "mu")?;
    let g2 = require(constants.g2, "G2")?;
    if !(mu > 0.0 && mu <= l1) {
        return Err(AnalysisError::Hypothesis(format!("need 0 < mu <= L1, got mu = {mu}, L1 = {l1}")));
    }
    let gaps = gaps_of(trace)?;
    let Some(&gap0) = gaps.first() else {
        return Err(AnalysisError::TooShort(0, 1));
    };
    let h = grid.h();
    let rho = 1.0 - mu / l1;
    let one_minus_rho = mu / l1;
    let mut report = EnvelopeReport {
        worst: f64::NEG_INFINITY,
        worst_k: 0,
        envelope_at_worst: 0.0,
        limit: 2.0 * g2 * h / one_minus_rho,
        passed: true,
    };
    let mut rho_k = 1.0;
    for (k, &gap) in gaps.iter().enumerate() {
        let envelope = rho_k * gap0 + 2.0 * (1.0 - rho_k) / one_minus_rho * g2 * h;
        let violation = gap - envelope;
        if violation > report.worst {
            report.worst = violation;
            report.worst_k = k;
            report.envelope_at_worst = envelope;
        }
        report.passed &= within_tolerance(gap, envelope);
        rho_k *= rho;
    }
    Ok(report)
}

/// Stationarity radius after which every iterate of a tracking method stays
/// either stationary or below an earlier stationary gap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationarityBound {
    pub threshold: f64,
    /// Allowed gap increase over the last stationary iterate, before the
    /// `||grad_l||^2 / (2 L1)` credit.
    pub drift: f64,
    pub l1: f64,
    /// Averaging horizon per unit of initial gap.
    pub horizon_per_gap: f64,
}

impl StationarityBound {
    /// TVGD with `beta = 1 / L1`: radius `2 sqrt(L1 (1 + G2) h)`, drift
    /// `2 G2 h`, averaging horizon `gap / (2 h)`.
    pub fn tvgd(constants: &ProblemConstants, h: f64) -> Result<Self, AnalysisError> {
        let l1 = require(constants.l1, "L1")?;
        let g2 = require(constants.g2, "G2")?;
        Ok(Self {
            threshold: 2.0 * (l1 * (1.0 + g2) * h).sqrt(),
            drift: 2.0 * g2 * h,
            l1,
            horizon_per_gap: 1.0 / (2.0 * h),
        })
    }

    /// FOA-Min with the plain gradient, `zeta >= Z` and `delta <= h`:
    /// radius `sqrt(2 L1 (1 + G)) h` with
    /// `G = zeta^2 L1 / 2 + zeta L2 + L3 / 2 + zeta delta / h`, drift `G h^2`,
    /// averaging horizon `gap / h^2`.
    pub fn foa_min(constants: &ProblemConstants, zeta: f64, delta: f64, h: f64) -> Result<Self, AnalysisError> {
        let l1 = require(constants.l1, "L1")?;
        let l2 = require(constants.l2, "L2")?;
        let l3 = require(constants.l3, "L3")?;
        if let Some(z) = constants.z {
            if zeta < z {
                return Err(AnalysisError::Hypothesis(format!("zeta = {zeta} is below Z = {z}")));
            }
        }
        if delta > h {
            return Err(AnalysisError::Hypothesis(format!("delta = {delta} exceeds h = {h}")));
        }
        let g_bar = Self::foa_min_drift_constant(l1, l2, l3, zeta, delta, h);
        Ok(Self {
            threshold: (2.0 * l1 * (1.0 + g_bar)).sqrt() * h,
            drift: g_bar * h * h,
            l1,
            horizon_per_gap: 1.0 / (h * h),
        })
    }

    pub fn foa_min_drift_constant(l1: f64, l2: f64, l3: f64, zeta: f64, delta: f64, h: f64) -> f64 {
        zeta * zeta * l1 / 2.0 + zeta * l2 + l3 / 2.0 + zeta * delta / h
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PostConvergenceReport {
    pub threshold: f64,
    /// First step with `||grad|| <= threshold`; `None` means not converged.
    pub first_crossing: Option<usize>,
    pub checked: usize,
    pub stationary: usize,
    pub violations: Vec<usize>,
}

impl PostConvergenceReport {
    pub fn converged(&self) -> bool {
        self.first_crossing.is_some()
    }

    pub fn passed(&self) -> bool {
        self.converged() && self.violations.is_empty()
    }
}

/// After the first threshold crossing, every step must be stationary (a) or
/// have a gap strictly below `gap_l + drift - ||grad_l||^2 / (2 L1)` for some
/// earlier stationary step `l` (b).
pub fn check_post_convergence(trace: &Trace, bound: &StationarityBound) -> Result<PostConvergenceReport, AnalysisError> {
    let gaps = gaps_of(trace)?;
    let mut report = PostConvergenceReport {
        threshold: bound.threshold,
        first_crossing: None,
        checked: 0,
        stationary: 0,
        violations: Vec::new(),
    };
    // max over stationary l of gap_l - ||grad_l||^2 / (2 L1)
    let mut best_credit = f64::NEG_INFINITY;
    for (k, record) in trace.records.iter().enumerate() {
        let stationary = record.grad_norm <= bound.threshold;
        if report.first_crossing.is_none() {
            if !stationary {
                continue;
            }
            report.first_crossing = Some(k);
        }
        report.checked += 1;
        if stationary {
            report.stationary += 1;
        } else if !within_tolerance(gaps[k], best_credit + bound.drift) {
            report.violations.push(k);
        }
        if stationary {
            best_credit = best_credit.max(gaps[k] - record.grad_norm.powi(2) / (2.0 * bound.l1));
        }
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AverageGradientReport {
    pub start: usize,
    /// `ceil(gap_start * horizon_per_gap)`, at least 1.
    pub horizon: usize,
    /// `None` when the trace ends before the horizon does.
    pub average: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
}

/// Mean gradient norm over `ceil(T)` steps from `start`, where `T` is the
/// averaging horizon of `bound` for the gap at `start`.
pub fn check_average_gradient(
    trace: &Trace,
    start: usize,
    bound: &StationarityBound,
) -> Result<AverageGradientReport, AnalysisError> {
    let gaps = gaps_of(trace)?;
    let gap = *gaps.get(start).ok_or(AnalysisError::TooShort(gaps.len(), start + 1))?;
    let horizon = ((gap.max(0.0) * bound.horizon_per_gap).ceil() as usize).max(1);
    let average = trace.records.get(start..start + horizon).map(|window| {
        window.iter().map(|r| r.grad_norm).sum::<f64>() / horizon as f64
    });
    Ok(AverageGradientReport {
        start,
        horizon,
        average,
        threshold: bound.threshold,
        passed: average.is_some_and(|a| within_tolerance(a, bound.threshold)),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlThreshold {
    /// `r = (1 + sqrt(2 (L1 / mu - 1))) / (2 - L1 / mu) * L2 h`
    pub radius: f64,
    /// `2 (2 mu - L1) gap_0 / (L2^2 h^2)`; infinite when `L2 = 0`.
    pub iterations: f64,
}

/// Stationarity radius and iteration budget of TVGD on a PL function whose
/// gradient is `L2`-Lipschitz in `t`. Needs `2 mu > L1`.
pub fn pl_stationarity_threshold(l1: f64, mu: f64, l2: f64, h: f64, gap0: f64) -> Result<PlThreshold, AnalysisError> {
    if !(l1 > 0.0 && 2.0 * mu > l1) {
        return Err(AnalysisError::Hypothesis(format!(
            "needs 2 mu > L1 > 0, got mu = {mu}, L1 = {l1}"
        )));
    }
    let kappa = l1 / mu;
    let radius = (1.0 + (2.0 * (kappa - 1.0)).sqrt()) / (2.0 - kappa) * l2 * h;
    let iterations = 2.0 * (2.0 * mu - l1) * gap0 / (l2 * l2 * h * h);
    Ok(PlThreshold { radius, iterations })
}

/// `max_k f(x_{k+1|k}; t_{k+1}) - f(x_k; t_k)` over consecutive records.
pub fn max_prediction_increase(trace: &Trace) -> Result<f64, AnalysisError> {
    if trace.len() < 2 {
        return Err(AnalysisError::TooShort(trace.len(), 2));
    }
    Ok(trace
        .records
        .windows(2)
        .map(|w| w[1].f_pred - w[0].f_corr)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionGapReport {
    pub coarse: f64,
    pub fine: f64,
    /// `coarse / fine`: about 4 for an `O(h^2)` increase, 2 for `O(h)`.
    pub ratio: f64,
}

/// Ratio of the largest per-step increases at `h` and `h / 2`.
pub fn check_prediction_gap(coarse: &Trace, fine: &Trace) -> Result<PredictionGapReport, AnalysisError> {
    for trace in [coarse, fine] {
        if let Some(d) = &trace.divergence {
            return Err(AnalysisError::Diverged(d.k));
        }
    }
    let c = max_prediction_increase(coarse)?;
    let f = max_prediction_increase(fine)?;
    let ratio = if f > BOUND_TOLERANCE * BOUND_TOLERANCE { c / f } else { f64::NAN };
    Ok(PredictionGapReport {
        coarse: c,
        fine: f,
        ratio,
    })
}
