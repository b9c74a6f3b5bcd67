//! Tail statistics, empirical order fitting and checkers for the tracking
//! guarantees. Checkers only read traces and constants; none of them runs a
//! solver.

mod bounds;
mod ratio;
mod stats;

use thiserror::Error;

use crate::problem::ProblemError;

pub use bounds::{
    check_average_gradient, check_lipschitz_optimum, check_post_convergence, check_prediction_gap,
    check_tvgd_pl_envelope, max_prediction_increase, pl_stationarity_threshold, AverageGradientReport,
    EnvelopeReport, LipschitzReport, PlThreshold, PostConvergenceReport, PredictionGapReport, StationarityBound,
};
pub use ratio::{ratio_bound_selftest, ratio_bound_selftest_with_shape, RatioSelfTest};
pub use stats::{fit_order, tail_stats, tail_stats_window, OrderFit, TailStats};

/// Absolute and relative slack added to every checked inequality.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// `lhs <= rhs` up to [`BOUND_TOLERANCE`].
pub fn within_tolerance(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + BOUND_TOLERANCE * (1.0 + rhs.abs())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("trace diverged at step {0}")]
    Diverged(usize),
    #[error("trace has {0} records, need at least {1}")]
    TooShort(usize, usize),
    #[error("trace has no optimality gaps")]
    MissingGaps,
    #[error("missing constant `{0}`")]
    MissingConstant(&'static str),
    #[error("order fit needs at least 3 points, got {0}")]
    NotEnoughPoints(usize),
    #[error("order fit needs positive values, got stat {stat} at h = {h}")]
    NonPositive { h: f64, stat: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Trace with the given gradient norms and optional gaps, `t_k = k`.
#[cfg(test)]
pub(crate) fn synthetic_trace(grads: &[f64], gaps: Option<&[f64]>) -> crate::solvers::Trace {
    use crate::solvers::{Algorithm, StepRecord, Trace};
    let records = grads
        .iter()
        .enumerate()
        .map(|(k, &g)| StepRecord {
            k,
            t: k as f64,
            f_pred: 0.0,
            f_corr: 0.0,
            grad_norm: g,
            gap: gaps.map(|v| v[k]),
            pred_seconds: 0.0,
            corr_seconds: 0.0,
        })
        .collect();
    Trace {
        algorithm: Algorithm::Tvgd,
        h: 1.0,
        records,
        predicted: Vec::new(),
        corrected: Vec::new(),
        divergence: None,
    }
}
