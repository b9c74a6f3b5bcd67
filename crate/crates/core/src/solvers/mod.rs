//! Correction loop, prediction rules and the four tracking algorithms.
//!
//! Every algorithm follows the same per-step template: incur the loss at the
//! predicted point, correct it with plain gradient descent on the revealed
//! objective, then predict the next point (TVGD skips the prediction).

mod run;
mod steps;
mod trace;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::problem::{Oracle, ProblemError};

pub use run::{run, RunOptions, DEFAULT_GUARD_SCALE};
pub use steps::{correct, g_select, predict_cauchy_point, predict_foa_min, predict_ufopc, UfopcParams};
pub use trace::{Divergence, DivergenceReason, StepRecord, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("{algorithm} needs the {oracle} oracle, which `{problem}` does not provide")]
    MissingOracle {
        algorithm: Algorithm,
        problem: String,
        oracle: Oracle,
    },
    #[error("initial point has dimension {got}, problem expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite iterate during {phase} at t = {t}")]
    NonFinite { phase: &'static str, t: f64 },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Time-varying gradient descent: correction only.
    Tvgd,
    /// Inner gradient descent on the second-order Taylor model.
    Ufopc,
    /// Normalized step of length `zeta * h` along `-g`.
    FoaMin,
    /// Cauchy point of the quadratic model inside radius `zeta * h`.
    CauchyPoint,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Tvgd => "tvgd",
            Algorithm::Ufopc => "ufopc",
            Algorithm::FoaMin => "foa_min",
            Algorithm::CauchyPoint => "cp",
        }
    }

    pub fn needs_hessian(self) -> bool {
        matches!(self, Algorithm::Ufopc | Algorithm::CauchyPoint)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "tvgd" | "gd" => Ok(Algorithm::Tvgd),
            "ufopc" | "u_fopc" => Ok(Algorithm::Ufopc),
            "foa_min" | "foamin" | "foa" => Ok(Algorithm::FoaMin),
            "cp" | "cauchy_point" => Ok(Algorithm::CauchyPoint),
            other => Err(SolverError::InvalidConfig(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Direction used by the FOA-Min / CP prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GradientChoice {
    /// `g_k = grad_x f(x_k; t_k)`
    #[default]
    Plain,
    /// `g_k = 2 grad_x f(x_k; t_k) - grad_x f(x_k; t_{k-1})`
    Extrapolated,
}

impl FromStr for GradientChoice {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" => Ok(GradientChoice::Plain),
            "extrapolated" | "extrapolate" => Ok(GradientChoice::Extrapolated),
            other => Err(SolverError::InvalidConfig(format!("unknown gradient choice `{other}`"))),
        }
    }
}

/// Algorithm selector plus every tunable. Fields that the selected
/// algorithm does not use are still validated.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Correction steps per time step (`C`).
    pub corrections: usize,
    /// Correction step size (`beta`).
    pub beta: f64,
    /// U-FOPC inner prediction steps (`P`).
    pub prediction_steps: usize,
    /// U-FOPC prediction step size (`alpha`).
    pub alpha: f64,
    /// U-FOPC mixing weight of the gradient term, in `[0, 1]`.
    pub gamma: f64,
    /// Prediction radius coefficient: the radius is `zeta * h`.
    pub zeta: f64,
    /// Predictions are skipped when `||g|| <= delta`.
    pub delta: f64,
    pub g_choice: GradientChoice,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            corrections: 1,
            beta: 1.0,
            prediction_steps: 10,
            alpha: 1.0,
            gamma: 0.0,
            zeta: 1.0,
            delta: 1e-10,
            g_choice: GradientChoice::Plain,
        }
    }

    pub fn tvgd(corrections: usize, beta: f64) -> Self {
        Self {
            corrections,
            beta,
            ..Self::new(Algorithm::Tvgd)
        }
    }

    pub fn ufopc(corrections: usize, beta: f64, prediction_steps: usize, alpha: f64, gamma: f64) -> Self {
        Self {
            corrections,
            beta,
            prediction_steps,
            alpha,
            gamma,
            ..Self::new(Algorithm::Ufopc)
        }
    }

    pub fn foa_min(corrections: usize, beta: f64, zeta: f64, delta: f64) -> Self {
        Self {
            corrections,
            beta,
            zeta,
            delta,
            ..Self::new(Algorithm::FoaMin)
        }
    }

    pub fn cauchy_point(corrections: usize, beta: f64, zeta: f64, delta: f64) -> Self {
        Self {
            corrections,
            beta,
            zeta,
            delta,
            ..Self::new(Algorithm::CauchyPoint)
        }
    }

    pub fn with_g(mut self, choice: GradientChoice) -> Self {
        self.g_choice = choice;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("beta", self.beta),
            ("alpha", self.alpha),
            ("zeta", self.zeta),
            ("delta", self.delta),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(SolverError::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(SolverError::InvalidConfig(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}
