use crate::problem::Vector;

use super::Algorithm;

/// One time step: the loss incurred at the predicted point and what the
/// correction made of it.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    /// `f(x_{k|k-1}; t_k)`
    pub f_pred: f64,
    /// `f(x_k; t_k)` after the correction.
    pub f_corr: f64,
    /// `||grad_x f(x_{k|k-1}; t_k)||`
    pub grad_norm: f64,
    /// `f(x_{k|k-1}; t_k) - f*(t_k)`, when gaps were requested.
    pub gap: Option<f64>,
    pub pred_seconds: f64,
    pub corr_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DivergenceReason {
    NonFinite { phase: &'static str },
    OutsideGuard { norm: f64, radius: f64 },
}

/// Where and why a run stopped early.
#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub k: usize,
    pub t: f64,
    pub reason: DivergenceReason,
    /// Loss and gradient norm at the offending predicted point, when they
    /// could be evaluated.
    pub f_pred: f64,
    pub grad_norm: f64,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.reason {
            DivergenceReason::NonFinite { phase } => {
                write!(f, "non-finite iterate in {phase} at step {} (t = {})", self.k, self.t)
            }
            DivergenceReason::OutsideGuard { norm, radius } => write!(
                f,
                "iterate norm {norm:e} left the guard radius {radius:e} at step {} (t = {})",
                self.k, self.t
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub h: f64,
    pub records: Vec<StepRecord>,
    /// Predicted points `x_{k|k-1}`, filled only when iterates are recorded.
    pub predicted: Vec<Vector>,
    /// Corrected points `x_k`, filled only when iterates are recorded.
    pub corrected: Vec<Vector>,
    pub divergence: Option<Divergence>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    pub fn grad_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.grad_norm).collect()
    }

    /// Gap column, or `None` when gaps were not computed.
    pub fn gaps(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.gap).collect()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f_pred).collect()
    }
}
