use crate::solvers::Trace;

use super::AnalysisError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailStats {
    pub window: usize,
    pub max_grad: f64,
    pub mean_grad: f64,
    pub max_gap: Option<f64>,
    pub mean_gap: Option<f64>,
}

/// Statistics over the trailing `floor(len / 2)` records.
pub fn tail_stats(trace: &Trace) -> Result<TailStats, AnalysisError> {
    tail_stats_window(trace, trace.len() / 2)
}

/// Statistics over the trailing `window` records.
pub fn tail_stats_window(trace: &Trace, window: usize) -> Result<TailStats, AnalysisError> {
    if let Some(d) = &trace.divergence {
        return Err(AnalysisError::Diverged(d.k));
    }
    if trace.len() < 2 || window == 0 || window > trace.len() {
        return Err(AnalysisError::TooShort(trace.len(), 2.max(window)));
    }
    let tail = &trace.records[trace.len() - window..];
    let n = window as f64;
    let max_grad = tail.iter().map(|r| r.grad_norm).fold(f64::NEG_INFINITY, f64::max);
    let mean_grad = tail.iter().map(|r| r.grad_norm).sum::<f64>() / n;
    let gaps: Option<Vec<f64>> = tail.iter().map(|r| r.gap).collect();
    let (max_gap, mean_gap) = match gaps {
        Some(g) => (
            Some(g.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            Some(g.iter().sum::<f64>() / n),
        ),
        None => (None, None),
    };
    Ok(TailStats {
        window,
        max_grad,
        mean_grad,
        max_gap,
        mean_gap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderFit {
    /// Empirical order `p` in `stat ~ h^p`.
    pub slope: f64,
    pub intercept: f64,
    pub max_abs_residual: f64,
}

/// Least-squares line through `(ln h, ln stat)`.
pub fn fit_order(points: &[(f64, f64)]) -> Result<OrderFit, AnalysisError> {
    if points.len() < 3 {
        return Err(AnalysisError::NotEnoughPoints(points.len()));
    }
    for &(h, stat) in points {
        if !(h > 0.0 && stat > 0.0 && h.is_finite() && stat.is_finite()) {
            return Err(AnalysisError::NonPositive { h, stat });
        }
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(h, s)| (h.ln(), s.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::Hypothesis("order fit needs distinct h values".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_abs_residual = logs
        .iter()
        .map(|&(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);
    Ok(OrderFit {
        slope,
        intercept,
        max_abs_residual,
    })
}
