use crate::problem::{Matrix, Problem, Vector};

use super::{GradientChoice, SolverError};

fn all_finite(v: &Vector) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// `C` plain gradient-descent steps on `f(.; t)` from `x`, with a fresh
/// gradient at every inner iterate.
pub fn correct<P: Problem + ?Sized>(
    problem: &P,
    x: &Vector,
    t: f64,
    corrections: usize,
    beta: f64,
) -> Result<Vector, SolverError> {
    let mut x = x.clone();
    for _ in 0..corrections {
        let g = problem.grad_x(&x, t);
        x.axpy(-beta, &g, 1.0);
        if !all_finite(&x) {
            return Err(SolverError::NonFinite { phase: "correction", t });
        }
    }
    Ok(x)
}

/// Minimizer of the first-order model over the ball of radius `zeta * h`:
/// a step of exactly that length along `-g`, or no move when `||g|| <= delta`.
pub fn predict_foa_min(g: &Vector, x: &Vector, zeta: f64, h: f64, delta: f64) -> Vector {
    let norm = g.norm();
    if norm <= delta {
        return x.clone();
    }
    x - g * (zeta * h / norm)
}

/// Cauchy point of `m(s) = <g, s> + s^T H s / 2` inside the radius `zeta * h`.
///
/// With `q = g^T H g`, the step along `-g / ||g||` has length `zeta * h` when
/// `q <= 0` and `min(||g||^3 / q, zeta * h)` otherwise.
pub fn predict_cauchy_point(g: &Vector, hessian: &Matrix, x: &Vector, zeta: f64, h: f64, delta: f64) -> Vector {
    let norm = g.norm();
    if norm <= delta {
        return x.clone();
    }
    let radius = zeta * h;
    let q = g.dot(&(hessian * g));
    let length = if q <= 0.0 {
        radius
    } else {
        (norm.powi(3) / q).min(radius)
    };
    x - g * (length / norm)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UfopcParams {
    pub steps: usize,
    pub alpha: f64,
    pub gamma: f64,
}

/// U-FOPC prediction: `P` gradient steps on the quadratic Taylor model
/// `gamma <grad, s> + s^T H s / 2 + h <grad_tx, s>` around `x`.
///
/// `grad_tx` is the backward difference
/// `(grad_x f(x; t) - grad_x f(x; t - h)) / h`, evaluated at the current
/// point, so the first step needs no history.
/// No guard is applied inside the loop: the model is unbounded below for
/// indefinite Hessians and the iterate is allowed to run away.
pub fn predict_ufopc<P: Problem + ?Sized>(
    problem: &P,
    x: &Vector,
    t: f64,
    h: f64,
    params: UfopcParams,
) -> Result<Vector, SolverError> {
    if params.steps == 0 {
        return Ok(x.clone());
    }
    let grad = problem.grad_x(x, t);
    let hessian = problem.hess_xx(x, t)?;
    // h * grad_tx, directly from the gradient difference
    let drift = &grad - problem.grad_x(x, t - h);
    let constant = drift + &grad * params.gamma;
    let mut xh = x.clone();
    for _ in 0..params.steps {
        let offset = &xh - x;
        let direction = &hessian * offset + &constant;
        xh.axpy(-params.alpha, &direction, 1.0);
        if !all_finite(&xh) {
            return Err(SolverError::NonFinite { phase: "prediction", t });
        }
    }
    Ok(xh)
}

/// Prediction direction `g_k`. The extrapolated choice falls back to the
/// plain gradient at `k = 0`.
pub fn g_select<P: Problem + ?Sized>(
    problem: &P,
    x: &Vector,
    t: f64,
    h: f64,
    choice: GradientChoice,
    k: usize,
) -> Vector {
    let grad = problem.grad_x(x, t);
    match choice {
        GradientChoice::Extrapolated if k > 0 => grad * 2.0 - problem.grad_x(x, t - h),
        _ => grad,
    }
}
