//! Time-varying objectives, the sampling grid, and smoothness constants.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::par;
use crate::rng::SeededRng;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Optional oracles a [`Problem`] may or may not provide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Oracle {
    GradT,
    Hessian,
    Optimum,
}

impl fmt::Display for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Oracle::GradT => f.write_str("grad_t"),
            Oracle::Hessian => f.write_str("hess_xx"),
            Oracle::Optimum => f.write_str("optimum"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("problem `{problem}` does not provide the {oracle} oracle")]
    Unsupported { problem: String, oracle: Oracle },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid problem constant `{name}` = {value}")]
    InvalidConstant { name: &'static str, value: f64 },
    #[error("mu = {mu} exceeds L1 = {l1}")]
    MuExceedsL1 { mu: f64, l1: f64 },
    #[error("missing problem constant `{0}`")]
    MissingConstant(&'static str),
    #[error("all {0} samples were at stationary points")]
    AllSamplesStationary(usize),
    #[error("{0}")]
    InvalidArgument(String),
}

/// Uniform sampling grid `t_k = k * h` for `k = 0..steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    h: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(h: f64, steps: usize) -> Result<Self, ProblemError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(ProblemError::InvalidGrid(format!(
                "sampling period must be positive, got {h}"
            )));
        }
        if steps == 0 {
            return Err(ProblemError::InvalidGrid("steps must be at least 1".into()));
        }
        Ok(Self { h, steps })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `t_k`, computed as a single product so it never drifts.
    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    /// Simulated horizon `steps * h`.
    pub fn horizon(&self) -> f64 {
        self.time(self.steps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimumKind {
    ClosedForm,
    Numeric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub x: Vector,
    pub value: f64,
    pub kind: OptimumKind,
}

/// A smooth objective `f(x; t)` together with its derivative oracles.
///
/// Implementations must be pure: identical `(x, t)` always yield identical
/// outputs, which is what makes runs reproducible and lets concurrent runs
/// share one instance.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, x: &Vector, t: f64) -> f64;

    fn grad_x(&self, x: &Vector, t: f64) -> Vector;

    fn supports(&self, _oracle: Oracle) -> bool {
        false
    }

    fn grad_t(&self, _x: &Vector, _t: f64) -> Result<f64, ProblemError> {
        Err(self.unsupported(Oracle::GradT))
    }

    fn hess_xx(&self, _x: &Vector, _t: f64) -> Result<Matrix, ProblemError> {
        Err(self.unsupported(Oracle::Hessian))
    }

    /// Reference minimizer at time `t`. Numeric optima start from `hint`,
    /// so they describe the stationary point reached from there.
    fn optimum(&self, _t: f64, _hint: &Vector) -> Option<Optimum> {
        None
    }

    /// Iterates with `||x|| > R` are declared diverged. `None` lets the
    /// solver pick its default radius.
    fn domain_guard(&self) -> Option<f64> {
        None
    }

    /// Analytic smoothness constants, when known.
    fn constants(&self) -> ProblemConstants {
        ProblemConstants::default()
    }

    /// Draws a test point for oracle checks. Defaults to `x ~ N(0, I)`,
    /// `t ~ U[0, 10)`.
    fn sample_point(&self, rng: &mut SeededRng) -> (Vector, f64) {
        let x = rng.normal_vector(self.dim());
        let t = rng.uniform_in(0.0, 10.0);
        (x, t)
    }

    fn unsupported(&self, oracle: Oracle) -> ProblemError {
        ProblemError::Unsupported {
            problem: self.name().to_string(),
            oracle,
        }
    }
}

/// Purely time-dependent offset subtracted from `f` before Lipschitz checks.
#[derive(Clone)]
pub struct Gauge(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl Gauge {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl fmt::Debug for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Gauge(..)")
    }
}

/// Smoothness and drift constants of a benchmark.
///
/// * `l1`: bound on `||hess_xx f||`
/// * `l2`: bound on `||grad_tx f||`
/// * `l3`: bound on `|grad_tt (f - gauge)|`
/// * `g2`: Lipschitz constant of `f - gauge` in `t`
/// * `mu`: PL constant
/// * `z`: bound on `|grad_t f| / ||grad_x f||`
#[derive(Clone, Debug, Default)]
pub struct ProblemConstants {
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub l3: Option<f64>,
    pub g2: Option<f64>,
    pub mu: Option<f64>,
    pub z: Option<f64>,
    pub gauge: Option<Gauge>,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<(), ProblemError> {
        let named = [
            ("L1", self.l1),
            ("L2", self.l2),
            ("L3", self.l3),
            ("G2", self.g2),
            ("mu", self.mu),
            ("Z", self.z),
        ];
        for (name, value) in named {
            if let Some(v) = value {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(ProblemError::InvalidConstant { name, value: v });
                }
            }
        }
        if let (Some(mu), Some(l1)) = (self.mu, self.l1) {
            if mu > l1 {
                return Err(ProblemError::MuExceedsL1 { mu, l1 });
            }
        }
        Ok(())
    }

    /// Linear rate `1 - mu / L1` of gradient descent with step `1 / L1`.
    pub fn rho(&self) -> Option<f64> {
        match (self.mu, self.l1) {
            (Some(mu), Some(l1)) if l1 > 0.0 => Some(1.0 - mu / l1),
            _ => None,
        }
    }

    pub fn gauge_at(&self, t: f64) -> f64 {
        self.gauge.as_ref().map_or(0.0, |g| g.at(t))
    }

    pub fn require(value: Option<f64>, name: &'static str) -> Result<f64, ProblemError> {
        value.ok_or(ProblemError::MissingConstant(name))
    }
}

/// Stopping rule for the numeric optimum: time-invariant gradient descent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerSolver {
    pub step: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl InnerSolver {
    pub fn with_step(step: f64) -> Self {
        Self {
            step,
            tolerance: 1e-10,
            max_iterations: 100_000,
        }
    }

    /// Runs gradient descent on `f(.; t)` from `start`.
    pub fn minimize<P: Problem + ?Sized>(&self, problem: &P, t: f64, start: &Vector) -> Optimum {
        let mut x = start.clone();
        for _ in 0..self.max_iterations {
            let g = problem.grad_x(&x, t);
            if g.norm() < self.tolerance || !g.iter().all(|v| v.is_finite()) {
                break;
            }
            x.axpy(-self.step, &g, 1.0);
        }
        let value = problem.value(&x, t);
        Optimum {
            x,
            value,
            kind: OptimumKind::Numeric,
        }
    }
}

/// Largest scaled errors of the analytic oracles against central differences.
///
/// Each error is `||analytic - fd|| / max(||analytic||, 1)`. Optional oracles
/// the problem does not provide are listed in `absent`.
#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub samples: usize,
    pub grad_x: f64,
    pub grad_t: Option<f64>,
    pub hess_xx: Option<f64>,
    pub hess_asymmetry: Option<f64>,
    pub absent: Vec<Oracle>,
}

pub const GRAD_TOLERANCE: f64 = 1e-6;
pub const HESS_TOLERANCE: f64 = 1e-4;
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

impl FdReport {
    pub fn passes(&self) -> bool {
        self.grad_x < GRAD_TOLERANCE
            && self.grad_t.is_none_or(|e| e < GRAD_TOLERANCE)
            && self.hess_xx.is_none_or(|e| e < HESS_TOLERANCE)
            && self.hess_asymmetry.is_none_or(|e| e <= SYMMETRY_TOLERANCE)
    }
}

struct SampleErrors {
    grad_x: f64,
    grad_t: Option<f64>,
    hess_xx: Option<f64>,
    asymmetry: Option<f64>,
}

fn scaled(diff: f64, reference: f64) -> f64 {
    diff / reference.max(1.0)
}

fn sample_errors<P: Problem + ?Sized>(problem: &P, x: &Vector, t: f64) -> SampleErrors {
    let d = problem.dim();
    let step = 1e-5 * (1.0 + x.norm());
    let g = problem.grad_x(x, t);

    let mut fd = Vector::zeros(d);
    let mut xp = x.clone();
    for j in 0..d {
        let orig = xp[j];
        xp[j] = orig + step;
        let fp = problem.value(&xp, t);
        xp[j] = orig - step;
        let fm = problem.value(&xp, t);
        xp[j] = orig;
        fd[j] = (fp - fm) / (2.0 * step);
    }
    let grad_x = scaled((&fd - &g).norm(), g.norm());

    let grad_t = problem.supports(Oracle::GradT).then(|| {
        let gt = problem.grad_t(x, t).expect("grad_t advertised");
        let fd_t = (problem.value(x, t + step) - problem.value(x, t - step)) / (2.0 * step);
        scaled((fd_t - gt).abs(), gt.abs())
    });

    let (hess_xx, asymmetry) = if problem.supports(Oracle::Hessian) {
        let h = problem.hess_xx(x, t).expect("hess_xx advertised");
        let mut fd_h = Matrix::zeros(d, d);
        for j in 0..d {
            let orig = xp[j];
            xp[j] = orig + step;
            let gp = problem.grad_x(&xp, t);
            xp[j] = orig - step;
            let gm = problem.grad_x(&xp, t);
            xp[j] = orig;
            fd_h.set_column(j, &((gp - gm) / (2.0 * step)));
        }
        let asym = (&h - h.transpose()).amax();
        (Some(scaled((&fd_h - &h).norm(), h.norm())), Some(asym))
    } else {
        (None, None)
    };

    SampleErrors {
        grad_x,
        grad_t,
        hess_xx,
        asymmetry,
    }
}

/// Compares analytic oracles against central finite differences at
/// `samples` points drawn with [`Problem::sample_point`].
pub fn finite_difference_check<P: Problem + ?Sized>(
    problem: &P,
    samples: usize,
    seed: u64,
) -> Result<FdReport, ProblemError> {
    if problem.dim() == 0 || samples == 0 {
        return Err(ProblemError::InvalidArgument(
            "finite-difference check needs dim >= 1 and samples >= 1".into(),
        ));
    }
    let mut rng = SeededRng::new(seed);
    let points: Vec<(Vector, f64)> = (0..samples).map(|_| problem.sample_point(&mut rng)).collect();
    let errors = par::map(&points, |(x, t)| sample_errors(problem, x, *t));

    let max_of = |f: &dyn Fn(&SampleErrors) -> Option<f64>| {
        errors.iter().filter_map(f).reduce(f64::max)
    };
    let mut absent = Vec::new();
    if !problem.supports(Oracle::GradT) {
        absent.push(Oracle::GradT);
    }
    if !problem.supports(Oracle::Hessian) {
        absent.push(Oracle::Hessian);
    }
    Ok(FdReport {
        samples,
        grad_x: max_of(&|e| Some(e.grad_x)).unwrap_or(0.0),
        grad_t: max_of(&|e| e.grad_t),
        hess_xx: max_of(&|e| e.hess_xx),
        hess_asymmetry: max_of(&|e| e.asymmetry),
        absent,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZEstimate {
    /// Largest observed `|grad_t f| / ||grad_x f||`.
    pub value: f64,
    pub used: usize,
    pub skipped: usize,
}

/// Gradient norms below this are treated as stationary and skipped.
pub const STATIONARY_NORM: f64 = 1e-12;

/// Estimates the derivative-ratio bound `Z` by sampling. The prediction
/// radius `zeta` should be at least the returned value.
pub fn estimate_z<P, S>(
    problem: &P,
    mut sampler: S,
    samples: usize,
    seed: u64,
) -> Result<ZEstimate, ProblemError>
where
    P: Problem + ?Sized,
    S: FnMut(&mut SeededRng) -> (Vector, f64),
{
    if !problem.supports(Oracle::GradT) {
        return Err(problem.unsupported(Oracle::GradT));
    }
    let mut rng = SeededRng::new(seed);
    let mut best = 0.0_f64;
    let mut used = 0;
    let mut skipped = 0;
    for _ in 0..samples {
        let (x, t) = sampler(&mut rng);
        let gnorm = problem.grad_x(&x, t).norm();
        if gnorm < STATIONARY_NORM {
            skipped += 1;
            continue;
        }
        let gt = problem.grad_t(&x, t)?;
        best = best.max(gt.abs() / gnorm);
        used += 1;
    }
    if used == 0 {
        return Err(ProblemError::AllSamplesStationary(skipped));
    }
    Ok(ZEstimate {
        value: best,
        used,
        skipped,
    })
}
