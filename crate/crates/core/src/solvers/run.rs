use std::time::Instant;

use crate::problem::{Oracle, Problem, TimeGrid, Vector};

use super::steps::{correct, g_select, predict_cauchy_point, predict_foa_min, predict_ufopc, UfopcParams};
use super::trace::{Divergence, DivergenceReason, StepRecord, Trace};
use super::{Algorithm, SolverConfig, SolverError};

/// Guard radius used when the problem has none: `scale * (1 + ||x0||)`.
pub const DEFAULT_GUARD_SCALE: f64 = 1e8;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Fill `StepRecord::gap`; needs the optimum oracle.
    pub compute_gaps: bool,
    /// Keep every predicted and corrected point in the trace.
    pub record_iterates: bool,
    /// Measure wall-clock time per phase. Off keeps traces bit-reproducible.
    pub record_timing: bool,
    /// Overrides the divergence radius.
    pub guard: Option<f64>,
}

impl RunOptions {
    pub fn with_gaps() -> Self {
        Self {
            compute_gaps: true,
            ..Self::default()
        }
    }
}

fn check_oracles<P: Problem + ?Sized>(problem: &P, config: &SolverConfig, options: &RunOptions) -> Result<(), SolverError> {
    let mut needed = Vec::new();
    if config.algorithm.needs_hessian() {
        needed.push(Oracle::Hessian);
    }
    if options.compute_gaps {
        needed.push(Oracle::Optimum);
    }
    for oracle in needed {
        if !problem.supports(oracle) {
            return Err(SolverError::MissingOracle {
                algorithm: config.algorithm,
                problem: problem.name().to_string(),
                oracle,
            });
        }
    }
    Ok(())
}

fn timed<R>(enabled: bool, f: impl FnOnce() -> R) -> (R, f64) {
    if enabled {
        let start = Instant::now();
        let out = f();
        (out, start.elapsed().as_secs_f64())
    } else {
        (f(), 0.0)
    }
}

/// Runs one tracking algorithm over `grid` from the initial prediction `x0`.
///
/// Per step `k`: incur `f(x_{k|k-1}; t_k)`, correct to `x_k`, then predict
/// `x_{k+1|k}`. Divergence stops the run and is reported in the trace
/// rather than as an error; configuration problems are errors.
pub fn run<P: Problem + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    grid: &TimeGrid,
    x0: &Vector,
    options: &RunOptions,
) -> Result<Trace, SolverError> {
    config.validate()?;
    if x0.len() != problem.dim() {
        return Err(SolverError::DimensionMismatch {
            expected: problem.dim(),
            got: x0.len(),
        });
    }
    check_oracles(problem, config, options)?;

    let h = grid.h();
    let radius = options
        .guard
        .or_else(|| problem.domain_guard())
        .unwrap_or(DEFAULT_GUARD_SCALE * (1.0 + x0.norm()));
    let mut trace = Trace {
        algorithm: config.algorithm,
        h,
        records: Vec::with_capacity(grid.steps()),
        predicted: Vec::new(),
        corrected: Vec::new(),
        divergence: None,
    };

    let mut x_pred = x0.clone();
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let f_pred = problem.value(&x_pred, t);
        let grad_norm = problem.grad_x(&x_pred, t).norm();
        let diverge = |reason| Divergence {
            k,
            t,
            reason,
            f_pred,
            grad_norm,
        };

        let norm = x_pred.norm();
        if !norm.is_finite() || !f_pred.is_finite() || !grad_norm.is_finite() {
            trace.divergence = Some(diverge(DivergenceReason::NonFinite { phase: "prediction" }));
            break;
        }
        if norm > radius {
            trace.divergence = Some(diverge(DivergenceReason::OutsideGuard { norm, radius }));
            break;
        }
        let gap = if options.compute_gaps {
            problem.optimum(t, &x_pred).map(|opt| f_pred - opt.value)
        } else {
            None
        };

        let (corrected, corr_seconds) =
            timed(options.record_timing, || correct(problem, &x_pred, t, config.corrections, config.beta));
        let x_corr = match corrected {
            Ok(x) => x,
            Err(SolverError::NonFinite { phase, .. }) => {
                trace.divergence = Some(diverge(DivergenceReason::NonFinite { phase }));
                break;
            }
            Err(e) => return Err(e),
        };
        let f_corr = problem.value(&x_corr, t);

        let (predicted, pred_seconds) = timed(options.record_timing, || predict(problem, config, &x_corr, t, h, k));
        let next = match predicted {
            Ok(x) => x,
            Err(SolverError::NonFinite { phase, .. }) => {
                trace.divergence = Some(diverge(DivergenceReason::NonFinite { phase }));
                break;
            }
            Err(e) => return Err(e),
        };

        trace.records.push(StepRecord {
            k,
            t,
            f_pred,
            f_corr,
            grad_norm,
            gap,
            pred_seconds,
            corr_seconds,
        });
        if options.record_iterates {
            trace.predicted.push(std::mem::replace(&mut x_pred, next));
            trace.corrected.push(x_corr);
        } else {
            x_pred = next;
        }
    }
    Ok(trace)
}

fn predict<P: Problem + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    x: &Vector,
    t: f64,
    h: f64,
    k: usize,
) -> Result<Vector, SolverError> {
    let next = match config.algorithm {
        Algorithm::Tvgd => return Ok(x.clone()),
        Algorithm::Ufopc => {
            let params = UfopcParams {
                steps: config.prediction_steps,
                alpha: config.alpha,
                gamma: config.gamma,
            };
            return predict_ufopc(problem, x, t, h, params);
        }
        Algorithm::FoaMin => {
            let g = g_select(problem, x, t, h, config.g_choice, k);
            predict_foa_min(&g, x, config.zeta, h, config.delta)
        }
        Algorithm::CauchyPoint => {
            let g = g_select(problem, x, t, h, config.g_choice, k);
            let hessian = problem.hess_xx(x, t)?;
            predict_cauchy_point(&g, &hessian, x, config.zeta, h, config.delta)
        }
    };
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(SolverError::NonFinite { phase: "prediction", t })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Matrix, Optimum, OptimumKind, ProblemError};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// `f(x; t) = ||x - c(t)||^2 / 2` with `c(t) = (sin t, cos t)`.
    struct Orbit;

    impl Orbit {
        fn center(t: f64) -> Vector {
            Vector::from_vec(vec![t.sin(), t.cos()])
        }
    }

    impl Problem for Orbit {
        fn name(&self) -> &str {
            "orbit"
        }
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &Vector, t: f64) -> f64 {
            0.5 * (x - Self::center(t)).norm_squared()
        }
        fn grad_x(&self, x: &Vector, t: f64) -> Vector {
            x - Self::center(t)
        }
        fn supports(&self, o: Oracle) -> bool {
            matches!(o, Oracle::Hessian | Oracle::Optimum)
        }
        fn hess_xx(&self, _x: &Vector, _t: f64) -> Result<Matrix, ProblemError> {
            Ok(Matrix::identity(2, 2))
        }
        fn optimum(&self, t: f64, _hint: &Vector) -> Option<Optimum> {
            Some(Optimum {
                x: Self::center(t),
                value: 0.0,
                kind: OptimumKind::ClosedForm,
            })
        }
    }

    /// `f(x; t) = ||x||^2 / 2`: gradient only.
    struct Still;

    impl Problem for Still {
        fn name(&self) -> &str {
            "still"
        }
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &Vector, _t: f64) -> f64 {
            0.5 * x.norm_squared()
        }
        fn grad_x(&self, x: &Vector, _t: f64) -> Vector {
            x.clone()
        }
    }

    fn all_algorithms() -> [SolverConfig; 4] {
        [
            SolverConfig::tvgd(2, 0.5),
            SolverConfig::ufopc(1, 0.5, 10, 0.5, 0.5),
            SolverConfig::foa_min(1, 0.5, 1.0, 1e-10),
            SolverConfig::cauchy_point(1, 0.5, 1.0, 1e-10),
        ]
    }

    #[test]
    fn first_record_matches_hand_computation() {
        let grid = TimeGrid::new(0.1, 3).unwrap();
        let x0 = Vector::from_vec(vec![1.0, 0.0]);
        let trace = run(&Orbit, &SolverConfig::tvgd(1, 0.5), &grid, &x0, &RunOptions::with_gaps()).unwrap();
        let r = &trace.records[0];
        // c(0) = (0, 1): f = (1 + 1) / 2, grad = (1, -1)
        assert_eq!(r.f_pred, 1.0);
        assert_relative_eq!(r.grad_norm, 2f64.sqrt());
        assert_eq!(r.gap, Some(1.0));
        // half a step to the center halves the distance: f drops by 4
        assert_relative_eq!(r.f_corr, 0.25);
        assert_eq!(trace.len(), 3);
        assert_eq!(trace.records[2].t, 2.0 * 0.1);
    }

    #[test]
    fn tvgd_prediction_is_the_corrected_point() {
        let grid = TimeGrid::new(0.1, 5).unwrap();
        let x0 = Vector::from_vec(vec![0.3, -0.2]);
        let options = RunOptions {
            record_iterates: true,
            ..RunOptions::default()
        };
        let trace = run(&Orbit, &SolverConfig::tvgd(1, 0.3), &grid, &x0, &options).unwrap();
        for k in 1..trace.len() {
            assert_eq!(trace.predicted[k], trace.corrected[k - 1]);
        }
    }

    #[test]
    fn all_algorithms_track_the_orbit() {
        let grid = TimeGrid::new(0.05, 400).unwrap();
        let x0 = Vector::from_vec(vec![2.0, 2.0]);
        for config in all_algorithms() {
            let trace = run(&Orbit, &config, &grid, &x0, &RunOptions::with_gaps()).unwrap();
            assert!(!trace.diverged());
            let tail = trace.records.last().unwrap();
            assert!(tail.gap.unwrap() < 1e-2, "{}: {:?}", config.algorithm, tail);
        }
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let grid = TimeGrid::new(0.1, 50).unwrap();
        let x0 = Vector::from_vec(vec![0.1, 0.2]);
        for config in all_algorithms() {
            let a = run(&Orbit, &config, &grid, &x0, &RunOptions::with_gaps()).unwrap();
            let b = run(&Orbit, &config, &grid, &x0, &RunOptions::with_gaps()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn missing_oracles_are_config_errors() {
        let grid = TimeGrid::new(0.1, 5).unwrap();
        let x0 = Vector::zeros(1);
        let cp = SolverConfig::cauchy_point(1, 0.5, 1.0, 1e-10);
        assert!(matches!(
            run(&Still, &cp, &grid, &x0, &RunOptions::default()),
            Err(SolverError::MissingOracle { oracle: Oracle::Hessian, .. })
        ));
        assert!(matches!(
            run(&Still, &SolverConfig::tvgd(1, 0.5), &grid, &x0, &RunOptions::with_gaps()),
            Err(SolverError::MissingOracle { oracle: Oracle::Optimum, .. })
        ));
        assert!(run(&Still, &SolverConfig::tvgd(1, 0.5), &grid, &x0, &RunOptions::default()).is_ok());
        assert!(matches!(
            run(&Still, &SolverConfig::tvgd(1, 0.5), &grid, &Vector::zeros(3), &RunOptions::default()),
            Err(SolverError::DimensionMismatch { expected: 1, got: 3 })
        ));
    }

    #[test]
    fn overshooting_step_diverges_with_record() {
        let grid = TimeGrid::new(0.1, 10_000).unwrap();
        let x0 = Vector::from_vec(vec![1.0]);
        // beta = 3 on a unit-curvature bowl doubles |x| every step
        let trace = run(&Still, &SolverConfig::tvgd(1, 3.0), &grid, &x0, &RunOptions::default()).unwrap();
        let d = trace.divergence.clone().expect("should diverge");
        assert!(matches!(d.reason, DivergenceReason::OutsideGuard { .. }));
        assert_eq!(trace.len(), d.k);
        assert!(d.k < 100);
    }

    #[test]
    fn explicit_guard_overrides_default() {
        let grid = TimeGrid::new(0.1, 100).unwrap();
        let x0 = Vector::from_vec(vec![1.0]);
        let options = RunOptions {
            guard: Some(5.0),
            ..RunOptions::default()
        };
        let trace = run(&Still, &SolverConfig::tvgd(1, 3.0), &grid, &x0, &options).unwrap();
        // |x| = 1, 2, 4, 8
        assert_eq!(trace.divergence.unwrap().k, 3);
    }

    #[test]
    fn timing_is_zero_unless_requested() {
        let grid = TimeGrid::new(0.1, 5).unwrap();
        let x0 = Vector::from_vec(vec![1.0]);
        let trace = run(&Still, &SolverConfig::tvgd(1, 0.5), &grid, &x0, &RunOptions::default()).unwrap();
        assert!(trace.records.iter().all(|r| r.pred_seconds == 0.0 && r.corr_seconds == 0.0));
    }

    /// `f(x; t) = q(x - c t)` for a fixed convex quadratic `q`.
    struct Drift {
        c: Vector,
    }

    impl Problem for Drift {
        fn name(&self) -> &str {
            "drift"
        }
        fn dim(&self) -> usize {
            self.c.len()
        }
        fn value(&self, x: &Vector, t: f64) -> f64 {
            let y = x - &self.c * t;
            0.5 * y.norm_squared() + 0.25 * y[0] * y[0]
        }
        fn grad_x(&self, x: &Vector, t: f64) -> Vector {
            let mut g = x - &self.c * t;
            g[0] *= 1.5;
            g
        }
        fn supports(&self, o: Oracle) -> bool {
            o == Oracle::Hessian
        }
        fn hess_xx(&self, _x: &Vector, _t: f64) -> Result<Matrix, ProblemError> {
            let mut h = Matrix::identity(self.c.len(), self.c.len());
            h[(0, 0)] = 1.5;
            Ok(h)
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn tracking_commutes_with_shifts(
            cx in -2.0f64..2.0, cy in -2.0f64..2.0,
            sx in -5.0f64..5.0, sy in -5.0f64..5.0,
            alg in 0usize..4,
        ) {
            // Translating x0 by s equals running on f(. - s; t), which for a
            // drift problem is the same as translating the drift.
            let grid = TimeGrid::new(0.1, 20).unwrap();
            let c = Vector::from_vec(vec![cx, cy]);
            let shift = Vector::from_vec(vec![sx, sy]);
            let config = &all_algorithms()[alg];
            let options = RunOptions { record_iterates: true, ..RunOptions::default() };
            let base = run(&Drift { c: c.clone() }, config, &grid, &Vector::zeros(2), &options).unwrap();

            struct Shifted<'a> { inner: &'a Drift, s: &'a Vector }
            impl Problem for Shifted<'_> {
                fn name(&self) -> &str { "shifted" }
                fn dim(&self) -> usize { 2 }
                fn value(&self, x: &Vector, t: f64) -> f64 { self.inner.value(&(x - self.s), t) }
                fn grad_x(&self, x: &Vector, t: f64) -> Vector { self.inner.grad_x(&(x - self.s), t) }
                fn supports(&self, o: Oracle) -> bool { self.inner.supports(o) }
                fn hess_xx(&self, x: &Vector, t: f64) -> Result<Matrix, ProblemError> {
                    self.inner.hess_xx(&(x - self.s), t)
                }
            }
            let inner = Drift { c };
            let moved = run(&Shifted { inner: &inner, s: &shift }, config, &grid, &shift, &options).unwrap();
            for (a, b) in base.predicted.iter().zip(&moved.predicted) {
                prop_assert!((a + &shift - b).amax() <= 1e-9 * (1.0 + shift.amax()));
            }
            for (a, b) in base.records.iter().zip(&moved.records) {
                prop_assert!((a.f_pred - b.f_pred).abs() <= 1e-9 * (1.0 + a.f_pred.abs()));
            }
        }

        #[test]
        fn correction_never_increases_loss(
            x in -10.0f64..10.0, y in -10.0f64..10.0, t in 0.0f64..5.0, c in 1usize..6,
        ) {
            // beta = 1 / L1 = 1 / 1.5 guarantees descent on the drift problem
            let p = Drift { c: Vector::from_vec(vec![1.0, -0.5]) };
            let x0 = Vector::from_vec(vec![x, y]);
            let xc = correct(&p, &x0, t, c, 1.0 / 1.5).unwrap();
            prop_assert!(p.value(&xc, t) <= p.value(&x0, t) + 1e-12);
        }
    }
}
