use proptest::prelude::*;

use tvopt::experiment::float;
use tvopt::problem::{estimate_z, Matrix, Oracle, Problem, ProblemError, TimeGrid, Vector};
use tvopt::problems::{make_linreg, make_robust, make_toy, LinRegVariant, RobustLoss};
use tvopt::rng::SeededRng;
use tvopt::solvers::{run, GradientChoice, RunOptions, SolverConfig};

fn smooth_benchmarks() -> Vec<Box<dyn Problem>> {
    vec![
        Box::new(make_toy()),
        Box::new(make_linreg(LinRegVariant::StaticA)),
        Box::new(make_linreg(LinRegVariant::DriftingA)),
        Box::new(make_robust(RobustLoss::GemanMcClure)),
        Box::new(make_robust(RobustLoss::Welsch)),
    ]
}

fn solver(index: usize, beta: f64) -> SolverConfig {
    match index {
        0 => SolverConfig::tvgd(1, beta),
        1 => SolverConfig::foa_min(1, beta, 2.0, 1e-10),
        _ => SolverConfig::cauchy_point(1, beta, 2.0, 1e-10).with_g(GradientChoice::Extrapolated),
    }
}

/// The toy objective observed from time `offset` on.
struct Delayed {
    offset: f64,
}

impl Problem for Delayed {
    fn name(&self) -> &str {
        "delayed_toy"
    }
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &Vector, t: f64) -> f64 {
        make_toy().value(x, t + self.offset)
    }
    fn grad_x(&self, x: &Vector, t: f64) -> Vector {
        make_toy().grad_x(x, t + self.offset)
    }
    fn supports(&self, o: Oracle) -> bool {
        o == Oracle::Hessian
    }
    fn hess_xx(&self, x: &Vector, t: f64) -> Result<Matrix, ProblemError> {
        make_toy().hess_xx(x, t + self.offset)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn correction_decreases_by_the_smoothness_bound(which in 0usize..5, alg in 0usize..3, seed in any::<u64>()) {
        let problem = &smooth_benchmarks()[which];
        let l1 = problem.constants().l1.unwrap();
        let x0 = SeededRng::new(seed).normal_vector(problem.dim()) * 3.0;
        let grid = TimeGrid::new(0.01, 60).unwrap();
        let trace = run(problem.as_ref(), &solver(alg, 1.0 / l1), &grid, &x0, &RunOptions::default()).unwrap();
        prop_assert!(!trace.diverged());
        for r in &trace.records {
            let bound = r.f_pred - r.grad_norm * r.grad_norm / (2.0 * l1);
            prop_assert!(r.f_corr <= bound + 1e-10 * (1.0 + r.f_pred.abs()), "{}: k = {}: {} > {}", problem.name(), r.k, r.f_corr, bound);
        }
    }

    #[test]
    fn identical_inputs_give_identical_traces(which in 0usize..5, alg in 0usize..3, seed in any::<u64>()) {
        let problem = &smooth_benchmarks()[which];
        let x0 = SeededRng::new(seed).normal_vector(problem.dim());
        let grid = TimeGrid::new(0.05, 40).unwrap();
        let config = solver(alg, 0.01);
        let a = run(problem.as_ref(), &config, &grid, &x0, &RunOptions::default()).unwrap();
        let b = run(problem.as_ref(), &config, &grid, &x0, &RunOptions::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn toy_tracking_commutes_with_the_parallel_shift(x0 in -10.0f64..10.0, delta in 0.0f64..3.0) {
        let grid = TimeGrid::new(0.1, 50).unwrap();
        let config = SolverConfig::foa_min(1, 1.0, 10.0, 1e-10);
        let options = RunOptions { record_iterates: true, ..RunOptions::default() };
        let base = run(&make_toy(), &config, &grid, &Vector::from_vec(vec![x0]), &options).unwrap();
        let start = Vector::from_vec(vec![x0 + 10.0 * delta]);
        let moved = run(&Delayed { offset: delta }, &config, &grid, &start, &options).unwrap();
        for (a, b) in base.predicted.iter().zip(&moved.predicted) {
            prop_assert!((b[0] - a[0] - 10.0 * delta).abs() <= 1e-9 * (1.0 + b[0].abs()));
        }
    }

    #[test]
    fn oracles_are_finite_inside_the_guard(which in 0usize..5, seed in any::<u64>(), scale in 0.0f64..100.0) {
        let problem = &smooth_benchmarks()[which];
        let mut rng = SeededRng::new(seed);
        let x = rng.normal_vector(problem.dim()) * scale;
        let t = rng.uniform_in(0.0, 100.0);
        prop_assert!(problem.value(&x, t).is_finite());
        prop_assert!(problem.grad_x(&x, t).iter().all(|v| v.is_finite()));
        if problem.supports(Oracle::GradT) {
            prop_assert!(problem.grad_t(&x, t).unwrap().is_finite());
        }
        if problem.supports(Oracle::Hessian) {
            prop_assert!(problem.hess_xx(&x, t).unwrap().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn z_estimate_never_drops_when_samples_are_added(which in 0usize..5, seed in any::<u64>(), n in 1usize..40, extra in 1usize..40) {
        let problem = &smooth_benchmarks()[which];
        let sampler = |rng: &mut SeededRng| problem.sample_point(rng);
        let small = estimate_z(problem.as_ref(), sampler, n, seed).unwrap();
        let large = estimate_z(problem.as_ref(), sampler, n + extra, seed).unwrap();
        prop_assert!(large.value >= small.value);
    }

    #[test]
    fn csv_floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let text = float(x);
        prop_assert_eq!(text.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}

#[test]
fn grid_times_are_reproducible() {
    let a = TimeGrid::new(0.001, 10).unwrap();
    let b = TimeGrid::new(0.001, 10).unwrap();
    for k in 0..10 {
        assert_eq!(a.time(k).to_bits(), b.time(k).to_bits());
        assert_eq!(a.time(k).to_bits(), (k as f64 * 0.001).to_bits());
    }
}
