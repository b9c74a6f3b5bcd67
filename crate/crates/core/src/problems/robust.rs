use crate::problem::{Matrix, Optimum, OptimumKind, Oracle, Problem, ProblemConstants, ProblemError, Vector};

use super::diagonal::{DiagonalModel, DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RobustLoss {
    /// `2 y^2 / (y^2 + 4)`
    GemanMcClure,
    /// `1 - exp(-y^2 / 2)`
    Welsch,
}

impl RobustLoss {
    pub fn value(self, y: f64) -> f64 {
        let y2 = y * y;
        match self {
            RobustLoss::GemanMcClure => 2.0 * y2 / (y2 + 4.0),
            RobustLoss::Welsch => -(-0.5 * y2).exp_m1(),
        }
    }

    pub fn derivative(self, y: f64) -> f64 {
        let y2 = y * y;
        match self {
            RobustLoss::GemanMcClure => 16.0 * y / (y2 + 4.0).powi(2),
            RobustLoss::Welsch => y * (-0.5 * y2).exp(),
        }
    }

    pub fn second_derivative(self, y: f64) -> f64 {
        let y2 = y * y;
        match self {
            RobustLoss::GemanMcClure => 16.0 * (4.0 - 3.0 * y2) / (y2 + 4.0).powi(3),
            RobustLoss::Welsch => (1.0 - y2) * (-0.5 * y2).exp(),
        }
    }
}

/// `f(x; t) = sum_i l((A(t) x - b(t))_i)` with a bounded non-convex loss,
/// `A_ii(t) = s_i (1 + 0.05 cos(t / 200 + 2 pi i / 10))` for `s = (1 x5, 10 x5)`
/// and `b_i(t) = 50 sin(t / 100 + 2 pi i / 10)`.
#[derive(Clone, Debug)]
pub struct RobustRegression {
    loss: RobustLoss,
    model: DiagonalModel,
}

pub fn make_robust(loss: RobustLoss) -> RobustRegression {
    RobustRegression {
        loss,
        model: DiagonalModel {
            low: 1.0,
            high: 10.0,
            wobble: 0.05,
            amplitude: 50.0,
        },
    }
}

impl RobustRegression {
    pub fn loss(&self) -> RobustLoss {
        self.loss
    }
}

impl Problem for RobustRegression {
    fn name(&self) -> &str {
        match self.loss {
            RobustLoss::GemanMcClure => "robust_gm",
            RobustLoss::Welsch => "robust_welsch",
        }
    }

    fn dim(&self) -> usize {
        DIM
    }

    fn value(&self, x: &Vector, t: f64) -> f64 {
        self.model.residual(x, t).iter().map(|&r| self.loss.value(r)).sum()
    }

    fn grad_x(&self, x: &Vector, t: f64) -> Vector {
        let r = self.model.residual(x, t);
        r.map(|ri| self.loss.derivative(ri)).component_mul(&self.model.a(t))
    }

    fn supports(&self, oracle: Oracle) -> bool {
        matches!(oracle, Oracle::GradT | Oracle::Hessian | Oracle::Optimum)
    }

    fn grad_t(&self, x: &Vector, t: f64) -> Result<f64, ProblemError> {
        let r = self.model.residual(x, t);
        Ok(r.map(|ri| self.loss.derivative(ri)).dot(&self.model.residual_dot(x, t)))
    }

    fn hess_xx(&self, x: &Vector, t: f64) -> Result<Matrix, ProblemError> {
        let r = self.model.residual(x, t);
        let a = self.model.a(t);
        let diag = r.map(|ri| self.loss.second_derivative(ri)).component_mul(&a.component_mul(&a));
        Ok(Matrix::from_diagonal(&diag))
    }

    /// Both losses vanish only at zero residual, so `A(t)^{-1} b(t)` is the
    /// global minimizer with value zero.
    fn optimum(&self, t: f64, _hint: &Vector) -> Option<Optimum> {
        Some(Optimum {
            x: self.model.root(t),
            value: 0.0,
            kind: OptimumKind::ClosedForm,
        })
    }

    fn domain_guard(&self) -> Option<f64> {
        Some(1e4)
    }

    fn constants(&self) -> ProblemConstants {
        // sup |l''| = l''(0) = 1 for both losses
        let a_max = self.model.max_entry();
        ProblemConstants {
            l1: Some(a_max * a_max),
            ..ProblemConstants::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::finite_difference_check;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const LOSSES: [RobustLoss; 2] = [RobustLoss::GemanMcClure, RobustLoss::Welsch];

    #[test]
    fn loss_values() {
        for loss in LOSSES {
            assert_eq!(loss.value(0.0), 0.0);
            assert_eq!(loss.derivative(0.0), 0.0);
            assert_eq!(loss.second_derivative(0.0), 1.0);
        }
        assert_relative_eq!(RobustLoss::GemanMcClure.value(2.0), 1.0);
    }

    #[test]
    fn loss_derivatives_match_differences() {
        let e = 1e-6;
        for loss in LOSSES {
            for &y in &[-7.0, -1.3, -0.2, 0.4, 1.0, 3.3] {
                let d1 = (loss.value(y + e) - loss.value(y - e)) / (2.0 * e);
                let d2 = (loss.derivative(y + e) - loss.derivative(y - e)) / (2.0 * e);
                assert_relative_eq!(d1, loss.derivative(y), epsilon = 1e-8);
                assert_relative_eq!(d2, loss.second_derivative(y), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn oracles_pass_fd_check() {
        for loss in LOSSES {
            let report = finite_difference_check(&make_robust(loss), 100, 4).unwrap();
            assert!(report.passes(), "{loss:?}: {report:?}");
        }
    }

    #[test]
    fn optimum_and_constants() {
        for loss in LOSSES {
            let p = make_robust(loss);
            let opt = p.optimum(50.0, &Vector::zeros(10)).unwrap();
            assert!(p.value(&opt.x, 50.0).abs() < 1e-20);
            assert!(p.grad_x(&opt.x, 50.0).norm() < 1e-12);
            assert_relative_eq!(p.constants().l1.unwrap(), 110.25, epsilon = 1e-12);
            assert_eq!(p.domain_guard(), Some(1e4));
        }
    }

    proptest! {
        #[test]
        fn losses_are_even_and_bounded(y in -1e3f64..1e3) {
            let gm = RobustLoss::GemanMcClure;
            let w = RobustLoss::Welsch;
            prop_assert_eq!(gm.value(y), gm.value(-y));
            prop_assert_eq!(w.value(y), w.value(-y));
            prop_assert!((0.0..2.0).contains(&gm.value(y)));
            prop_assert!((0.0..1.0).contains(&w.value(y)) || w.value(y) == 1.0 && y.abs() > 8.0);
        }

        #[test]
        fn welsch_objective_is_at_most_ten(seed in any::<u64>(), t in 0.0f64..1e3) {
            let mut rng = crate::rng::SeededRng::new(seed);
            let x = rng.normal_vector(10) * 30.0;
            prop_assert!(make_robust(RobustLoss::Welsch).value(&x, t) <= 10.0);
        }
    }
}
