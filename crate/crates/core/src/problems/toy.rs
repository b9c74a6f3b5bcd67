use crate::problem::{InnerSolver, Matrix, Optimum, Oracle, Problem, ProblemConstants, ProblemError, Vector};

/// `f(x; t) = (x - 10 t)^2 / 20 + sin(x - 10 t)`, a one-dimensional
/// non-convex function translated at unit-free speed 10.
#[derive(Clone, Copy, Debug, Default)]
pub struct Toy;

pub fn make_toy() -> Toy {
    Toy
}

impl Toy {
    pub const SPEED: f64 = 10.0;

    fn shift(x: &Vector, t: f64) -> f64 {
        x[0] - Self::SPEED * t
    }

    /// `phi(y) = y^2 / 20 + sin y`
    pub fn phi(y: f64) -> f64 {
        y * y / 20.0 + y.sin()
    }

    pub fn phi_prime(y: f64) -> f64 {
        y / 10.0 + y.cos()
    }

    pub fn phi_second(y: f64) -> f64 {
        0.1 - y.sin()
    }
}

impl Problem for Toy {
    fn name(&self) -> &str {
        "toy"
    }

    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &Vector, t: f64) -> f64 {
        Self::phi(Self::shift(x, t))
    }

    fn grad_x(&self, x: &Vector, t: f64) -> Vector {
        Vector::from_element(1, Self::phi_prime(Self::shift(x, t)))
    }

    fn supports(&self, oracle: Oracle) -> bool {
        matches!(oracle, Oracle::GradT | Oracle::Hessian | Oracle::Optimum)
    }

    fn grad_t(&self, x: &Vector, t: f64) -> Result<f64, ProblemError> {
        Ok(-Self::SPEED * Self::phi_prime(Self::shift(x, t)))
    }

    fn hess_xx(&self, x: &Vector, t: f64) -> Result<Matrix, ProblemError> {
        Ok(Matrix::from_element(1, 1, Self::phi_second(Self::shift(x, t))))
    }

    /// Local minimizer reached by gradient descent from `hint`.
    fn optimum(&self, t: f64, hint: &Vector) -> Option<Optimum> {
        Some(InnerSolver::with_step(1.0 / 1.1).minimize(self, t, hint))
    }

    fn domain_guard(&self) -> Option<f64> {
        Some(1e8)
    }

    fn constants(&self) -> ProblemConstants {
        // |phi''| <= 1.1, grad_tx = -10 phi'', grad_tt = 100 phi''
        ProblemConstants {
            l1: Some(1.1),
            l2: Some(11.0),
            l3: Some(110.0),
            z: Some(Self::SPEED),
            ..ProblemConstants::default()
        }
    }
}
