use crate::problem::{Matrix, Optimum, OptimumKind, Oracle, Problem, ProblemConstants, ProblemError, Vector};

use super::diagonal::{DiagonalModel, DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinRegVariant {
    /// `A = diag(0.1 x5, 10 x5)`
    StaticA,
    /// Same scales with a 5% cosine wobble on every diagonal entry.
    DriftingA,
}

/// `f(x; t) = ||A(t) x - b(t)||^2 / 2` in ten dimensions with
/// `b_i(t) = 10 sin(t / 100 + 2 pi i / 10)`.
#[derive(Clone, Debug)]
pub struct LinReg {
    variant: LinRegVariant,
    model: DiagonalModel,
}

pub fn make_linreg(variant: LinRegVariant) -> LinReg {
    let wobble = match variant {
        LinRegVariant::StaticA => 0.0,
        LinRegVariant::DriftingA => 0.05,
    };
    LinReg {
        variant,
        model: DiagonalModel {
            low: 0.1,
            high: 10.0,
            wobble,
            amplitude: 10.0,
        },
    }
}

impl LinReg {
    pub fn variant(&self) -> LinRegVariant {
        self.variant
    }

    pub fn b(&self, t: f64) -> Vector {
        self.model.b(t)
    }

    /// `||b'(t)||`, constant `sqrt(5) / 10` for every `t`.
    pub fn b_dot_norm(&self, t: f64) -> f64 {
        self.model.b_dot(t).norm()
    }

    /// Lipschitz constant in `t` of `f` along steps of length `h` that start
    /// in the sublevel set `f <= max_value`. Only defined for the static
    /// variant, where `|grad_t f| = |<Ax - b, b'>| <= sqrt(2 f) ||b'||` and
    /// `sqrt(2 f)` grows by at most `||b'|| h` within one step.
    pub fn static_g2(&self, max_value: f64, h: f64) -> Option<f64> {
        if self.variant != LinRegVariant::StaticA {
            return None;
        }
        let b_dot = 5f64.sqrt() / 10.0;
        Some(b_dot * ((2.0 * max_value.max(0.0)).sqrt() + b_dot * h))
    }
}

impl Problem for LinReg {
    fn name(&self) -> &str {
        match self.variant {
            LinRegVariant::StaticA => "linreg_static",
            LinRegVariant::DriftingA => "linreg_drift",
        }
    }

    fn dim(&self) -> usize {
        DIM
    }

    fn value(&self, x: &Vector, t: f64) -> f64 {
        0.5 * self.model.residual(x, t).norm_squared()
    }

    fn grad_x(&self, x: &Vector, t: f64) -> Vector {
        self.model.a(t).component_mul(&self.model.residual(x, t))
    }

    fn supports(&self, oracle: Oracle) -> bool {
        matches!(oracle, Oracle::GradT | Oracle::Hessian | Oracle::Optimum)
    }

    fn grad_t(&self, x: &Vector, t: f64) -> Result<f64, ProblemError> {
        Ok(self.model.residual(x, t).dot(&self.model.residual_dot(x, t)))
    }

    fn hess_xx(&self, _x: &Vector, t: f64) -> Result<Matrix, ProblemError> {
        let a = self.model.a(t);
        Ok(Matrix::from_diagonal(&a.component_mul(&a)))
    }

    fn optimum(&self, t: f64, _hint: &Vector) -> Option<Optimum> {
        Some(Optimum {
            x: self.model.root(t),
            value: 0.0,
            kind: OptimumKind::ClosedForm,
        })
    }

    fn constants(&self) -> ProblemConstants {
        let a_max = self.model.max_entry();
        let a_min = self.model.min_entry();
        let mut c = ProblemConstants {
            l1: Some(a_max * a_max),
            mu: Some(a_min * a_min),
            ..ProblemConstants::default()
        };
        if self.variant == LinRegVariant::StaticA {
            // grad_tx f = -A b' and |grad_t f| / ||grad_x f|| <= ||b'|| / sigma_min(A)
            let b_dot = 5f64.sqrt() / 10.0;
            c.l2 = Some(a_max * b_dot);
            c.z = Some(b_dot / a_min);
        }
        c
    }
}
