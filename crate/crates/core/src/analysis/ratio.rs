use crate::problem::Matrix;
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioSelfTest {
    pub trials: usize,
    /// `max (|<a, x>| / ||A^T x|| - ||a|| / sigma_min(A))`.
    pub max_violation: f64,
}

impl RatioSelfTest {
    pub fn passed(&self) -> bool {
        self.max_violation <= 1e-9
    }
}

/// Samples full-row-rank `3 x 5` matrices and checks
/// `|<a, x>| / ||A^T x|| <= ||a|| / sigma_min(A)` for `a, x` in `R^3`.
pub fn ratio_bound_selftest(trials: usize, seed: u64) -> RatioSelfTest {
    ratio_bound_selftest_with_shape(trials, seed, 3, 5)
}

/// Same check for `rows x cols` matrices, `rows <= cols`.
///
/// With full row rank, `A^T` is injective and `||A^T x|| >= sigma_min ||x||`,
/// so the bound follows from Cauchy-Schwarz. Note that `x` lives in the row
/// space dimension: for `x` in `R^cols` the ratio `|<a, x>| / ||A x||` is
/// unbounded on the null space of `A` when `rows < cols`.
pub fn ratio_bound_selftest_with_shape(trials: usize, seed: u64, rows: usize, cols: usize) -> RatioSelfTest {
    assert!(rows >= 1 && rows <= cols, "need 1 <= rows <= cols");
    let mut rng = SeededRng::new(seed);
    let mut max_violation = f64::NEG_INFINITY;
    let mut done = 0;
    while done < trials {
        let a_mat = Matrix::from_fn(rows, cols, |_, _| rng.normal());
        let a = rng.normal_vector(rows);
        let x = rng.normal_vector(rows);
        let sigma_min = a_mat.singular_values().min();
        if sigma_min <= 1e-8 {
            continue;
        }
        let lhs = a.dot(&x).abs() / (a_mat.transpose() * &x).norm();
        let rhs = a.norm() / sigma_min;
        max_violation = max_violation.max(lhs - rhs);
        done += 1;
    }
    RatioSelfTest {
        trials,
        max_violation,
    }
}

/// Single evaluation of both sides, for hand-built instances.
#[cfg(test)]
pub(crate) fn ratio_sides(a_mat: &Matrix, a: &crate::problem::Vector, x: &crate::problem::Vector) -> (f64, f64) {
    let lhs = a.dot(x).abs() / (a_mat.transpose() * x).norm();
    (lhs, a.norm() / a_mat.singular_values().min())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Vector;
    use approx::assert_relative_eq;

    #[test]
    fn identity_reduces_to_cauchy_schwarz() {
        let id = Matrix::identity(3, 3);
        let a = Vector::from_vec(vec![1.0, 2.0, -2.0]);
        let x = Vector::from_vec(vec![0.5, 0.1, 3.0]);
        let (lhs, rhs) = ratio_sides(&id, &a, &x);
        assert_relative_eq!(rhs, 3.0);
        assert!(lhs <= rhs);
    }

    #[test]
    fn aligned_vectors_are_tight() {
        let id = Matrix::identity(3, 3);
        let a = Vector::from_vec(vec![1.0, 2.0, -2.0]);
        let (lhs, rhs) = ratio_sides(&id, &a, &(&a * 0.7));
        assert_relative_eq!(lhs, rhs, epsilon = 1e-15);
    }

    #[test]
    fn random_instances_never_violate() {
        let report = ratio_bound_selftest(200, 1);
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.trials, 200);
        for (m, n) in [(1, 1), (2, 7), (4, 4)] {
            assert!(ratio_bound_selftest_with_shape(100, 2, m, n).passed());
        }
    }
}
