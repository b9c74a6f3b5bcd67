use std::f64::consts::TAU;

use crate::problem::Vector;

pub(crate) const DIM: usize = 10;

/// Diagonal `A(t)` and right-hand side `b(t)` shared by the regression
/// benchmarks, with 1-based phases `2 pi i / 10`:
///
/// * `A_ii(t) = s_i (1 + wobble cos(t / 200 + 2 pi i / 10))`, where `s_i` is
///   `low` for `i <= 5` and `high` otherwise;
/// * `b_i(t) = amplitude sin(t / 100 + 2 pi i / 10)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct DiagonalModel {
    pub low: f64,
    pub high: f64,
    pub wobble: f64,
    pub amplitude: f64,
}

impl DiagonalModel {
    fn phase(i: usize) -> f64 {
        TAU * (i + 1) as f64 / 10.0
    }

    fn scale(&self, i: usize) -> f64 {
        if i < 5 {
            self.low
        } else {
            self.high
        }
    }

    pub fn a(&self, t: f64) -> Vector {
        Vector::from_fn(DIM, |i, _| {
            self.scale(i) * (1.0 + self.wobble * (t / 200.0 + Self::phase(i)).cos())
        })
    }

    pub fn a_dot(&self, t: f64) -> Vector {
        Vector::from_fn(DIM, |i, _| {
            -self.scale(i) * self.wobble / 200.0 * (t / 200.0 + Self::phase(i)).sin()
        })
    }

    pub fn b(&self, t: f64) -> Vector {
        Vector::from_fn(DIM, |i, _| self.amplitude * (t / 100.0 + Self::phase(i)).sin())
    }

    pub fn b_dot(&self, t: f64) -> Vector {
        Vector::from_fn(DIM, |i, _| self.amplitude / 100.0 * (t / 100.0 + Self::phase(i)).cos())
    }

    /// `A(t) x - b(t)`
    pub fn residual(&self, x: &Vector, t: f64) -> Vector {
        self.a(t).component_mul(x) - self.b(t)
    }

    /// `d/dt (A(t) x - b(t))` at fixed `x`.
    pub fn residual_dot(&self, x: &Vector, t: f64) -> Vector {
        self.a_dot(t).component_mul(x) - self.b_dot(t)
    }

    /// `A(t)^{-1} b(t)`
    pub fn root(&self, t: f64) -> Vector {
        self.b(t).component_div(&self.a(t))
    }

    /// Largest diagonal entry over all `t`.
    pub fn max_entry(&self) -> f64 {
        self.low.max(self.high) * (1.0 + self.wobble)
    }

    /// Smallest diagonal entry over all `t`.
    pub fn min_entry(&self) -> f64 {
        self.low.min(self.high) * (1.0 - self.wobble)
    }
}
