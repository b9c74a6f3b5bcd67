//! Prediction-correction methods for tracking minimizers of smooth
//! time-varying objectives, with benchmark problems, theory checks and an
//! experiment harness.

pub mod analysis;
pub mod experiment;
pub mod par;
pub mod problem;
pub mod problems;
pub mod rng;
pub mod solvers;
