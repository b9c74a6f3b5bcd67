//! Benchmark problems and ratings-data ingestion.

mod diagonal;
mod linreg;
mod mf;
mod ratings;
mod robust;
mod toy;

pub use linreg::{make_linreg, LinReg, LinRegVariant};
pub use mf::{make_mf, MatrixFactorization, MfParams, Regularizer, WarmStart};
pub use ratings::{filter_min_counts, load_ratings, parse_ratings, ratings_from_factors, synth_ratings, DataError, Rating, RatingsDataset, SynthSpec};
pub use robust::{make_robust, RobustLoss, RobustRegression};
pub use toy::{make_toy, Toy};
