//! Bayesian regression models: linear regression, full GP and DTC sparse GP.
//!
//! All models share a Gaussian likelihood with per-point noise variances, so
//! the information gain on the parameters is a log-determinant that never
//! depends on the observed outputs.

mod dataset;
mod gain;
mod kernel;
mod linalg;
mod predict;
mod spec;

pub use dataset::Dataset;
pub(crate) use gain::{check_parties, party_row_ranges};
pub use gain::{coalition_values, information_gain, GainOperator};
pub use kernel::{kernel_matrix, KernelSpec};
pub use predict::{posterior_predict, PointPredictor, Posterior, PredictiveDistribution};
pub use spec::{ModelSpec, NoiseVector};

use thiserror::Error;

use crate::game::GameError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("invalid noise vector: {0}")]
    InvalidNoise(String),
    #[error(
        "{what} is not positive definite even with jitter {jitter:e} \
         (size {size}, diagonal range [{min_diag:e}, {max_diag:e}])"
    )]
    NotPositiveDefinite { what: String, size: usize, jitter: f64, min_diag: f64, max_diag: f64 },
    #[error("information gain {0} is negative beyond tolerance")]
    NegativeGain(f64),
    #[error(transparent)]
    Game(#[from] GameError),
}
