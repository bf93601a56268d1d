//! Collaborative model rewards for Bayesian regression.
//!
//! Parties pool their regression datasets. Each coalition's data is valued by
//! the information gain it yields on the model parameters, Shapley values turn
//! those coalition values into per-party contributions, and the rho-Shapley
//! scheme maps contributions to model-reward values. Each reward value is then
//! realized by training on the pooled data with Gaussian noise of a solved
//! variance injected into the other parties' outputs.
//!
//! Modules follow the pipeline:
//!
//! * [`game`]: coalitions, characteristic functions, Shapley values, the
//!   rho-Shapley reward scheme, thresholds and incentive checks.
//! * [`models`]: Bayesian linear regression, full GP and DTC sparse GP, with
//!   information gain and posterior predictive distributions.
//! * [`realize`]: noise-variance solving for target reward values.
//! * [`eval`]: MNLP and per-party evaluation reports.
//! * [`data`]: Friedman data, standardization, partitioning and CSV IO.

pub mod data;
pub mod eval;
pub mod game;
pub mod models;
pub mod realize;
pub mod rng;

mod par;

pub use game::{CharacteristicFunction, Coalition, RewardAllocation, ShapleyVector, Threshold};
pub use models::Dataset;
pub use models::{KernelSpec, ModelSpec, NoiseVector, PredictiveDistribution};
pub use realize::{Eta, RealizationPlan};
