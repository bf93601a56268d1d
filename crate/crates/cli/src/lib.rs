//! Config-driven experiment runner: values party data, computes Shapley
//! values and rho-Shapley rewards, realizes rewards by noise injection and
//! evaluates the resulting models, writing CSV and JSON artifacts.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use run::{execute, Command};
