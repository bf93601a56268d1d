//! Cooperative games over party coalitions.
//!
//! Coalitions are little-endian bitmasks (party 0 is bit 0). A
//! [`CharacteristicFunction`] stores one value per mask in integer order.

mod checks;
mod coalition;
mod reward;
mod shapley;

pub use checks::{
    check_fairness_axioms, check_incentives, check_monotone, check_party_monotonicity, check_strict_monotonicity,
    check_submodular, FairnessReport, IncentiveReport, MonotoneWitness, SubmodularWitness, Violation, AXIOM_TOLERANCE,
};
pub use coalition::{CharacteristicFunction, Coalition, MAX_PARTIES};
pub use reward::{
    allocate, dominated_set, rho_r_threshold, rho_s_threshold, rho_shapley_rewards, RewardAllocation, Threshold,
};
pub use shapley::{exact_shapley, sampled_shapley, ShapleyMethod, ShapleyVector, EXACT_SHAPLEY_LIMIT};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("party count {0} is outside 1..={MAX_PARTIES}")]
    PartyCount(usize),
    #[error("expected {expected} coalition values for {n} parties, got {got}")]
    ValueCount { n: usize, expected: usize, got: usize },
    #[error("value of the empty coalition must be 0, got {0}")]
    NonZeroEmpty(f64),
    #[error("coalition {mask:#b} has non-finite value {value}")]
    NonFinite { mask: u32, value: f64 },
    #[error("coalition mask {mask:#b} has members outside {n} parties")]
    MaskOutOfRange { mask: u32, n: usize },
    #[error("exact enumeration supports at most {limit} parties, got {n}; use sampled_shapley")]
    EnumerationLimit { n: usize, limit: usize },
    #[error("rho must lie in [0, 1], got {0}")]
    RhoOutOfRange(f64),
    #[error("invalid reward input: {0}")]
    InvalidInput(String),
    #[error("inconsistent game: {0}")]
    Inconsistent(String),
    #[error("party counts differ: {0} vs {1}")]
    PartyMismatch(usize, usize),
    #[error("premise not satisfied: {0}")]
    PremiseNotSatisfied(String),
}
