//! Strategies, wealth engines and the no-short-sales constraint.

mod engines;
mod partition;
mod simplex;
mod strategy;
mod units;
mod wealth;

pub use engines::{
    additive_path, continuous_path, multiplicative_path, target_tracking_schedule,
    wealth_additive_units, wealth_continuous, wealth_multiplicative,
    wealth_multiplicative_with_units, AdditiveWealth,
};
pub use partition::{max_gap, Partition, PartitionRule};
pub use simplex::{SimplexVector, SIMPLEX_TOLERANCE};
pub use strategy::{
    coarse_breakpoints, freeze_strategy, FractionCallback, FractionRule, FractionStrategy,
    FractionTable, Observation,
};
pub use units::{
    check_no_short_sales, fractions_from_units, units_from_fractions, UnitInterval, UnitSchedule,
    Violation, ViolationKind, COST_TOLERANCE,
};
pub use wealth::{
    bankruptcy_index, epsilon_shift, first_negative, first_zero, Engine, WealthPaths,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PortfolioError {
    #[error("not a simplex vector: {0}")]
    NotInSimplex(String),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid wealth {0}")]
    InvalidWealth(f64),
    #[error("positive fraction in asset {asset} whose price is zero")]
    BankruptAsset { asset: usize },
    #[error("no-short-sales violation ({0}): {1}")]
    ConstraintViolation(ViolationKind, String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid unit schedule: {0}")]
    InvalidSchedule(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("path {path} revives after bankruptcy at index {index}")]
    AbsorptionViolation { path: usize, index: usize },
    #[error("path {path} has negative constrained wealth at index {index}")]
    NegativeWealth { path: usize, index: usize },
    #[error("epsilon {eps} must lie strictly between 0 and the initial wealth {x}")]
    InvalidEpsilon { eps: f64, x: f64 },
    #[error("{0} wealth is not a no-short-sales wealth")]
    Unconstrained(Engine),
    #[error("path {path} starts at {found}, expected {expected}")]
    InitialWealthMismatch { path: usize, found: f64, expected: f64 },
}
