//! Utility functions, growth optimisation and the utility experiments.

mod experiments;
mod function;
mod growth;
mod supermart;

pub use experiments::{
    run_indirect_utility_gap, run_terminal_convergence, run_uniform_convergence, KmRow,
    UtilityConfig, UtilityFocus, UtilityReport, UtilityRow, KM_LEVELS,
};
pub use function::{evaluate_utility, expected_utility, UtilityEstimate, UtilityFn};
pub use growth::{
    lattice_certificate, optimize_constant_fraction, project_capped_simplex, GrowthProblem,
    OptimizerResult,
};
pub use supermart::{
    supermartingale_convergence_check, SupermartingaleConfig, SupermartingaleFamily,
    SupermartingaleReport, SupermartingaleRow,
};

use thiserror::Error;

use crate::convergence::ConvergenceError;
use crate::market::MarketError;
use crate::portfolio::PortfolioError;

#[derive(Debug, Error, PartialEq)]
pub enum UtilityError {
    #[error("invalid utility: {0}")]
    InvalidUtility(String),
    #[error("expected utility needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),
    #[error("invalid growth problem: {0}")]
    InvalidProblem(String),
    #[error("objective is not concave: {0}")]
    NonConcave(String),
    #[error("change-of-measure weights cannot be normalised (sum {0})")]
    WeightNormalization(f64),
    #[error("invalid supermartingale family: {0}")]
    InvalidFamily(String),
    #[error(transparent)]
    Convergence(#[from] ConvergenceError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Portfolio(#[from] PortfolioError),
}
