//! Partitions and approximation experiments.

mod distance;
mod experiment;
mod partition;
mod residual;

pub use distance::{
    estimate_exceedance, estimate_weighted_exceedance, monotonicity_break, sup_distance,
    ucp_distance, Exceedance,
};
pub use experiment::{
    run_freeze_convergence, run_multiplicative_convergence, ApproximationConfig,
    ConvergenceReport, ConvergenceRow, DEFAULT_RELATIVE_EPSILONS,
};
pub use partition::{build_partition, intervals, mesh, partition_indices, PartitionLadder};
pub use residual::{
    log_ratio_residual, residual_path, run_residual_experiment, ResidualConfig,
    ResidualDecomposition, ResidualReport, ResidualRow,
};

use thiserror::Error;

use crate::market::MarketError;
use crate::portfolio::PortfolioError;

#[derive(Debug, Error, PartialEq)]
pub enum ConvergenceError {
    #[error("invalid partition ladder: {0}")]
    InvalidLadder(String),
    #[error("ladder level {level} out of range (ladder has {len} levels)")]
    LevelOutOfRange { level: usize, len: usize },
    #[error("wealth ensembles live on different grids")]
    GridMismatch,
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error("path {path} has nonpositive wealth at index {index}")]
    NonPositiveWealth { path: usize, index: usize },
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Portfolio(#[from] PortfolioError),
}
