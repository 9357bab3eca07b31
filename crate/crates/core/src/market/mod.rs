//! Asset-price models, path simulation and return increments.
//!
//! Prices are nonnegative and absorbed at zero. Diffusive steps are exact
//! log-normal; jumps fire at grid times with probability `lambda * dt`
//! and are flagged per step so that continuous and jump parts of the
//! returns can be separated exactly downstream.

mod fixture;
mod grid;
mod model;
mod returns;
mod simulate;

pub use fixture::PriceTable;
pub use grid::TimeGrid;
pub use model::{
    factor_correlation, Diffusion, JumpLaw, Jumps, ModelSpec, MAX_STEP_JUMP_PROBABILITY,
};
pub use returns::{path_returns, returns_from_prices, step_return, ReturnIncrements};
pub use simulate::{simulate, AssetPaths, PathView, SimulatedPath, Simulator};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("dimension mismatch: expected {expected} assets, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("correlation matrix cannot be factorized: {0}")]
    InvalidCorrelation(String),
    #[error("jump size {0} is below -1")]
    JumpBelowMinusOne(f64),
    #[error(
        "jump resolution rule violated: lambda * dt = {probability} must be below {limit}; refine the grid"
    )]
    JumpResolution { probability: f64, limit: f64 },
    #[error("invalid fixture: {0}")]
    InvalidFixture(String),
    #[error("asset {asset} revives after ruin at index {index}")]
    AbsorptionViolation { asset: usize, index: usize },
}
