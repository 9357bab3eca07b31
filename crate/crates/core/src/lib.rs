//! Multiplicative buy-and-hold approximation of no-short-sales wealth.
//!
//! A wealth process driven by continuously rebalanced investment fractions
//! `pi` is approximated by simple strategies that rebalance on a partition
//! and freeze units in between. Following the fractions multiplicatively
//! keeps the approximating wealth nonnegative even across jumps, and it
//! converges uniformly in probability as the partition mesh shrinks.
//!
//! The crate is organised as:
//!
//! * [`market`]: price models and path simulation,
//! * [`portfolio`]: strategies, the wealth engines and the no-short-sales checker,
//! * [`convergence`]: partitions, ucp-distance estimation and approximation experiments,
//! * [`utility`]: utility functions, growth-optimal fractions and utility experiments,
//! * [`report`]: CSV emission for experiment reports.

pub mod convergence;
pub mod market;
pub mod portfolio;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod stats;
pub mod utility;
