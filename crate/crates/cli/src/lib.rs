//! Configuration, orchestration and reporting for the experiment runner.
pub mod config;
mod ini;
pub mod manifest;
pub mod run;
pub mod summarize;

pub use ini::ConfigIssue;
