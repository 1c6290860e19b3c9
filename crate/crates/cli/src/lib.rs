//! Configuration-driven experiment runner for the fractional Laplacian toolkit.

pub mod config;
pub mod report;
pub mod runner;
pub mod scenarios;
pub mod seeds;

pub use config::{ConfigErrors, ExperimentConfig};
pub use report::{CheckBlock, ExperimentReport};
pub use runner::run_scenario;
