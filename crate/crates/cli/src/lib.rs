//! Command-line front end for A-metric fixed-point experiments.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run, Command, Outcome, RunReport, Verdict};
pub use config::ExperimentConfig;
pub use error::CliError;
