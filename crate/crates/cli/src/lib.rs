//! Experiment runner: reads a JSON config, trains, and writes figure-ready CSV
//! plus a `summary.json` into an output directory.

pub mod config;
pub mod error;
pub mod output;
pub mod runners;
pub mod stats;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use output::OutDir;
pub use runners::run;
