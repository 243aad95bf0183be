//! Clutter-tracking experiments around `modal-lmmse-core`: the Monte-Carlo
//! bench, configuration files, result tables and run traces.

pub mod bench;
pub mod config;
pub mod output;
pub mod trace;

pub use bench::{run_experiment, AggregateResult, ExperimentConfig, FilterKind};
pub use config::{CliConfig, ConfigError, OutputFormat};
