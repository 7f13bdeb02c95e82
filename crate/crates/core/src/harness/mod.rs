//! Multi-seed experiment runner: presets, fan-out over algorithms and seeds,
//! smoothing and bands, and CSV, manifest and plot-data output.

mod config;
#[cfg(feature = "cli")]
mod output;
#[cfg(feature = "cli")]
mod runner;
mod stats;

use std::path::PathBuf;

use thiserror::Error;

use crate::agent::AgentError;
use crate::gridworld::GridError;

pub use crate::probe::{default_probes, qprobe, ProbeSpec};
pub use config::{
    default_episodes, reference_optimum, AgentOverrides, ExperimentConfig, GridOverrides,
    Overrides, RewardOverrides, TableRow, DEFAULT_SMOOTHING_WINDOW, EXPERIMENT_IDS,
};
#[cfg(feature = "cli")]
pub use output::{
    aggregate_file_name, plotdata, run_file_name, run_header, Manifest, RunEntry,
    CSV_SCHEMA_VERSION,
};
#[cfg(feature = "cli")]
pub use runner::{run_experiment, ExperimentResults, RunRecord};
pub use stats::{band, fmt_sig, smooth, tail_mean};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown experiment {0} (expected 1 to 5)")]
    UnknownExperiment(u8),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("experiment {experiment}: default layout gives optimum {optimum}, expected {reference}")]
    OracleMismatch { experiment: u8, optimum: f64, reference: f64 },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    /// Whether the error stems from bad user input rather than a failure
    /// while running.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            HarnessError::UnknownExperiment(_)
                | HarnessError::Config(_)
                | HarnessError::Grid(_)
                | HarnessError::Agent(AgentError::InvalidConfig(_))
        )
    }
}
