//! Experiment runner and persistence.

pub mod chart;
pub mod config;
pub mod runner;

use std::path::PathBuf;

use thiserror::Error;

pub use chart::{emit_chart, read_trace_csv, render_chart, ChartOptions, Quantity, TraceTable};
pub use config::{ExperimentConfig, Preset, ResolvedConfig, System};
pub use runner::{run_experiment, Outcome, RunManifest, RunOutputs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Numerics(#[from] crate::Error),

    #[error("serialization: {0}")]
    Serialize(String),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
