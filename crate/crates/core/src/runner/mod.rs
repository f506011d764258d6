//! Configuration parsing and single-experiment wiring for the CLI.

mod config;
mod experiment;
mod tools;

pub use config::{parse_config, DataSource, InitPoint, RawConfig, RunConfig, SolverChoice, TopologySpec, KNOWN_KEYS};
pub use experiment::{
    build_mixing, decentralized_step, load_dataset, output_path, prepare, run_experiment, run_prepared, write_csv, Prepared, RunOutput,
    INVARIANT_TOL,
};
pub use tools::{lmo_self_test, spectrum_report, LmoReport, SpectrumReport};

use std::path::PathBuf;

use thiserror::Error;

use crate::graph::GraphError;
use crate::problem::ProblemError;
use crate::solvers::SolverError;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error("topology: {0}")]
    Topology(#[from] GraphError),
    #[error("dataset: {0}")]
    Data(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// Process exit status: 1 for bad configuration, 2 for failures during
    /// the run (including invariant breaches), 3 for I/O and dataset parsing.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Topology(_) => 1,
            RunError::Data(ProblemError::Io(_) | ProblemError::Parse { .. } | ProblemError::Empty) => 3,
            RunError::Data(_) => 1,
            RunError::Solver(_) => 2,
            RunError::Io { .. } => 3,
        }
    }
}
