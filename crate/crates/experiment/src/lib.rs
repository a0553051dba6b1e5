//! Robustness experiments: split clean data, corrupt the training side over
//! a grid of error models, train every classifier and score it on the clean
//! test side against a clean-trained baseline.

use std::path::{Path, PathBuf};

mod pipeline;
pub mod report;
mod results;
pub mod spec;
pub mod synthetic;

pub use pipeline::{prepare, run, run_baseline, run_grid, write_outputs, CellInfo, ExperimentOutcome, Prepared};
pub use results::{
    compare, read_results, results_csv, top_k, CellError, GainDirection, GainEntry, RunResult, BASELINE,
};
pub use spec::{CellKey, ExperimentSpec};

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error(transparent)]
    Core(#[from] taintlab_core::Error),

    #[error(transparent)]
    Learn(#[from] taintlab_learners::LearnError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed results: {0}")]
    Results(String),

    #[error("no baseline result for classifier '{0}'")]
    MissingBaseline(String),
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
