use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    /// A data row whose field count differs from the header.
    #[error("row {row}: expected {expected} fields, found {found}")]
    Structural {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column '{column}': cannot parse {value:?} as {expected}")]
    TypeMismatch {
        row: usize,
        column: String,
        value: String,
        expected: &'static str,
    },

    #[error("unknown column '{0}'")]
    UnknownColumn(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    /// Malformed error-model configuration; `path` is a JSON path such as `$.models[0].p`.
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    /// The model is well formed but cannot be applied to this dataset.
    #[error("cannot apply error model: {0}")]
    InvalidModel(String),

    /// The dataset or manifest is not in the state the operation requires.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("preprocessing error: {0}")]
    Preprocess(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
