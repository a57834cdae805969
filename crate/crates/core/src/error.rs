use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("non-finite loss at step {step} (scenarios {scenarios}): {detail}")]
    NonFinite {
        step: u64,
        scenarios: String,
        detail: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("NIfTI error on {path}: {source}")]
    Nifti {
        path: PathBuf,
        #[source]
        source: nifti::NiftiError,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-parsable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Range(_) => "range",
            Error::Degenerate(_) => "degenerate-input",
            Error::Contract(_) => "contract",
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::NonFinite { .. } => "non-finite",
            Error::Io { .. } => "io",
            Error::Nifti { .. } => "nifti",
            Error::Serde(_) => "serialization",
            Error::Csv(_) => "csv",
        }
    }

    /// Whether the failure stems from invalid user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Shape(_)
                | Error::Range(_)
                | Error::Degenerate(_)
                | Error::Contract(_)
                | Error::Config(_)
                | Error::Data(_)
        )
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
