use std::path::PathBuf;

use recaudit_core::MeasureError;

/// Errors across the data, model, audit and mitigation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: malformed line: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no interactions survive preprocessing")]
    EmptyAfterFilter,
    #[error("train ratio must lie in (0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("user {0} has no training history")]
    NoTrainingHistory(u32),
    #[error("user {0} is unknown to the model")]
    UnknownUser(u32),
    #[error("empty recommendation list for user {0}")]
    EmptyList(u32),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("training diverged: {0}")]
    DivergedTraining(String),
    #[error("normal-equation solve failed: {0}")]
    SingularSystem(String),
    #[error("base sampling rate must lie in [0.01, 0.4], got {0}")]
    RateOutOfRange(f64),
    #[error("no inverse-stereotyped users and no bin-count override")]
    NoInverseStereotyped,
    #[error("artifact was produced under config hash {found}, expected {expected}")]
    ConfigHashMismatch { expected: String, found: String },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("bad report file: {0}")]
    Report(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(
        path: impl Into<PathBuf>,
        line: usize,
        reason: impl Into<String>,
    ) -> Self {
        Error::MalformedLine {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
