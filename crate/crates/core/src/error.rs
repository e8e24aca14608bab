use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    Validation(String),

    /// A precondition of a pure computation was not met.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Evaluator(#[from] EvaluatorError),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

/// Failure of the measuring machinery itself, as opposed to a build that
/// does not compile (which is an infeasible measurement, not an error).
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EvaluatorError {
    #[error("failed to run evaluator command: {0}")]
    Spawn(String),
    #[error("evaluator exited with status {code}: {stderr}")]
    Status { code: i32, stderr: String },
    #[error("evaluator timed out after {0} s")]
    Timeout(u64),
    #[error("unparseable evaluator output: {0}")]
    Output(String),
    #[error("evaluator I/O failure: {0}")]
    Io(String),
}
