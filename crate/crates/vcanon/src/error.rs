use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] vcanon_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: unsupported audio: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("{path}: cannot decode record: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("converting {utterance_id}: {source}")]
    Conversion { utterance_id: String, source: vcanon_core::Error },
    #[error("evaluation: {0}")]
    Evaluation(String),
    #[error("external conversion does not match the trial set: missing {missing:?}, unexpected {extra:?}")]
    Mismatch { missing: Vec<String>, extra: Vec<String> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 for configuration and input problems, 3 for
    /// conversion and model training, 4 for evaluation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(_) | Error::Conversion { .. } => 3,
            Error::Evaluation(_) => 4,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
