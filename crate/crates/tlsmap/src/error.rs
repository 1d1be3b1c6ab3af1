//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown label {0:?}: expected good/bad/unknown or 0/1/3")]
    UnknownLabel(String),

    #[error("fingerprint is empty")]
    EmptyFingerprint,

    #[error("malformed segment {index}: {message}")]
    MalformedSegment { index: usize, message: String },

    #[error("header capture holds no keys")]
    EmptyCapture,

    #[error("dataset holds no records")]
    EmptyDataset,

    #[error("token {0:?} is not in the vocabulary")]
    UnknownToken(String),

    #[error("signature length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cannot index zero signatures")]
    EmptyIndex,

    #[error("forest is not built yet: call index() before querying")]
    IndexNotBuilt,

    #[error("id {0} is not indexed")]
    UnknownId(usize),

    #[error("domain {0:?} is not in the record store")]
    UnknownDomain(String),

    #[error("selection resolved to zero nodes")]
    EmptySelection,

    #[error("layout/record alignment: {0}")]
    Alignment(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("config: {0}")]
    Config(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
