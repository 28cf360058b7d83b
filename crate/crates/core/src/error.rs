use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("insufficient data for class {class}: requested {requested}, available {available}")]
    InsufficientData {
        class: String,
        requested: usize,
        available: usize,
    },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("incompatible checkpoint: {}", offenders.join(", "))]
    IncompatibleCheckpoint { offenders: Vec<String> },

    #[error("checkpoint kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },

    #[error("vocabulary mismatch for {language}: checkpoint has {expected}, data has {found}")]
    VocabularyMismatch {
        language: String,
        expected: String,
        found: String,
    },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(#[from] CheckpointFormatError),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointFormatError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("truncated while reading {0}")]
    Truncated(&'static str),
    #[error("{0} trailing bytes after last tensor")]
    TrailingBytes(usize),
    #[error("unknown model kind tag {0}")]
    UnknownKind(u8),
    #[error("unknown tensor {0}")]
    UnknownTensor(String),
    #[error("invalid utf-8 in {0}")]
    Utf8(&'static str),
    #[error("{0}")]
    Header(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
