use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no token survived vocabulary filtering")]
    EmptyVocabulary,

    #[error("bag-of-words total is zero")]
    ZeroTotal,

    #[error("line {line}: expected {expected} embedding values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("{what} is not a probability distribution (sum {sum})")]
    NotADistribution { what: String, sum: f64 },

    #[error("{0} regularizer has no masked-in topics")]
    EmptyMask(&'static str),

    #[error("soft-label column for topic {0:?} sums to zero")]
    DegenerateColumn(String),

    #[error("soft-label row {0} is all zeros")]
    DegenerateRow(usize),

    #[error("restricted topic mass {mass:e} below 1e-8 for document {doc}")]
    RenormalizationUnderflow { doc: usize, mass: f64 },

    #[error("surface name {0:?} has no tokens in the embedding table")]
    NamelessTopic(String),

    #[error("top-{needed} lists need at least {needed} vocabulary words, have {available}")]
    InsufficientVocab { needed: usize, available: usize },

    #[error("non-finite objective at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("vocabulary hash mismatch: checkpoint {checkpoint:016x}, corpus {corpus:016x}")]
    VocabularyMismatch { checkpoint: u64, corpus: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
