use crate::DocId;

/// Errors raised by the caches, the vector store and the workload tools.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("embedding must have at least one component")]
    EmptyEmbedding,

    #[error("embedding component {index} is not finite")]
    NonFinite { index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("duplicate document id {0}")]
    DuplicateDocId(DocId),

    #[error("unknown document id {0}")]
    UnknownDocId(DocId),

    #[error("id sets differ in size: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("workload generation failed: {0}")]
    Generation(String),

    #[error("vector store failure: {0}")]
    Store(String),

    #[error("malformed corpus file: {0}")]
    CorpusFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
