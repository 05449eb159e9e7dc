use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("embedding file line {line}: {message}")]
    Embedding { line: usize, message: String },

    #[error("document {doc_id}: {message}")]
    Document { doc_id: String, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no in-vocabulary tokens in text")]
    NoKnownTokens,

    #[error("slug {0} is not rankable (needs at least two documents)")]
    NotRankable(String),

    #[error("no rankable slugs")]
    NoRankableSlugs,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch} (loss {loss}); try a lower learning rate")]
    Diverged { epoch: usize, loss: f64 },

    #[error("ranking needs at least two documents, got {0}")]
    TooFewDocuments(usize),

    #[error("invalid metric input: {0}")]
    Metric(String),

    #[error("statistical test undefined: {0}")]
    TestUndefined(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
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

    pub(crate) fn record(line: usize, message: impl Into<String>) -> Self {
        Error::Record {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn document(doc_id: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Document {
            doc_id: doc_id.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Diverged { .. } | Error::Json(_) => false,
            Error::NonFinite(_) | Error::TestUndefined(_) => false,
            Error::Fold { source, .. } => source.is_validation(),
            _ => true,
        }
    }
}
