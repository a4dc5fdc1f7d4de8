use std::path::PathBuf;

use thiserror::Error;

/// A single rejected row from a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MalformedRow {
    /// 1-based data row index (the header is row 0).
    pub row: usize,
    pub reason: String,
}

impl std::fmt::Display for MalformedRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "row {}: {}", self.row, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}")]
    FileUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus rejected: {rejected} of {total} rows malformed (first: {first})")]
    CorpusRejected {
        rejected: usize,
        total: usize,
        first: MalformedRow,
    },

    #[error("class {class} has {count} example(s); stratified split needs at least 2")]
    ClassTooSmall { class: usize, count: usize },

    #[error("train fraction {0} outside (0, 1)")]
    InvalidFraction(f64),

    #[error("no word reaches min_count {min_count}")]
    EmptyVocabulary { min_count: u64 },

    #[error("skipgram training corpus produced no tokens")]
    EmptyCorpus,

    #[error("cannot build a sentence matrix from an empty encoding")]
    EmptyEncoding,

    #[error("sentence of {len} column(s) is shorter than filter width {width}")]
    SentenceTooShort { len: usize, width: usize },

    #[error("non-finite loss {loss} at step {step}")]
    NonFiniteLoss { step: usize, loss: f64 },

    #[error("no sentence matrix supplied for embedding dimension {0}")]
    MissingDimension(usize),

    #[error("cannot average embeddings of an empty sequence")]
    EmptySequence,

    #[error("feature dimension {got} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("committee size {size} exceeds member count {members}")]
    SizeExceedsCommittee { size: usize, members: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid {what} file: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn unreadable(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::FileUnreadable {
            path: path.into(),
            source,
        }
    }
}
