use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown app `{0}`")]
    UnknownApp(String),

    #[error("unknown sentence `{0}`")]
    UnknownSentence(String),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("{0} is undefined for empty input")]
    UndefinedMetric(&'static str),

    #[error("labeled set has no `{0}` document")]
    MissingClass(&'static str),

    #[error("vocabulary is empty")]
    EmptyVocabulary,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero vector for `{0}`")]
    ZeroVector(String),

    #[error("backend mismatch: `{expected}` vs `{found}`")]
    BackendMismatch { expected: String, found: String },

    #[error("vector store is empty")]
    EmptyStore,

    #[error("pair lists belong to different note sentences: `{0}` vs `{1}`")]
    MismatchedNote(String, String),

    #[error("no date for sentence `{0}`")]
    MissingDate(String),

    #[error("label sets cover different pairs")]
    IdSetMismatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(line: usize, message: impl ToString) -> Self {
        Error::Parse {
            line,
            message: message.to_string(),
        }
    }
}
