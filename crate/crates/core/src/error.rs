//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors surfaced by corpus loading, indexing, embedding and pipeline runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("label references unknown id {id:?}")]
    DanglingLabel { id: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("vocabulary is empty after applying filters ({filters})")]
    EmptyVocabulary { filters: String },

    #[error("vector dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("duplicate embedding key ({doc_id}, {unit_index})")]
    DuplicateEmbedding { doc_id: String, unit_index: i32 },

    #[error("no embedding for paragraph ({doc_id}, {unit_index})")]
    MissingEmbedding { doc_id: String, unit_index: i32 },

    #[error("cannot build a similarity matrix with an empty {side} side")]
    EmptyMatrixSide { side: &'static str },

    #[error("run contains query {id:?} with no entry in the label set")]
    UnknownQuery { id: String },

    #[error("duplicate document id {id:?} in corpus")]
    DuplicateDocId { id: String },

    #[error("query {id:?} has an empty candidate pool")]
    EmptyPool { id: String },

    #[error("invalid configuration: {message}")]
    InvalidConfig { message: String },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
