use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the repair engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}` {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("invalid {what}: {reason}")]
    Invariant { what: &'static str, reason: String },

    #[error("fault spec entry {index} ({file}:{start}-{end}): {reason}")]
    FaultEntry {
        index: usize,
        file: String,
        start: usize,
        end: usize,
        reason: String,
    },

    #[error("chunk {chunk_id} cannot fit in a block of {budget} tokens (body alone needs {needed})")]
    UnbuildableBlock {
        chunk_id: usize,
        budget: usize,
        needed: usize,
    },

    #[error("reserved marker `{marker}` found in {file}:{line}")]
    ReservedMarker {
        marker: &'static str,
        file: String,
        line: usize,
    },

    #[error("malformed generator output: expected {expected} separators, found {found}")]
    MalformedOutput { expected: usize, found: usize },

    #[error("candidate file line {line}: {reason}")]
    CandidateLine { line: usize, reason: String },

    #[error("no surviving candidates for chunk {chunk_id}")]
    NoCandidates { chunk_id: usize },

    #[error("patch does not apply: {0}")]
    Apply(String),

    #[error("results row {row}: {reason}")]
    ResultsRow { row: usize, reason: String },

    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{0}")]
    Other(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
