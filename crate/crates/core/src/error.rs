use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: malformed line: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("attribute count mismatch: graph has {expected} nodes, attribute file has {found} rows")]
    AttributeCountMismatch { expected: usize, found: usize },

    #[error("node id {id} out of range (n = {n})")]
    NodeOutOfRange { id: usize, n: usize },

    #[error("unknown node label `{label}` at {path}:{line}")]
    UnknownNode {
        path: PathBuf,
        line: usize,
        label: String,
    },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph too small: {0}")]
    GraphTooSmall(String),

    #[error("dyadic group {group} has no rows")]
    EmptyGroup { group: usize },

    #[error("dyadic group {group} has no rows with label {missing_label}")]
    DeficientGroup { group: usize, missing_label: u8 },

    #[error("AUC undefined: labels contain a single class")]
    SingleClassLabels,

    #[error("class {class} absent from the probe's test split")]
    ClassAbsentFromTest { class: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
