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

    #[error("{file}:{line}: malformed record{}: {message}", record_label(.record))]
    MalformedRecord {
        file: PathBuf,
        line: usize,
        record: Option<String>,
        message: String,
    },

    #[error("mashup `{mashup}` references unknown service `{service}`")]
    DanglingService { mashup: String, service: String },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("empty vocabulary after text normalization")]
    EmptyVocabulary,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("vector file is missing ids: {}", .0.join(", "))]
    MissingVectors(Vec<String>),

    #[error("invalid vector file: {0}")]
    VectorFormat(String),

    #[error("service position {0} selected twice")]
    DuplicateSelection(usize),

    #[error("attention weights need at least one selected service")]
    EmptySelection,

    #[error("service position {position} out of range (|S| = {services})")]
    PositionOutOfRange { position: usize, services: usize },

    #[error("empty negative-sampling pool: mashup covers every service")]
    EmptyNegativePool,

    #[error("ground truth set is empty")]
    EmptyGroundTruth,

    #[error("non-finite objective at mashup `{mashup}`, step {step}")]
    NonFiniteObjective { mashup: String, step: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("reports are not comparable: {0}")]
    IncomparableReports(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn record_label(record: &Option<String>) -> String {
    match record {
        Some(id) => format!(" `{id}`"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
