//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected 42 comma-separated fields (41 features + label), found {found}")]
    FieldCount { found: usize },

    #[error("field {field} ({name}) is not numeric: {value:?}")]
    NumericParse {
        field: usize,
        name: &'static str,
        value: String,
    },

    #[error("unknown {column} value {value:?}")]
    UnknownCategory { column: &'static str, value: String },

    #[error("unknown attack label {0:?}")]
    UnknownLabel(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("node {node} has non-positive RSSI sum {value}")]
    NonPositiveRssi { node: u32, value: f64 },

    #[error("cannot elect {requested} cluster heads from {available} nodes")]
    InsufficientNodes { requested: usize, available: usize },

    #[error("cluster has no members")]
    EmptyCluster,

    #[error("{what} out of range: {value}")]
    Range { what: &'static str, value: f64 },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("model has not been fitted")]
    UnfittedModel,

    #[error("exhaustive enumeration over {units} units exceeds the limit of {limit}")]
    TooLarge { units: usize, limit: usize },

    #[error("transition row for state {state}, action {action} sums to {sum}, not 1")]
    NonStochasticTransition {
        state: usize,
        action: usize,
        sum: f64,
    },

    #[error("state discretizer has not been fitted")]
    UnfittedSpec,

    #[error("confusion counts are empty")]
    EmptyCounts,

    #[error("no positive verdicts (TP + FP = 0)")]
    NoPositiveVerdicts,

    #[error("{0} is undefined for these counts")]
    UndefinedMetric(&'static str),

    #[error("ROC needs both classes present in the scored set")]
    SingleClass,

    #[error("config error{}: {message}", location(.key, .line))]
    Config {
        key: Option<String>,
        line: Option<usize>,
        message: String,
    },

    #[error("dataset error in {path}: {message}")]
    Dataset { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn location(key: &Option<String>, line: &Option<usize>) -> String {
    match (key, line) {
        (Some(k), Some(l)) => format!(" (key {k:?}, line {l})"),
        (Some(k), None) => format!(" (key {k:?})"),
        (None, Some(l)) => format!(" (line {l})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config {
            key: None,
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn config_key(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: Some(key.into()),
            line: None,
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 1 config, 2 data, 3 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) => 1,
            Error::FieldCount { .. }
            | Error::NumericParse { .. }
            | Error::UnknownCategory { .. }
            | Error::UnknownLabel(_)
            | Error::Dataset { .. }
            | Error::EmptyTrainingSet
            | Error::SingleClass
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
