use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("non-finite activation at unit {unit}")]
    NumericOverflow { unit: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("sequencing error: expected t = {expected}, got t = {got}")]
    Sequencing { expected: u64, got: u64 },

    #[error("time index {t} out of range (store length {len})")]
    OutOfRange { t: u64, len: u64 },

    #[error("history contains no completed trials")]
    EmptyHistory,

    #[error("unknown trial id {0}")]
    UnknownTrial(usize),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("environment error: {0}")]
    Environment(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {what} at line {line}: {msg}")]
    Parse {
        what: &'static str,
        line: usize,
        msg: String,
    },

    #[error("checkpoint at {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn parse_err(what: &'static str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        what,
        line,
        msg: msg.into(),
    }
}
