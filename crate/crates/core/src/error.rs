use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("step mismatch: dataset holds step {expected}, sample has step {got}")]
    StepMismatch { expected: usize, got: usize },

    #[error("empty action set")]
    EmptyActionSet,

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("state {0:?} lies outside the discretized region")]
    Unmapped(Vec<f64>),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("run logs do not share a configuration: {0}")]
    FingerprintMismatch(String),

    #[error("replay diverged at episode {k}, step {h}: {reason}")]
    ReplayDivergence { k: usize, h: usize, reason: String },

    #[error("{}", format_violations(.0))]
    Validation(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Parse(String),
}

fn format_violations(v: &[String]) -> String {
    let mut s = String::from("invalid configuration:");
    for item in v {
        s.push_str("\n  - ");
        s.push_str(item);
    }
    s
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
