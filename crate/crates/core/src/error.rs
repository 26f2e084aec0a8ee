use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the estimation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("rho must be a strictly positive probability vector: {0}")]
    InvalidRho(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("duplicate features in state {state} for actions {first} and {second}")]
    DuplicateFeatures {
        state: usize,
        first: usize,
        second: usize,
    },

    #[error("reward bound violated at state {state}, action {action}: |{reward}| > {bound}")]
    RewardBound {
        state: usize,
        action: usize,
        reward: f64,
        bound: f64,
    },

    #[error("best action in state {state} is not unique")]
    NonUniqueBest { state: usize },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "inconsistent instance: difference for state {state}, actions ({first}, {second}) lies outside the observed span"
    )]
    Inconsistent {
        state: usize,
        first: usize,
        second: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("optimal policy is not unique")]
    NonUniqueOptimalPolicy,

    #[error("analysis check failed: {0}")]
    CheckFailed(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Inconsistent { .. } => 3,
            Error::Numerical(_) | Error::NonUniqueOptimalPolicy | Error::CheckFailed(_) => 4,
            Error::Io { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
