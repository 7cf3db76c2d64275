use thiserror::Error;

/// Errors produced by the probability engines, the trial simulator and the
/// operating-characteristic machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("covariance matrix is not positive semi-definite (pivot {pivot} = {value:e})")]
    NotPositiveSemiDefinite { pivot: usize, value: f64 },

    #[error("accuracy {target:e} not reached: achieved error estimate {achieved:e} (estimate {estimate})")]
    AccuracyNotReached {
        target: f64,
        achieved: f64,
        estimate: f64,
    },

    #[error("subset table drifted: singleton sum deviates from 1 by {0:e}")]
    Drift(f64),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("exact computation infeasible: ~{estimated} states exceeds cap {cap}; use simulation mode")]
    Infeasible { estimated: u64, cap: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
