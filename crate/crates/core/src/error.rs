use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("division by zero in GF(2^{m})")]
    DivisionByZero { m: u32 },

    #[error("invalid field parameters: {0}")]
    InvalidField(String),

    #[error("invalid code parameters: {0}")]
    InvalidCode(String),

    #[error("arity mismatch: {0}")]
    Arity(String),

    #[error("underdetermined: need {needed} points, got {got}")]
    Underdetermined { needed: usize, got: usize },

    #[error("assignment at position {position} is inconsistent with the interpolated codeword")]
    Inconsistent { position: usize },

    #[error("generator matrix is rank deficient (span has {points} points, expected {expected})")]
    Rank { points: usize, expected: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("conditioning context has zero probability")]
    ZeroContext,

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("capacity exceeded: {what} needs {needed}, cap is {cap}")]
    Capacity {
        what: &'static str,
        needed: u128,
        cap: u128,
    },

    #[error("coefficient f({k}, {len}) = {value:e} is negative beyond rounding noise")]
    NegativeCoefficient { k: usize, len: usize, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
