use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("nonpositive variance {value} in cycle {cycle}")]
    NonpositiveVariance { cycle: usize, value: f64 },

    #[error("numerical degeneracy in eigenpair {index}: {detail}")]
    Degenerate { index: usize, detail: String },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("forecast variance is negative ({0:e}); use moments of the monotonized CDF instead")]
    NegativeVariance(f64),

    #[error("statistic undefined: {0}")]
    Undefined(String),

    #[error("domain error: {0}")]
    Domain(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Data(_) | Error::InsufficientData(_) | Error::NonpositiveVariance { .. } => {
                ErrorKind::Data
            }
            Error::Degenerate { .. }
            | Error::RankDeficient
            | Error::NegativeVariance(_)
            | Error::Undefined(_)
            | Error::Domain(_) => ErrorKind::Numerical,
        }
    }
}
