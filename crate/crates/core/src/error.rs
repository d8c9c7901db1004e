//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has zero variance; constant variables must be filtered upstream")]
    ZeroVarianceColumn(usize),

    #[error("need at least {required} observations, got {actual}")]
    InsufficientObservations { required: usize, actual: usize },

    #[error("variance estimation needs at least 3 observations, got {0}")]
    TooFewObservations(usize),

    #[error("shared target is undefined for a single group")]
    SingleGroup,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is numerically singular (pivot {pivot:.3e} below tolerance {tolerance:.3e})")]
    SingularMatrix { pivot: f64, tolerance: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("empty input")]
    EmptyInput,

    #[error("invalid rank range: k0={k0}, k1={k1}, n={n}")]
    InvalidRange { k0: usize, k1: usize, n: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("infeasible simulation config: {0}")]
    InfeasibleConfig(String),

    #[error("group '{name}' has {n} observations; at least 3 are required")]
    GroupTooSmall { name: String, n: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("labels reference unknown observation '{0}'")]
    UnknownObservation(String),

    #[error("observation '{0}' has no group label")]
    UnlabeledObservation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics themselves (as opposed to bad data
    /// or configuration). The CLI maps these to a distinct exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix { .. } | Error::NotPositiveDefinite
        )
    }
}
