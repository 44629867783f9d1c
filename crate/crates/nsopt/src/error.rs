use thiserror::Error;

/// Errors shared by the geometry, oracle and solver layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A precondition required a feasible point; `distance` is the
    /// Euclidean distance to the set.
    #[error("point lies outside the feasible set (distance {distance:.3e})")]
    Infeasible { distance: f64 },

    /// A solver iterate stopped being finite. Stochastic runs fail fast
    /// rather than propagate NaN into the output.
    #[error("non-finite {quantity} at iteration {iteration}")]
    NonFinite {
        iteration: usize,
        quantity: &'static str,
    },

    #[error("diagnostic unavailable: {0}")]
    DiagnosticUnavailable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
