use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver failure: {message} (residual {residual:.3e})")]
    SolverFailure { message: String, residual: f64 },

    #[error("line search stagnated after {trials} trials at Newton iteration {iteration} (slope {slope:.3e}, j {j:.6e})")]
    Stagnation {
        iteration: usize,
        trials: usize,
        slope: f64,
        j: f64,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
