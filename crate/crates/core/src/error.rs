use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("quadrature did not converge: achieved error estimate {achieved:e}, requested {requested:e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("closure fit failed: best residual {residual:e} exceeds tolerance {tolerance:e}")]
    FitFailure { residual: f64, tolerance: f64 },

    #[error("chain coefficients did not converge to the asymptotic values within the computed range")]
    NotConverged,

    #[error("requested chain depth {requested} exceeds the stable depth {stable} for the given node count")]
    DepthExceeded { requested: usize, stable: usize },

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    #[error("state violates the Pauli constraint: eigenvalue {value} at t={time}")]
    PauliViolation { value: f64, time: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
