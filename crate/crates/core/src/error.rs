use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsiError {
    /// Invalid configuration; `field` is the dotted path of the offending entry.
    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    /// Initial data violate the admissibility band `delta < R + eta0`, `|R + eta0|_H2 < 1/delta`.
    #[error("inadmissible initial data: {0}")]
    InitialData(String),

    /// `R + eta(z) <= 0` where a transformed operator was requested.
    #[error("degenerate ALE jacobian {jacobian} at z = {z}")]
    DegenerateJacobian { z: f64, jacobian: f64 },

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("Picard iteration did not converge after {iterations} iterations (relative update {residual:e})")]
    PicardDivergence { iterations: usize, residual: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl FsiError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        FsiError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for FsiError {
    fn from(err: std::io::Error) -> Self {
        FsiError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FsiError>;
