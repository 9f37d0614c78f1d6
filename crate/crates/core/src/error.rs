use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate matrix: {what} (determinant {det:e})")]
    Degenerate { what: &'static str, det: f64 },

    #[error("2 + tr V = {value:e} is near zero at grid point {index}")]
    GammaSingular { index: usize, value: f64 },

    #[error("non-finite values in {field}")]
    NonFinite { field: String },

    #[error("numerical instability at step {step}: {reason}")]
    Unstable { step: usize, reason: String },

    #[error("CFL violation: {0}")]
    Cfl(String),

    #[error("rotation angle cannot be unwrapped: {0}")]
    Unwrap(String),

    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error stems from the numerics rather than the user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate { .. }
                | Error::GammaSingular { .. }
                | Error::NonFinite { .. }
                | Error::Unstable { .. }
                | Error::Cfl(_)
                | Error::Unwrap(_)
        )
    }
}
