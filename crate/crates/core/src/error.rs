use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum SgqtError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("degenerate parametrization: parameter vector has zero norm")]
    DegenerateParametrization,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T, E = SgqtError> = std::result::Result<T, E>;
