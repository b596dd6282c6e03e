use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or out-of-contract input data.
    #[error("invalid input: {0}")]
    Input(String),
    /// A parameter outside the domain where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// The eigensolver failed or a spectrum violated its numeric invariants.
    #[error("numeric failure: {message} (max |entry| {max_abs:e}, diagonal range [{diag_min:e}, {diag_max:e}])")]
    Numeric {
        message: String,
        max_abs: f64,
        diag_min: f64,
        diag_max: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}
