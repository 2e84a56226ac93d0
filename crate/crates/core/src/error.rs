use num_complex::Complex64;
use thiserror::Error;

/// Failure modes shared by every stage of the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular symbol at A = {a:e}, lambda = {lambda}: {what}")]
    Singular { a: f64, lambda: Complex64, what: String },

    #[error("root labeling ambiguous at A = {a:e}: candidates {first} and {second}")]
    Classification { a: f64, first: String, second: String },

    #[error("stability violation at A = {a:e}: physical root with Re lambda = {re_lambda:e}")]
    Stability { a: f64, re_lambda: f64 },

    #[error("quadrature did not converge on {contour} after {doublings} doublings (last change {change:e}, target {target:e})")]
    Quadrature { contour: String, doublings: u32, change: f64, target: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("out of scope: {0}")]
    OutOfScope(String),

    #[error("grid error: {0}")]
    Grid(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::InvalidInput(msg.into()))
}
