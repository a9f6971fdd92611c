use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no closed-form recurrence for the {family} family; use stieltjes_recurrence")]
    NoClosedForm { family: String },

    #[error("precision exhausted: squared recurrence coefficient a_{index}^2 = {value} is not positive")]
    PrecisionExhausted { index: usize, value: f64 },

    #[error("discretized recurrence did not converge to {tol:e} (last change {change:e})")]
    NotConverged { tol: f64, change: f64 },

    #[error("eigenvalue iteration failed to converge at index {index}")]
    EigenFailure { index: usize },

    #[error("index out of range: requested {requested}, available {available}")]
    Range { requested: usize, available: usize },

    #[error("domain error: {what} at x = {x}")]
    Domain { what: String, x: f64 },

    #[error("singular point of the density at x = {x}")]
    Singular { x: f64 },

    #[error("quadrature did not reach tolerance {tol:e}: estimate {estimate}, error bound {error:e}")]
    Accuracy { tol: f64, estimate: f64, error: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
