use thiserror::Error;

/// Errors raised by the solvers, validators and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// An input vector or scalar is malformed (non-finite, wrong time, ...).
    #[error("input error: {0}")]
    Input(String),
    /// A problem description failed validation.
    #[error("validation error: {0}")]
    Validation(String),
    /// A non-finite value appeared during evaluation.
    #[error("numeric error at t = {t}: {message}")]
    Numeric { t: f64, message: String },
    /// The integrator or the iteration could not continue.
    #[error("divergence at t = {t}: {message}")]
    Divergence {
        t: f64,
        message: String,
        last_state: Vec<f64>,
    },
    /// The reference solver did not reach its residual target.
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(what: &str, x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Input(format!("{what}[{i}] is not finite"))),
        None => Ok(()),
    }
}

pub(crate) fn ensure_positive(what: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{what} must be positive and finite, got {value}")))
    }
}
