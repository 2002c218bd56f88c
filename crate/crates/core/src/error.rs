use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of refinements before meeting its tolerance.
    #[error("quadrature did not converge: best estimate {best}, residual {residual:e}")]
    Accuracy { best: f64, residual: f64 },

    /// No sign change was found while expanding a root bracket.
    #[error("root bracketing failed: {0}")]
    Bracketing(String),

    /// A closed form and its numeric counterpart disagree.
    #[error("numeric cross-check failed: {what} (closed form {closed}, numeric {numeric})")]
    CrossCheck {
        what: String,
        closed: f64,
        numeric: f64,
    },

    /// Inputs that are individually valid but inconsistent with each other.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Raw data that does not conform to the declared sampling scheme.
    #[error("invalid data: {0}")]
    Validation(String),

    /// Too many replications failed inside a Monte Carlo cell.
    #[error("simulation aborted: {failed} of {replications} replications failed ({first_error})")]
    SimulationAborted {
        failed: usize,
        replications: usize,
        first_error: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
