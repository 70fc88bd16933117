use thiserror::Error;

/// Errors produced by the section-volume and bound computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The integral did not reach the requested accuracy within the panel budget.
    #[error("convergence failure: {reason} (partial value {partial})")]
    ConvergenceFailure { reason: String, partial: f64 },

    /// The section volume jumps at this distance and has no well-defined value.
    #[error("section volume is discontinuous at t = {t}")]
    Discontinuity { t: f64 },

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    /// A link of a bound certificate failed to validate.
    #[error("certificate failure at `{link}`: {detail}")]
    Certificate { link: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
