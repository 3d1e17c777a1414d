use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A point on or outside the unit circle, or a parameter outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The sampling window does not cover every obstacle that can touch the probe.
    #[error("window radius {window} is smaller than the required {required}")]
    WindowTooSmall { window: f64, required: f64 },

    /// Expected obstacle count exceeds the configured memory budget.
    #[error("expected obstacle count {expected:.3e} exceeds budget {budget:.3e}")]
    BudgetExceeded { expected: f64, budget: f64 },

    /// A fit was asked over a range that cannot support it.
    #[error("fit error: {0}")]
    Fit(String),

    /// An invalid radius law or model description.
    #[error("invalid model: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
