use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A denominator that must be nonzero vanished.
    #[error("singular: {0}")]
    Singular(String),

    /// A square root or similar operation met an argument of the wrong sign,
    /// typically while an estimator is still in its transient.
    #[error("positivity lost: {0}")]
    PositivityLoss(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A state became non-finite during integration.
    #[error("numeric fault at step {step} (t = {t}): {what}")]
    NumericFault { step: u64, t: f64, what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
