use thiserror::Error;

/// Errors raised by the model-selection library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    /// An action handed to a learner violates its declared norm bound.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The environment reported an optimal value below a played action's mean.
    #[error("environment inconsistency: {0}")]
    Environment(String),

    #[error("fatal master state: {0}")]
    State(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("undefined slope: {0}")]
    Slope(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
