use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input with no positive mass cannot be mapped onto the simplex.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// A construction gate rejected the parameters.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty Nash set")]
    EmptyNashSet,

    #[error("{0}")]
    Insufficient(String),

    /// The integration produced a non-finite state.
    #[error("simulation diverged at t = {time}")]
    Diverged {
        time: f64,
        partial: Box<crate::sim::RunRecord>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
