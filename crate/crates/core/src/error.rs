use thiserror::Error;

/// Errors raised by the probability layer, the solvers and the simulators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution `{what}`: {reason}")]
    InvalidDistribution { what: String, reason: String },

    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("target distortion {target} is infeasible; minimum achievable distortion is d_min = {d_min}")]
    Infeasible { target: f64, d_min: f64 },

    #[error("search budget exceeded: {0}")]
    Budget(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("{side} computation failed: {source}")]
    Side {
        side: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid_dist(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidDistribution {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn on_side(self, side: &'static str) -> Self {
        Error::Side {
            side,
            source: Box::new(self),
        }
    }

    /// The innermost error, looking through [`Error::Side`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Side { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
