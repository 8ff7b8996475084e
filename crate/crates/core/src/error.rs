use thiserror::Error;

/// Errors raised by the channel model, the optimizers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate distance: points coincide at ({x}, {y})")]
    DegenerateDistance { x: f64, y: f64 },

    #[error("conditioning failure: covariance not positive definite at pivot {pivot} (value {value:e})")]
    ConditioningFailure { pivot: usize, value: f64 },

    #[error("posterior degeneracy: conditional variance {0:e} is negative")]
    PosteriorDegeneracy(f64),

    #[error("eigen failure: {0}")]
    EigenFailure(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("trial {trial}, slot {slot}: {source}")]
    Slot {
        trial: usize,
        slot: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_slot(self, trial: usize, slot: usize) -> Self {
        Error::Slot {
            trial,
            slot,
            source: Box::new(self),
        }
    }
}
