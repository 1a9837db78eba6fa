use thiserror::Error;

/// Errors produced by the region computation and its stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Fisher information matrix could not be inverted.
    #[error("singular Fisher information matrix: {0}")]
    SingularFim(String),

    /// The bank and prior leave some parameter unidentifiable for every feasible covariance.
    #[error("unidentifiable parameters: {0}")]
    Unidentifiable(String),

    /// The sensing-optimal covariance is not reachable through the pseudo-inverse of the channel.
    #[error("unreachable subspace: {0}")]
    UnreachableSubspace(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
