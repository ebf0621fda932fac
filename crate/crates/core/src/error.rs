use thiserror::Error;

/// Errors produced by the pose diffusion library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An inverse Jacobian or logarithm was requested too close to the
    /// rotation angle π, where the inverse Jacobians blow up.
    #[error("singular configuration: rotation angle {angle} is within {margin} of pi")]
    Singularity { angle: f64, margin: f64 },

    #[error("training diverged at step {step}: loss = {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("sampler state became non-finite at noise level {level}")]
    NonFiniteState { level: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
