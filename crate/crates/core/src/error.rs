use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The driver configuration is inconsistent (for example α = 1 on the
    /// untruncated driver without a symmetric angular density).
    #[error("invalid driver configuration: {0}")]
    Configuration(String),

    #[error("rejection sampler exceeded {proposals} proposals; upper bound K = {upper_bound} is below sup rho")]
    RejectionExhausted { proposals: u64, upper_bound: f64 },

    #[error("sphere quadrature did not converge after {nodes} nodes (relative change {change:e})")]
    Quadrature { nodes: usize, change: f64 },

    #[error("path {path_index} aborted at step {step} of resolution {resolution}: non-finite state")]
    PathAborted {
        path_index: u64,
        resolution: usize,
        step: usize,
    },

    #[error("ODE step size underflow at t = {time}")]
    StepUnderflow { time: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
