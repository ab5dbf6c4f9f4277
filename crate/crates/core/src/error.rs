//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter combination violates a documented precondition.
    #[error("invalid configuration: {0}")]
    InvalidSpec(String),

    /// Rejection sampling failed to land inside the magnitude bounds.
    #[error("rejection sampling exceeded {cap} retries for one scalar; bounds are pathological")]
    RejectionCapExceeded { cap: usize },

    /// A feedback model was queried against a channel it does not describe.
    #[error("feedback model / channel mismatch: {0}")]
    ModelMismatch(String),

    /// A channel stack was too close to singular to invert reliably.
    #[error("channel matrix ill-conditioned (cond = {cond:.3e} > {threshold:.1e}); resample the trial")]
    IllConditioned { cond: f64, threshold: f64 },

    /// A least-squares or pilot system does not have full column rank.
    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    /// The effective channel of a frame could not be inverted.
    #[error("singular effective channel for user {user}; resample the trial")]
    SingularEffectiveChannel { user: usize },

    /// A noise covariance that must be positive definite is not.
    #[error("noise covariance is not positive definite")]
    NotPositiveDefinite,

    /// Curve evaluation outside the curve's domain.
    #[error("x = {x} is outside the curve domain [{lo}, {hi}]")]
    OutOfDomain { x: String, lo: String, hi: String },

    /// A Monte-Carlo trial kept hitting ill-conditioned channels.
    #[error("trial resampling cap ({cap}) exceeded")]
    ResampleCapExceeded { cap: usize },

    /// A requested scheme cannot run under the configured feedback model.
    #[error("infeasible scheme/feedback combination: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
