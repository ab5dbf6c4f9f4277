//! Link-level simulator and analysis toolkit for the K-user MISO broadcast
//! channel with periodic CSI feedback.
//!
//! The crate builds space-time interference-alignment (STIA) precoders from
//! joint current+outdated CSI, decodes by interference cancellation, measures
//! achieved sum-DoF by Monte-Carlo rate-slope estimation, and evaluates the
//! closed-form DoF region curves in exact rational arithmetic.

pub mod baselines;
pub mod channel;
pub mod cli;
pub mod error;
pub mod feedback;
pub mod linalg;
pub mod montecarlo;
pub mod regions;
pub mod stia;
pub mod verify;

pub use error::{Error, Result};

/// Complex scalar used throughout the signal-level code.
pub type Cx = num_complex::Complex64;

/// Exact rational used by the region/DoF formulas.
pub type Rational = num_rational::Ratio<i64>;
