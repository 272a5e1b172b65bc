//! Simulation and analytics library for communication over a discrete-time
//! AWGN channel with noiseless rate-limited feedback.
//!
//! The crate has two halves. The analytic half ([`exponent`]) evaluates
//! closed-form error-exponent bounds as a function of the forward rate,
//! feedback rate and power budget, including the regime classification and
//! the bound curves that exhibit the discontinuity at `R_FB = R`. The
//! simulation half ([`codec`], [`channel`], [`schemes`], [`harness`]) runs
//! the feedback coding protocols themselves at desk scale: random Gaussian
//! codebooks, boosted retransmission with an alarm slot, compressed (binned)
//! feedback and the block-Markov per-channel-use pipeline, with Monte Carlo
//! estimation of every error-event class plus power and feedback-rate
//! audits.
//!
//! Everything is deterministic given the configured seeds: codebooks,
//! partitions and per-trial noise all draw from dedicated streams derived
//! from a master seed, so any run can be reproduced bit for bit.

pub mod channel;
pub mod codec;
pub mod error;
pub mod exponent;
pub mod harness;
pub mod schemes;
pub mod stats;
pub mod streams;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
