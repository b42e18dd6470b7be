//! Time-average estimation error and Age-of-Information for a Gauss-Markov
//! process that is sampled, source-channel coded with short blocklengths, and
//! sent over an AWGN link with ACK/NACK retransmissions.
//!
//! The pipeline for one operating point is
//! `(d, ε) → blocklength n → per-attempt delay r → (MSE, AoI)`:
//!
//! * [`coding`] turns a tolerated distortion `d` and excess-distortion
//!   probability `ε` into a blocklength via the normal approximation.
//! * [`timing`] maps the blocklength to a per-attempt delay and gives the
//!   moments of the geometric delay until a packet is accepted.
//! * [`estimation`] holds the instantaneous error of the remote estimator as a
//!   function of the age `τ` of the held sample.
//! * [`metrics`] averages those quantities over a renewal cycle, with closed
//!   forms for scalar processes and a quadrature route for any dimension.
//! * [`pareto`] sweeps a `(d, ε)` grid and extracts the trade-off boundary.
//! * [`montecarlo`] is an independent event-driven simulator used to validate
//!   the analytic results.

pub mod coding;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod metrics;
pub mod montecarlo;
pub mod pareto;
pub mod process;
pub mod timing;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
