//! Permutation tests of dependence between two point processes.
//!
//! The test compares the coincidence count of observed trial pairs against the
//! counts obtained after permuting the second coordinate across trials. The crate
//! also simulates a jittered-injection Poisson model and a mean-field exponential
//! Hawkes network, with closed-form moments and scaling bounds for each. Hawkes
//! cumulant densities up to order four are evaluated through dendrograms.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cumulant;
pub mod dendro;
pub mod error;
pub mod harness;
pub mod hawkes;
pub mod io;
pub mod jitter;
pub mod perm;
pub mod quad;
pub mod rng;
pub mod sim;
pub mod train;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What to do when a hypothesis of a bound fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Return [`Error::Hypothesis`].
    Strict,
    /// Evaluate the formula anyway; callers report the violation.
    Lenient,
}
