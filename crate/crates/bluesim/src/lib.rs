//! Distributed BLUE estimation of a scalar parameter over fading channels.
//!
//! A fusion center combines amplify-and-forward transmissions from `K`
//! sensors into a best linear unbiased estimate. The crate provides the
//! closed-form optimal power allocation under a total-power constraint, a
//! generalized-Lloyd codebook of quantized allocation vectors for
//! limited-feedback operation, the fading-channel simulation model, and a
//! reproducible Monte-Carlo experiment driver with a CLI.

pub mod allocator;
pub mod channel;
pub mod codebook;
pub mod config;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod model;
mod persist;
pub mod results;
pub mod seeds;

pub use error::{Error, Result};
