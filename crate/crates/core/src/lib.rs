//! Blended-target domain adaptation laboratory.
//!
//! * [`datagen`]: synthetic multi-domain benchmarks and their file format
//! * [`nnet`]: the network pieces with exact gradients
//! * [`mcda`]: mutual conditional adaptation training
//! * [`baselines`]: source-only, DANN and oracle comparisons
//! * [`metrics`]: error decomposition bound and diagnostics

pub mod baselines;
pub mod datagen;
pub mod error;
pub mod mcda;
pub mod metrics;
pub mod nnet;
pub mod rng;

pub use error::{Error, Result};
