//! Turns crisp regressors into Gaussian soft regressors and computes
//! loss-optimal ("reframed") predictions from them.

pub mod dataset;
pub mod enrichment;
pub mod error;
pub mod harness;
pub mod loss;
pub mod metrics;
pub mod normal;
pub mod reframing;
pub mod regressors;
pub mod report;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
