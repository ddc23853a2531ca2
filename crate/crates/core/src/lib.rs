//! Robust offline reinforcement learning on tabular MDPs with linear
//! function approximation: heavy-tailed reward simulation, base off-policy
//! estimators, median-of-means and quantile aggregation for evaluation and
//! pessimistic policy optimization, and a reproducible experiment harness.

pub mod dataset;
pub mod env;
pub mod error;
pub mod estimators;
pub mod features;
pub mod harness;
pub mod noise;
pub mod opo;
pub mod qfunction;
pub mod rng;
pub mod robust;

pub use error::{Error, Result};
