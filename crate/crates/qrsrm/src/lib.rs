//! Environments, training loops, evaluation and reporting for spectral-risk
//! distributional reinforcement learning, built on `qrsrm-core`.

pub mod agent;
pub mod checkpoint;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod exact;
pub mod report;
pub mod run;

pub use error::{Error, Result};
