//! Primitives for static spectral-risk-measure optimization with
//! quantile-represented return distributions.
//!
//! The crate is `no_std` (it needs `alloc`). Enable the `std` feature to let
//! the matrix kernels use runtime CPU feature detection.
//!
//! - [`spectrum`]: risk spectra, their CVaR-mixture measures and the
//!   per-quantile weights used by the agent.
//! - [`measure`]: exact CVaR and SRM on discrete distributions.
//! - [`utility`]: the concave utility `h` attaining the SRM supremum.
//! - [`dist`]: discrete and quantile return distributions.
//! - [`policy`]: greedy action rules for QR-SRM and the baselines.
//! - [`network`], [`tabular`], [`loss`]: quantile approximators.
//! - [`decompose`]: intermediate risk preferences along a trajectory.
#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod decompose;
pub mod dist;
pub mod error;
pub mod loss;
mod math;
pub mod measure;
pub mod network;
pub mod policy;
pub mod spectrum;
pub mod tabular;
pub mod utility;

pub use crate::dist::{DiscreteDistribution, QuantileDistribution, ReturnDistribution};
pub use crate::error::{Error, Result};
pub use crate::spectrum::RiskSpectrum;
pub use crate::utility::HFunction;
