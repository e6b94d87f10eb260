//! Benchmark environments and the state-augmentation wrappers.

mod augment;
mod cliff;
mod fixture;
mod meanrev;
mod put;

pub use augment::{AugmentedEnv, AugmentedState, AugmentedStep, ThresholdEnv, ThresholdState};
pub use cliff::{CliffConfig, CliffWalk};
pub use fixture::{Fixture, FixtureEnv};
pub use meanrev::{MeanRevConfig, MeanReversion};
pub use put::{AmericanPut, PutConfig, EXERCISE, HOLD};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// What the agent sees after `reset` or `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Encoded features, each roughly in `[-1, 1]`.
    pub features: Vec<f64>,
    /// Discrete state index (grid cell or fixture node; 0 for continuous states).
    pub node: usize,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub obs: Observation,
    pub reward: f64,
    /// Terminal or truncated.
    pub done: bool,
}

pub trait Environment {
    fn actions(&self) -> usize;
    fn feature_dim(&self) -> usize;
    /// Per-step reward range `(min, max)`.
    fn reward_bounds(&self) -> (f64, f64);
    fn max_steps(&self) -> usize;
    /// Restarts the environment's random stream.
    fn reseed(&mut self, seed: u64, stream: u64);
    fn reset(&mut self) -> Observation;
    fn step(&mut self, action: usize) -> Result<Step>;
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn check_action(action: usize, actions: usize) -> Result<()> {
    if action < actions {
        Ok(())
    } else {
        Err(Error::InvalidAction { action, actions })
    }
}

/// Any of the shipped environments.
#[derive(Debug, Clone)]
pub enum Env {
    Cliff(CliffWalk),
    Put(AmericanPut),
    MeanRev(MeanReversion),
    Fixture(FixtureEnv),
}

macro_rules! dispatch {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            Env::Cliff($e) => $body,
            Env::Put($e) => $body,
            Env::MeanRev($e) => $body,
            Env::Fixture($e) => $body,
        }
    };
}

impl Env {
    /// The discount each environment is benchmarked with.
    pub fn default_gamma(&self) -> f64 {
        match self {
            Env::Cliff(_) => 0.95,
            Env::Put(_) | Env::MeanRev(_) => 0.99,
            Env::Fixture(f) => f.fixture().default_gamma(),
        }
    }

    /// Bounds `[G_MIN, G_MAX]` on the discounted return.
    pub fn return_bounds(&self, gamma: f64) -> (f64, f64) {
        if let Env::MeanRev(m) = self {
            return m.return_bounds();
        }
        let (lo, hi) = self.reward_bounds();
        let horizon = self.max_steps() as f64;
        let span = if gamma < 1.0 { (1.0 - gamma.powf(horizon)) / (1.0 - gamma) } else { horizon };
        (lo.min(0.0) * span, hi.max(0.0) * span)
    }
}

impl Environment for Env {
    fn actions(&self) -> usize {
        dispatch!(self, e => e.actions())
    }

    fn feature_dim(&self) -> usize {
        dispatch!(self, e => e.feature_dim())
    }

    fn reward_bounds(&self) -> (f64, f64) {
        dispatch!(self, e => e.reward_bounds())
    }

    fn max_steps(&self) -> usize {
        dispatch!(self, e => e.max_steps())
    }

    fn reseed(&mut self, seed: u64, stream: u64) {
        dispatch!(self, e => e.reseed(seed, stream))
    }

    fn reset(&mut self) -> Observation {
        dispatch!(self, e => e.reset())
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        dispatch!(self, e => e.step(action))
    }
}
