//! Single-asset trading against an Ornstein–Uhlenbeck price.
//!
//! The agent trades `a ∈ {−a_max, …, a_max}` units per step, paying
//! `a·P + ϕa²`, holds at most `q_max` units either way and liquidates the
//! final inventory at the last observed price less a quadratic penalty.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{check_action, stream_rng, Environment, Observation, Step};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct MeanRevConfig {
    /// Long-run mean `ζ`, also the initial price.
    pub mean: f64,
    pub reversion: f64,
    pub sigma: f64,
    pub dt: f64,
    pub horizon: usize,
    pub max_inventory: f64,
    pub max_trade: f64,
    pub action_count: usize,
    pub transaction_cost: f64,
    pub terminal_penalty: f64,
}

impl Default for MeanRevConfig {
    fn default() -> Self {
        Self {
            mean: 1.0,
            reversion: 2.0,
            sigma: 0.5,
            dt: 0.1,
            horizon: 10,
            max_inventory: 5.0,
            max_trade: 2.0,
            action_count: 21,
            transaction_cost: 0.005,
            terminal_penalty: 0.5,
        }
    }
}

impl MeanRevConfig {
    /// Standard deviation of the stationary price distribution.
    pub fn stationary_sd(&self) -> f64 {
        self.sigma / (2.0 * self.reversion).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct MeanReversion {
    config: MeanRevConfig,
    price: f64,
    inventory: f64,
    t: usize,
    rng: ChaCha8Rng,
}

impl MeanReversion {
    pub fn new(config: MeanRevConfig, seed: u64) -> Self {
        let price = config.mean;
        Self { config, price, inventory: 0.0, t: 0, rng: stream_rng(seed, 0) }
    }

    pub fn config(&self) -> &MeanRevConfig {
        &self.config
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn inventory(&self) -> f64 {
        self.inventory
    }

    /// Trade size of action `i`: evenly spaced over `[−a_max, a_max]`.
    pub fn trade(&self, action: usize) -> f64 {
        let k = (self.config.action_count - 1).max(1) as f64;
        -self.config.max_trade + 2.0 * self.config.max_trade * action as f64 / k
    }

    /// Nominal return range used to scale the accumulated-reward feature.
    pub fn return_bounds(&self) -> (f64, f64) {
        (-10.0, 10.0)
    }

    /// Exact OU transition over one step with standard normal `eps`.
    pub fn ou_step(&self, price: f64, eps: f64) -> f64 {
        let MeanRevConfig { mean, reversion, sigma, dt, .. } = self.config;
        let decay = (-reversion * dt).exp();
        let sd = sigma * ((1.0 - (-2.0 * reversion * dt).exp()) / (2.0 * reversion)).sqrt();
        mean + (price - mean) * decay + sd * eps
    }

    fn observe(&self) -> Observation {
        let c = &self.config;
        let tau = self.t as f64 / c.horizon as f64;
        let spread = 3.0 * c.stationary_sd();
        let p = if spread > 0.0 { (self.price - c.mean) / spread } else { 0.0 };
        Observation { features: vec![2.0 * tau - 1.0, p, self.inventory / c.max_inventory], node: 0, t: self.t }
    }
}

impl Environment for MeanReversion {
    fn actions(&self) -> usize {
        self.config.action_count
    }

    fn feature_dim(&self) -> usize {
        3
    }

    fn reward_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.return_bounds();
        (lo / self.config.horizon as f64, hi / self.config.horizon as f64)
    }

    fn max_steps(&self) -> usize {
        self.config.horizon
    }

    fn reseed(&mut self, seed: u64, stream: u64) {
        self.rng = stream_rng(seed, stream);
    }

    fn reset(&mut self) -> Observation {
        self.price = self.config.mean;
        self.inventory = 0.0;
        self.t = 0;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        check_action(action, self.config.action_count)?;
        let q_max = self.config.max_inventory;
        let target = (self.inventory + self.trade(action)).clamp(-q_max, q_max);
        let a = target - self.inventory;
        let mut reward = -a * self.price - self.config.transaction_cost * a * a;
        self.inventory = target;
        self.t += 1;
        let done = self.t >= self.config.horizon;
        if done {
            // liquidation at the price the final trade was made at
            let q = self.inventory;
            reward += q * self.price - self.config.terminal_penalty * q * q;
        }
        let eps: f64 = self.rng.sample(StandardNormal);
        self.price = self.ou_step(self.price, eps);
        Ok(Step { obs: self.observe(), reward, done })
    }
}
