//! American put on a geometric Brownian motion price.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{check_action, stream_rng, Environment, Observation, Step};
use crate::error::Result;

pub const HOLD: usize = 0;
pub const EXERCISE: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PutConfig {
    pub drift: f64,
    pub volatility: f64,
    pub initial_price: f64,
    pub strike: f64,
    /// Decision steps until maturity.
    pub horizon: usize,
    pub dt: f64,
}

impl Default for PutConfig {
    fn default() -> Self {
        Self { drift: 1.0, volatility: 1.0, initial_price: 1.0, strike: 1.0, horizon: 10, dt: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct AmericanPut {
    config: PutConfig,
    price: f64,
    t: usize,
    rng: ChaCha8Rng,
}

impl AmericanPut {
    pub fn new(config: PutConfig, seed: u64) -> Self {
        let price = config.initial_price;
        Self { config, price, t: 0, rng: stream_rng(seed, 0) }
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    /// Moves the price to `p` (for scenario tests).
    pub fn set_price(&mut self, p: f64) {
        self.price = p;
    }

    fn payoff(&self) -> f64 {
        (self.config.strike - self.price).max(0.0)
    }

    fn observe(&self) -> Observation {
        let tau = self.t as f64 / self.config.horizon as f64;
        // prices in [0, 2K] map onto [-1, 1]
        let p = self.price / self.config.strike - 1.0;
        Observation { features: vec![2.0 * tau - 1.0, p], node: 0, t: self.t }
    }
}

impl Environment for AmericanPut {
    fn actions(&self) -> usize {
        2
    }

    fn feature_dim(&self) -> usize {
        2
    }

    fn reward_bounds(&self) -> (f64, f64) {
        (0.0, self.config.strike)
    }

    fn max_steps(&self) -> usize {
        self.config.horizon
    }

    fn reseed(&mut self, seed: u64, stream: u64) {
        self.rng = stream_rng(seed, stream);
    }

    fn reset(&mut self) -> Observation {
        self.price = self.config.initial_price;
        self.t = 0;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        check_action(action, 2)?;
        if action == EXERCISE {
            let reward = self.payoff();
            return Ok(Step { obs: self.observe(), reward, done: true });
        }
        let PutConfig { drift, volatility, dt, .. } = self.config;
        let eps: f64 = self.rng.sample(StandardNormal);
        self.price *= ((drift - 0.5 * volatility * volatility) * dt + volatility * dt.sqrt() * eps).exp();
        self.t += 1;
        if self.t >= self.config.horizon {
            let reward = self.payoff();
            return Ok(Step { obs: self.observe(), reward, done: true });
        }
        Ok(Step { obs: self.observe(), reward: 0.0, done: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exercise_pays_intrinsic_value() {
        let mut env = AmericanPut::new(PutConfig::default(), 1);
        env.reset();
        let s = env.step(EXERCISE).unwrap();
        assert_eq!((s.reward, s.done), (0.0, true));
        env.reset();
        env.set_price(0.7);
        assert!((env.step(EXERCISE).unwrap().reward - 0.3).abs() < 1e-15);
    }

    #[test]
    fn holding_reaches_maturity_with_positive_prices() {
        let mut env = AmericanPut::new(PutConfig::default(), 2);
        for _ in 0..100 {
            env.reset();
            for t in 0..10 {
                let s = env.step(HOLD).unwrap();
                assert!(env.price() > 0.0);
                assert_eq!(s.done, t == 9);
                assert!(s.reward >= 0.0);
            }
        }
    }
}
