//! Wrappers that carry the extra state static risk objectives need.

use super::{Environment, Observation};
use crate::error::{Error, Result};

/// `(x, s, c)`: observation, discounted reward so far, discount so far.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub obs: Observation,
    pub s: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedStep {
    pub state: AugmentedState,
    pub reward: f64,
    pub done: bool,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("augmentation needs a discount in (0, 1), got {gamma}")))
    }
}

/// Tracks `s ← s + c·r` and `c ← γc`.
#[derive(Debug, Clone)]
pub struct AugmentedEnv<E> {
    env: E,
    gamma: f64,
    s: f64,
    c: f64,
}

impl<E: Environment> AugmentedEnv<E> {
    pub fn new(env: E, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self { env, gamma, s: 0.0, c: 1.0 })
    }

    pub fn inner(&self) -> &E {
        &self.env
    }

    pub fn inner_mut(&mut self) -> &mut E {
        &mut self.env
    }

    pub fn reset(&mut self) -> AugmentedState {
        self.s = 0.0;
        self.c = 1.0;
        AugmentedState { obs: self.env.reset(), s: 0.0, c: 1.0 }
    }

    pub fn step(&mut self, action: usize) -> Result<AugmentedStep> {
        let step = self.env.step(action)?;
        self.s += self.c * step.reward;
        self.c *= self.gamma;
        Ok(AugmentedStep {
            state: AugmentedState { obs: step.obs, s: self.s, c: self.c },
            reward: step.reward,
            done: step.done,
        })
    }
}

/// `(x, b)` with `b ← (b − r)/γ`, the remaining CVaR threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdState {
    pub obs: Observation,
    pub b: f64,
}

#[derive(Debug, Clone)]
pub struct ThresholdEnv<E> {
    env: E,
    gamma: f64,
    b: f64,
}

impl<E: Environment> ThresholdEnv<E> {
    pub fn new(env: E, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self { env, gamma, b: 0.0 })
    }

    pub fn inner_mut(&mut self) -> &mut E {
        &mut self.env
    }

    pub fn reset(&mut self, b0: f64) -> ThresholdState {
        self.b = b0;
        ThresholdState { obs: self.env.reset(), b: b0 }
    }

    pub fn step(&mut self, action: usize) -> Result<(ThresholdState, f64, bool)> {
        let step = self.env.step(action)?;
        self.b = (self.b - step.reward) / self.gamma;
        Ok((ThresholdState { obs: step.obs, b: self.b }, step.reward, step.done))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Fixture, FixtureEnv};

    #[test]
    fn rejects_zero_discount() {
        assert!(AugmentedEnv::new(FixtureEnv::new(Fixture::example_one(), 0), 0.0).is_err());
        assert!(ThresholdEnv::new(FixtureEnv::new(Fixture::example_one(), 0), 1.0).is_err());
    }

    #[test]
    fn accumulates_discounted_reward() {
        let mut env = AugmentedEnv::new(FixtureEnv::new(Fixture::example_one(), 3), 0.5).unwrap();
        let st = env.reset();
        assert_eq!((st.s, st.c), (0.0, 1.0));
        let mut total = 0.0;
        let mut disc = 1.0;
        loop {
            let step = env.step(0).unwrap();
            total += disc * step.reward;
            disc *= 0.5;
            assert_eq!(step.state.s, total);
            assert_eq!(step.state.c, disc);
            if step.done {
                break;
            }
        }
    }

    #[test]
    fn threshold_recursion() {
        let mut env = ThresholdEnv::new(FixtureEnv::new(Fixture::example_one(), 3), 0.5).unwrap();
        env.reset(7.0);
        let (st, r, _) = env.step(0).unwrap();
        assert_eq!(r, 2.0);
        assert_eq!(st.b, 10.0);
    }
}
