//! Windy cliff walking on a 4×8 grid.
//!
//! Start bottom-left, goal bottom-right, cliff cells in between. After every
//! move a wind blows with fixed probability and displaces the agent to a
//! uniformly chosen neighbour (clamped to the grid). Entering the cliff costs
//! −1 and returns the agent to the start; reaching the goal pays +10 and ends
//! the episode.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{check_action, stream_rng, Environment, Observation, Step};
use crate::error::Result;

pub const ROWS: usize = 4;
pub const COLS: usize = 8;
const START: (usize, usize) = (3, 0);
const GOAL: (usize, usize) = (3, 7);

/// `(row delta, col delta)` for up, right, down, left.
const MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

#[derive(Debug, Clone, PartialEq)]
pub struct CliffConfig {
    pub wind_probability: f64,
    pub cliff_reward: f64,
    pub goal_reward: f64,
    pub max_steps: usize,
}

impl Default for CliffConfig {
    fn default() -> Self {
        Self { wind_probability: 0.5, cliff_reward: -1.0, goal_reward: 10.0, max_steps: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct CliffWalk {
    config: CliffConfig,
    pos: (usize, usize),
    t: usize,
    rng: ChaCha8Rng,
}

fn is_cliff((r, c): (usize, usize)) -> bool {
    r == 3 && (1..=6).contains(&c)
}

fn shift((r, c): (usize, usize), (dr, dc): (isize, isize)) -> (usize, usize) {
    let r = (r as isize + dr).clamp(0, ROWS as isize - 1) as usize;
    let c = (c as isize + dc).clamp(0, COLS as isize - 1) as usize;
    (r, c)
}

impl CliffWalk {
    pub fn new(config: CliffConfig, seed: u64) -> Self {
        Self { config, pos: START, t: 0, rng: stream_rng(seed, 0) }
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    fn observe(&self) -> Observation {
        let cell = self.pos.0 * COLS + self.pos.1;
        let mut features = vec![0.0; ROWS * COLS];
        features[cell] = 1.0;
        Observation { features, node: cell, t: self.t }
    }
}

impl Environment for CliffWalk {
    fn actions(&self) -> usize {
        4
    }

    fn feature_dim(&self) -> usize {
        ROWS * COLS
    }

    fn reward_bounds(&self) -> (f64, f64) {
        (self.config.cliff_reward.min(0.0), self.config.goal_reward.max(0.0))
    }

    fn max_steps(&self) -> usize {
        self.config.max_steps
    }

    fn reseed(&mut self, seed: u64, stream: u64) {
        self.rng = stream_rng(seed, stream);
    }

    fn reset(&mut self) -> Observation {
        self.pos = START;
        self.t = 0;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        check_action(action, 4)?;
        let mut pos = shift(self.pos, MOVES[action]);
        if self.rng.random::<f64>() < self.config.wind_probability {
            pos = shift(pos, MOVES[self.rng.random_range(0..4)]);
        }
        self.t += 1;
        let mut reward = 0.0;
        let mut done = false;
        if is_cliff(pos) {
            reward = self.config.cliff_reward;
            pos = START;
        } else if pos == GOAL {
            reward = self.config.goal_reward;
            done = true;
        }
        self.pos = pos;
        done |= self.t >= self.config.max_steps;
        Ok(Step { obs: self.observe(), reward, done })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calm() -> CliffWalk {
        CliffWalk::new(CliffConfig { wind_probability: 0.0, ..CliffConfig::default() }, 0)
    }

    #[test]
    fn safe_path_without_wind() {
        let mut env = calm();
        env.reset();
        let path = [0, 1, 1, 1, 1, 1, 1, 1, 2];
        let mut total = 0.0;
        for (i, a) in path.iter().enumerate() {
            let step = env.step(*a).unwrap();
            total += step.reward;
            assert_eq!(step.done, i + 1 == path.len());
        }
        assert_eq!(total, 10.0);
    }

    #[test]
    fn cliff_resets_to_start() {
        let mut env = calm();
        env.reset();
        let step = env.step(1).unwrap();
        assert_eq!(step.reward, -1.0);
        assert!(!step.done);
        assert_eq!(env.position(), START);
    }

    #[test]
    fn truncates_and_rewards_are_bounded() {
        let mut env = CliffWalk::new(CliffConfig::default(), 3);
        for _ in 0..20 {
            env.reset();
            let mut len = 0;
            loop {
                let step = env.step(len % 4).unwrap();
                len += 1;
                assert!([-1.0, 0.0, 10.0].contains(&step.reward));
                if step.done {
                    break;
                }
            }
            assert!(len <= 50);
        }
        assert!(env.step(4).is_err());
    }
}
