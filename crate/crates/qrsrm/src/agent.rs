//! QR-SRM and the quantile-regression baselines sharing one training loop.
//!
//! All four agents learn `A × N` quantiles with the same network, replay
//! buffer and target network. They differ in the extra state fed to the
//! network and in the greedy rule:
//!
//! | algorithm | extra inputs      | greedy rule                         |
//! |-----------|-------------------|-------------------------------------|
//! | QR-DQN    | none              | highest mean                        |
//! | QR-iCVaR  | none              | highest row CVaR at a fixed level   |
//! | QR-CVaR   | `b`               | highest `E[min(θ − b, 0)]`          |
//! | QR-SRM    | `s`, `c`          | highest `E[h(s + cθ)]`              |

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use qrsrm_core::measure::srm_of_values;
use qrsrm_core::network::{Batch, NetworkConfig, QuantileNetwork, Scratch};
use qrsrm_core::policy::{self, td_targets_into};
use qrsrm_core::{HFunction, QuantileDistribution, ReturnDistribution, RiskSpectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{Env, Environment};
use crate::error::{Error, Result};

/// Keeps the agent's random stream apart from the environment's.
const AGENT_SALT: u64 = 0x5EED_A6E7_0000_0001;

#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    QrDqn,
    QrCvar { alpha: f64 },
    QrIcvar { alpha: f64 },
    QrSrm(RiskSpectrum),
}

impl Algorithm {
    /// Number of augmentation inputs appended to the environment features.
    pub fn extra_inputs(&self) -> usize {
        match self {
            Algorithm::QrDqn | Algorithm::QrIcvar { .. } => 0,
            Algorithm::QrCvar { .. } => 1,
            Algorithm::QrSrm(_) => 2,
        }
    }

    /// Model name without parameters.
    pub fn model(&self) -> &'static str {
        match self {
            Algorithm::QrDqn => "qrdqn",
            Algorithm::QrCvar { .. } => "qrcvar",
            Algorithm::QrIcvar { .. } => "qricvar",
            Algorithm::QrSrm(_) => "qrsrm",
        }
    }

    /// The risk measure the algorithm targets, as a metric string.
    pub fn objective(&self) -> String {
        match self {
            Algorithm::QrDqn => "mean".into(),
            Algorithm::QrCvar { alpha } | Algorithm::QrIcvar { alpha } => format!("cvar:{alpha:?}"),
            Algorithm::QrSrm(s) => s.to_string(),
        }
    }
}

fn parse_level(text: &str) -> Result<f64> {
    let alpha: f64 = text.parse().map_err(|_| Error::Config(format!("bad CVaR level `{text}`")))?;
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(alpha)
    } else {
        Err(Error::Config(format!("CVaR level {alpha} outside (0, 1]")))
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    /// `qrdqn`, `qrcvar:<α>`, `qricvar:<α>` or `qrsrm:<spectrum>`.
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (head, rest) = text.split_once(':').unwrap_or((text, ""));
        match (head, rest) {
            ("qrdqn", "") => Ok(Algorithm::QrDqn),
            ("qrcvar", a) => Ok(Algorithm::QrCvar { alpha: parse_level(a)? }),
            ("qricvar", a) => Ok(Algorithm::QrIcvar { alpha: parse_level(a)? }),
            ("qrsrm", s) => Ok(Algorithm::QrSrm(parse_spectrum(s)?)),
            _ => Err(Error::Config(format!("unknown algorithm `{text}`"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::QrDqn => write!(f, "qrdqn"),
            Algorithm::QrCvar { alpha } => write!(f, "qrcvar:{alpha:?}"),
            Algorithm::QrIcvar { alpha } => write!(f, "qricvar:{alpha:?}"),
            Algorithm::QrSrm(s) => write!(f, "qrsrm:{s}"),
        }
    }
}

/// Spectrum strings, with `mean` accepted for `cvar:1.0`.
pub fn parse_spectrum(text: &str) -> Result<RiskSpectrum> {
    match text.trim() {
        "mean" => Ok(RiskSpectrum::expectation()),
        other => other.parse().map_err(|e: qrsrm_core::Error| Error::Config(format!("spectrum `{other}`: {e}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub total_timesteps: usize,
    pub gamma: f64,
    pub quantiles: usize,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub kappa: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Environment steps before the first gradient step.
    pub warmup: usize,
    /// Environment steps between gradient steps.
    pub train_interval: usize,
    /// Gradient steps between target synchronizations.
    pub sync_frequency: usize,
    /// Environment steps between `h` updates (QR-SRM).
    pub h_frequency: usize,
    /// Environment steps between threshold updates (QR-CVaR).
    pub b_frequency: usize,
    pub epsilon_start: f64,
    pub epsilon_final: f64,
    /// Share of `total_timesteps` over which ε decays linearly.
    pub exploration_fraction: f64,
    /// Environment steps between metric records.
    pub log_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_timesteps: 100_000,
            gamma: 0.99,
            quantiles: 50,
            hidden: vec![128; 3],
            learning_rate: 2.5e-4,
            kappa: 1.0,
            batch_size: 256,
            replay_capacity: 100_000,
            warmup: 1_000,
            train_interval: 4,
            sync_frequency: 500,
            h_frequency: 2_000,
            b_frequency: 2_000,
            epsilon_start: 1.0,
            epsilon_final: 0.05,
            exploration_fraction: 0.5,
            log_interval: 1_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("quantiles", self.quantiles),
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("train_interval", self.train_interval),
            ("sync_frequency", self.sync_frequency),
            ("h_frequency", self.h_frequency),
            ("b_frequency", self.b_frequency),
            ("log_interval", self.log_interval),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !(self.learning_rate > 0.0 && self.kappa > 0.0) {
            return Err(Error::Config("learning_rate and kappa must be positive".into()));
        }
        let unit = 0.0..=1.0;
        if !(unit.contains(&self.epsilon_start) && unit.contains(&self.epsilon_final) && unit.contains(&self.exploration_fraction)) {
            return Err(Error::Config("exploration parameters must lie in [0, 1]".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }

    /// ε after `step` environment steps.
    pub fn epsilon(&self, step: usize) -> f64 {
        let span = self.exploration_fraction * self.total_timesteps as f64;
        if span <= 0.0 {
            return self.epsilon_final;
        }
        let frac = (step as f64 / span).min(1.0);
        self.epsilon_start + frac * (self.epsilon_final - self.epsilon_start)
    }
}

/// Augmentation carried alongside the environment state.
///
/// `s` and `c` follow `s ← s + c·r`, `c ← γc`; the threshold follows
/// `b ← (b − r)/γ`. Every agent tracks all three; each reads what it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aug {
    pub s: f64,
    pub c: f64,
    pub b: f64,
}

impl Aug {
    pub fn start(b0: f64) -> Self {
        Self { s: 0.0, c: 1.0, b: b0 }
    }

    pub fn advance(self, reward: f64, gamma: f64) -> Self {
        let b = if gamma > 0.0 { (self.b - reward) / gamma } else { self.b };
        Self { s: self.s + self.c * reward, c: self.c * gamma, b }
    }
}

/// A trained (or training) agent: the online network plus the state of the
/// outer optimization.
#[derive(Debug, Clone)]
pub struct Agent {
    pub algorithm: Algorithm,
    pub online: QuantileNetwork,
    /// Current utility (QR-SRM only).
    pub h: Option<HFunction>,
    /// Initial threshold `b₀` (QR-CVaR only).
    pub b0: f64,
    pub gamma: f64,
    /// Multiplier applied to `s` and `b` before they enter the network.
    pub s_scale: f64,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(algorithm: Algorithm, env: &Env, config: &TrainConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if algorithm.extra_inputs() > 0 && config.gamma <= 0.0 {
            return Err(Error::Config(format!("{} needs gamma in (0, 1)", algorithm.model())));
        }
        let mut net = NetworkConfig::new(env.feature_dim() + algorithm.extra_inputs(), env.actions(), config.quantiles);
        net.hidden = config.hidden.clone();
        net.learning_rate = config.learning_rate;
        net.kappa = config.kappa;
        let online = QuantileNetwork::new(net, rng);
        let (lo, hi) = env.return_bounds(config.gamma);
        let bound = lo.abs().max(hi);
        let s_scale = if bound > 0.0 { 1.0 / bound } else { 1.0 };
        let h = match &algorithm {
            Algorithm::QrSrm(spectrum) => Some(HFunction::initial(spectrum, config.quantiles)),
            _ => None,
        };
        Ok(Self { algorithm, online, h, b0: 0.0, gamma: config.gamma, s_scale })
    }

    pub fn actions(&self) -> usize {
        self.online.actions()
    }

    pub fn quantiles(&self) -> usize {
        self.online.quantiles()
    }

    pub fn start(&self) -> Aug {
        Aug::start(self.b0)
    }

    /// Network input for environment features and augmentation.
    pub fn encode_into(&self, features: &[f64], aug: Aug, out: &mut Vec<f64>) {
        out.extend_from_slice(features);
        match self.algorithm {
            Algorithm::QrSrm(_) => out.extend_from_slice(&[aug.s * self.s_scale, aug.c]),
            Algorithm::QrCvar { .. } => out.push(aug.b * self.s_scale),
            _ => {}
        }
    }

    pub fn encode(&self, features: &[f64], aug: Aug) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.online.input_dim());
        self.encode_into(features, aug, &mut out);
        out
    }

    /// The algorithm's greedy action for an `A × N` quantile matrix.
    pub fn select(&self, quantiles: &[f64], aug: Aug) -> usize {
        let n = self.quantiles();
        match &self.algorithm {
            Algorithm::QrDqn => policy::qr_dqn_action(quantiles, n),
            Algorithm::QrIcvar { alpha } => policy::qr_icvar_action(quantiles, n, *alpha),
            Algorithm::QrCvar { .. } => policy::qr_cvar_action(quantiles, n, aug.b),
            Algorithm::QrSrm(_) => {
                let h = self.h.as_ref().expect("QR-SRM agents carry a utility");
                policy::greedy_action(h, quantiles, n, aug.s, aug.c)
            }
        }
    }

    /// Greedy action and the quantile matrix it was chosen from.
    pub fn act(&self, features: &[f64], aug: Aug) -> (usize, Vec<f64>) {
        let q = self.online.forward(&self.encode(features, aug));
        (self.select(&q, aug), q)
    }

    /// Quantile rows at the initial augmented state.
    fn initial_rows(&self, x0: &[f64]) -> Vec<f64> {
        self.online.forward(&self.encode(x0, self.start()))
    }

    /// Moves `θ̃` to the sorted initial-state row with the highest SRM.
    ///
    /// Returns the W1 distance between the old and new reference quantiles
    /// and the chosen action.
    pub fn update_h(&mut self, x0: &[f64]) -> Result<(f64, usize)> {
        let Algorithm::QrSrm(spectrum) = &self.algorithm else {
            return Err(Error::Config("update_h applies to QR-SRM only".into()));
        };
        let rows = self.initial_rows(x0);
        let n = self.quantiles();
        let mut scores = Vec::with_capacity(self.actions());
        for row in rows.chunks_exact(n) {
            scores.push(srm_of_values(spectrum, row)?);
        }
        let a = policy::argmax(scores);
        let h = self.h.as_ref().expect("QR-SRM agents carry a utility");
        let old = QuantileDistribution::new(h.ref_quantiles().to_vec())?;
        let next = h.with_ref_quantiles(rows[a * n..(a + 1) * n].to_vec())?;
        let moved = old.w1(&QuantileDistribution::new(next.ref_quantiles().to_vec())?)?;
        self.h = Some(next);
        Ok((moved, a))
    }

    /// Re-estimates `b₀` as the α-quantile of the greedy initial row.
    pub fn update_b(&mut self, x0: &[f64]) -> Result<f64> {
        let Algorithm::QrCvar { alpha } = self.algorithm else {
            return Err(Error::Config("update_b applies to QR-CVaR only".into()));
        };
        let rows = self.initial_rows(x0);
        let n = self.quantiles();
        let a = policy::qr_cvar_action(&rows, n, self.b0);
        let row = QuantileDistribution::from_unsorted(rows[a * n..(a + 1) * n].to_vec())?;
        let old = self.b0;
        self.b0 = row.level_value(alpha);
        Ok((self.b0 - old).abs())
    }

    /// Greedy episode under the environment's current random stream.
    ///
    /// Returns the discounted return `Σ γ^t r_t`.
    pub fn run_episode<E: Environment + ?Sized>(&self, env: &mut E) -> Result<f64> {
        let mut obs = env.reset();
        let mut aug = self.start();
        let mut scratch = Scratch::default();
        let mut input = Vec::with_capacity(self.online.input_dim());
        loop {
            input.clear();
            self.encode_into(&obs.features, aug, &mut input);
            let q = self.online.forward_batch(&input, 1, &mut scratch);
            let a = self.select(q, aug);
            let step = env.step(a)?;
            aug = aug.advance(step.reward, self.gamma);
            if step.done {
                return Ok(aug.s);
            }
            obs = step.obs;
        }
    }
}

/// Uniform-sampling ring buffer of encoded transitions.
#[derive(Debug, Clone)]
pub struct Replay {
    capacity: usize,
    dim: usize,
    len: usize,
    next: usize,
    inputs: Vec<f64>,
    next_inputs: Vec<f64>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    next_aug: Vec<Aug>,
}

impl Replay {
    pub fn new(capacity: usize, dim: usize) -> Self {
        Self {
            capacity,
            dim,
            len: 0,
            next: 0,
            inputs: vec![0.0; capacity * dim],
            next_inputs: vec![0.0; capacity * dim],
            actions: vec![0; capacity],
            rewards: vec![0.0; capacity],
            dones: vec![false; capacity],
            next_aug: vec![Aug::start(0.0); capacity],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(&mut self, input: &[f64], action: usize, reward: f64, next_input: &[f64], done: bool, next_aug: Aug) {
        let i = self.next;
        let d = self.dim;
        self.inputs[i * d..(i + 1) * d].copy_from_slice(input);
        self.next_inputs[i * d..(i + 1) * d].copy_from_slice(next_input);
        self.actions[i] = action;
        self.rewards[i] = reward;
        self.dones[i] = done;
        self.next_aug[i] = next_aug;
        self.next = (i + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    /// Draws `batch` stored indices uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R, out: &mut Vec<usize>) {
        assert!(self.len > 0, "sampling an empty replay buffer");
        out.clear();
        out.extend((0..batch).map(|_| rng.random_range(0..self.len)));
    }
}

/// One row of the training metrics stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub step: usize,
    /// Mean loss over the gradient steps of the interval.
    pub loss: Option<f64>,
    /// Mean discounted return of the last 100 finished episodes.
    pub episode_return_mean: Option<f64>,
    /// W1 between the last two reference quantile vectors (QR-SRM).
    pub theta_w1: Option<f64>,
    pub epsilon: f64,
}

/// One outer-loop step of a QR-SRM run.
#[derive(Debug, Clone, PartialEq)]
pub struct HUpdate {
    pub step: usize,
    pub action: usize,
    /// SRM of the chosen initial row.
    pub srm: f64,
    /// `E[h(G)]` of the chosen row under the utility it replaced.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub records: Vec<TrainRecord>,
    pub h_updates: Vec<HUpdate>,
}

/// Trains `algorithm` on `env` for `config.total_timesteps` steps.
///
/// Fully determined by `seed`: the environment uses stream 0 of `seed` and
/// the agent an independent generator.
pub fn train(algorithm: Algorithm, mut env: Env, config: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ AGENT_SALT);
    let mut agent = Agent::new(algorithm, &env, config, &mut rng)?;
    let mut target = agent.online.clone();
    env.reseed(seed, 0);

    let dim = agent.online.input_dim();
    let n = agent.quantiles();
    let out_dim = agent.actions() * n;
    let gamma = config.gamma;
    let mut replay = Replay::new(config.replay_capacity, dim);

    let mut obs = env.reset();
    let x0 = obs.features.clone();
    let mut aug = agent.start();
    let mut input = agent.encode(&obs.features, aug);
    let mut next_input = Vec::with_capacity(dim);

    let mut scratch = Scratch::default();
    let mut indices = Vec::with_capacity(config.batch_size);
    let mut batch_inputs = vec![0.0; config.batch_size * dim];
    let mut batch_next = vec![0.0; config.batch_size * dim];
    let mut batch_actions = vec![0; config.batch_size];
    let mut batch_targets = vec![0.0; config.batch_size * n];

    let mut records = Vec::new();
    let mut h_updates = Vec::new();
    let mut recent = VecDeque::with_capacity(100);
    let mut train_steps = 0usize;
    let (mut loss_sum, mut loss_count) = (0.0, 0usize);
    let mut theta_w1 = None;

    for step in 0..config.total_timesteps {
        let eps = config.epsilon(step);
        let action = if rng.random::<f64>() < eps {
            rng.random_range(0..agent.actions())
        } else {
            let q = agent.online.forward_batch(&input, 1, &mut scratch);
            agent.select(q, aug)
        };
        let st = env.step(action)?;
        let next_aug = aug.advance(st.reward, gamma);
        next_input.clear();
        agent.encode_into(&st.obs.features, next_aug, &mut next_input);
        replay.push(&input, action, st.reward, &next_input, st.done, next_aug);
        if st.done {
            if recent.len() == 100 {
                recent.pop_front();
            }
            recent.push_back(next_aug.s);
            obs = env.reset();
            aug = agent.start();
            input.clear();
            agent.encode_into(&obs.features, aug, &mut input);
        } else {
            aug = next_aug;
            std::mem::swap(&mut input, &mut next_input);
        }

        let t = step + 1;
        if t >= config.warmup && t % config.train_interval == 0 {
            replay.sample(config.batch_size, &mut rng, &mut indices);
            for (k, &i) in indices.iter().enumerate() {
                batch_inputs[k * dim..(k + 1) * dim].copy_from_slice(&replay.inputs[i * dim..(i + 1) * dim]);
                batch_next[k * dim..(k + 1) * dim].copy_from_slice(&replay.next_inputs[i * dim..(i + 1) * dim]);
                batch_actions[k] = replay.actions[i];
            }
            let next_q = target.forward_batch(&batch_next, config.batch_size, &mut scratch);
            for (k, &i) in indices.iter().enumerate() {
                let rows = &next_q[k * out_dim..(k + 1) * out_dim];
                let a = agent.select(rows, replay.next_aug[i]);
                td_targets_into(
                    &rows[a * n..(a + 1) * n],
                    replay.rewards[i],
                    gamma,
                    replay.dones[i],
                    &mut batch_targets[k * n..(k + 1) * n],
                );
            }
            let loss = agent.online.train_step(&Batch {
                inputs: &batch_inputs,
                actions: &batch_actions,
                targets: &batch_targets,
            })?;
            loss_sum += loss;
            loss_count += 1;
            train_steps += 1;
            if train_steps % config.sync_frequency == 0 {
                target.sync_from(&agent.online);
            }
        }
        if t >= config.warmup {
            match agent.algorithm {
                Algorithm::QrSrm(_) if t % config.h_frequency == 0 => {
                    let before = agent.h.clone().expect("QR-SRM agents carry a utility");
                    let (moved, a) = agent.update_h(&x0)?;
                    let rows = agent.initial_rows(&x0);
                    let row = &rows[a * n..(a + 1) * n];
                    let Algorithm::QrSrm(spectrum) = &agent.algorithm else { unreachable!() };
                    h_updates.push(HUpdate {
                        step: t,
                        action: a,
                        srm: srm_of_values(spectrum, row)?,
                        objective: before.constant() + before.mean_hinge(row, 0.0, 1.0),
                    });
                    theta_w1 = Some(moved);
                }
                Algorithm::QrCvar { .. } if t % config.b_frequency == 0 => {
                    agent.update_b(&x0)?;
                }
                _ => {}
            }
        }
        if t % config.log_interval == 0 {
            records.push(TrainRecord {
                step: t,
                loss: (loss_count > 0).then(|| loss_sum / loss_count as f64),
                episode_return_mean: (!recent.is_empty()).then(|| recent.iter().sum::<f64>() / recent.len() as f64),
                theta_w1,
                epsilon: eps,
            });
            loss_sum = 0.0;
            loss_count = 0;
        }
    }
    Ok(TrainOutcome { agent, records, h_updates })
}
