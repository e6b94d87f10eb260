//! Run configuration files.
//!
//! Plain `key=value` lines; `#` starts a comment. Keys before the first
//! section are shared defaults, and every `[run.<name>]` section defines one
//! run that starts from those defaults. A file without sections describes a
//! single run called `default`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::agent::{parse_spectrum, Algorithm, TrainConfig};
use crate::env::{CliffConfig, CliffWalk, Env, Fixture, FixtureEnv, MeanRevConfig, MeanReversion, AmericanPut, PutConfig};
use crate::error::{Error, Result};

/// Keys that configure the environment rather than the learner.
const ENV_KEYS: &[(&str, &[&str])] = &[
    ("cliff", &["wind_probability", "cliff_reward", "goal_reward", "max_steps"]),
    ("put", &["drift", "volatility", "initial_price", "strike", "horizon", "dt"]),
    (
        "meanrev",
        &[
            "mean",
            "reversion",
            "sigma",
            "dt",
            "horizon",
            "max_inventory",
            "max_trade",
            "action_count",
            "transaction_cost",
            "terminal_penalty",
        ],
    ),
    ("fixture", &[]),
];

const RUN_KEYS: &[&str] = &[
    "env",
    "algo",
    "spectrum",
    "gamma",
    "total_timesteps",
    "seeds",
    "quantiles",
    "hidden",
    "learning_rate",
    "kappa",
    "batch_size",
    "replay_capacity",
    "warmup",
    "train_interval",
    "sync_frequency",
    "h_frequency",
    "b_frequency",
    "epsilon_start",
    "epsilon_final",
    "exploration_fraction",
    "log_interval",
    "eval_episodes",
    "metrics",
    "output",
    "record_wall_time",
];

/// One resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    /// `cliff`, `put`, `meanrev` or `fixture:<example1|choice|path>`.
    pub env: String,
    pub env_params: BTreeMap<String, String>,
    pub algo: Algorithm,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub eval_episodes: usize,
    pub metrics: Vec<String>,
    pub output: PathBuf,
    /// Writes zero instead of the measured time so outputs are reproducible.
    pub record_wall_time: bool,
}

/// Splits a comma-separated metric list; pieces that do not start with a
/// letter continue the previous metric (`wscvar:0.1,1.0@0.8,0.2`).
pub fn split_metrics(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for piece in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match out.last_mut() {
            Some(last) if !piece.starts_with(|c: char| c.is_ascii_alphabetic()) => {
                last.push(',');
                last.push_str(piece);
            }
            _ => out.push(piece.to_string()),
        }
    }
    out
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn env_kind(env: &str) -> &str {
    env.split_once(':').map_or(env, |(k, _)| k)
}

/// Default training length per environment.
fn default_timesteps(env: &str) -> usize {
    match env_kind(env) {
        "meanrev" => 150_000,
        "fixture" => 20_000,
        _ => 100_000,
    }
}

impl RunConfig {
    /// Resolves raw key/value pairs; unspecified keys take their defaults.
    pub fn from_pairs(name: &str, pairs: &BTreeMap<String, String>) -> Result<Self> {
        let env = pairs.get("env").cloned().unwrap_or_else(|| "cliff".into());
        let kind = env_kind(&env);
        let env_keys = ENV_KEYS
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, keys)| *keys)
            .ok_or_else(|| Error::Config(format!("unknown environment `{env}`")))?;
        let mut env_params = BTreeMap::new();
        for (k, v) in pairs {
            if env_keys.contains(&k.as_str()) {
                env_params.insert(k.clone(), v.clone());
            } else if !RUN_KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown key `{k}` for environment `{kind}`")));
            }
        }

        let algo = match (pairs.get("algo").map(String::as_str), pairs.get("spectrum")) {
            (None | Some("qrsrm"), Some(s)) => Algorithm::QrSrm(parse_spectrum(s)?),
            (Some(a), None) => a.parse()?,
            (None, None) => Algorithm::QrDqn,
            (Some(a), Some(_)) => return Err(Error::Config(format!("`spectrum` conflicts with algo `{a}`"))),
        };

        let get = |k: &str| pairs.get(k).map(String::as_str);
        let mut train = TrainConfig { total_timesteps: default_timesteps(&env), ..TrainConfig::default() };
        let probe = build_env(&env, &env_params, None, 0)?;
        train.gamma = match get("gamma") {
            Some(g) => parse_num("gamma", g)?,
            None => probe.default_gamma(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = get(stringify!($field)) {
                    train.$field = parse_num(stringify!($field), v)?;
                }
            )*};
        }
        set!(
            total_timesteps,
            quantiles,
            learning_rate,
            kappa,
            batch_size,
            replay_capacity,
            warmup,
            train_interval,
            sync_frequency,
            h_frequency,
            epsilon_start,
            epsilon_final,
            exploration_fraction,
            log_interval
        );
        train.b_frequency = match get("b_frequency") {
            Some(v) => parse_num("b_frequency", v)?,
            None => train.h_frequency,
        };
        if let Some(v) = get("hidden") {
            train.hidden = v.split(',').map(|p| parse_num("hidden", p.trim())).collect::<Result<_>>()?;
        }
        train.validate()?;

        let seeds = match get("seeds") {
            Some(v) => v.split(',').map(|p| parse_num("seeds", p.trim())).collect::<Result<Vec<u64>>>()?,
            None => vec![0],
        };
        if seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        let metrics = split_metrics(get("metrics").unwrap_or("mean,cvar:0.1,cvar:0.3"));
        for m in &metrics {
            parse_spectrum(m)?;
        }
        let record_wall_time = match get("record_wall_time") {
            Some("true") | None => true,
            Some("false") => false,
            Some(other) => return Err(Error::Config(format!("record_wall_time: expected true/false, got `{other}`"))),
        };
        Ok(Self {
            name: name.to_string(),
            env,
            env_params,
            algo,
            train,
            seeds,
            eval_episodes: get("eval_episodes").map_or(Ok(10_000), |v| parse_num("eval_episodes", v))?,
            metrics,
            output: PathBuf::from(get("output").unwrap_or("runs")),
            record_wall_time,
        })
    }

    /// A fresh environment for this run.
    pub fn build_env(&self, seed: u64) -> Result<Env> {
        build_env(&self.env, &self.env_params, Some(self.train.gamma), seed)
    }

    /// Every effective setting, one `key=value` per line.
    pub fn resolved_text(&self) -> String {
        let t = &self.train;
        let mut out = String::new();
        let hidden: Vec<String> = t.hidden.iter().map(usize::to_string).collect();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let lines = [
            ("env", self.env.clone()),
            ("algo", self.algo.to_string()),
            ("gamma", format!("{:?}", t.gamma)),
            ("total_timesteps", t.total_timesteps.to_string()),
            ("seeds", seeds.join(",")),
            ("quantiles", t.quantiles.to_string()),
            ("hidden", hidden.join(",")),
            ("learning_rate", format!("{:?}", t.learning_rate)),
            ("kappa", format!("{:?}", t.kappa)),
            ("batch_size", t.batch_size.to_string()),
            ("replay_capacity", t.replay_capacity.to_string()),
            ("warmup", t.warmup.to_string()),
            ("train_interval", t.train_interval.to_string()),
            ("sync_frequency", t.sync_frequency.to_string()),
            ("h_frequency", t.h_frequency.to_string()),
            ("b_frequency", t.b_frequency.to_string()),
            ("epsilon_start", format!("{:?}", t.epsilon_start)),
            ("epsilon_final", format!("{:?}", t.epsilon_final)),
            ("exploration_fraction", format!("{:?}", t.exploration_fraction)),
            ("log_interval", t.log_interval.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("metrics", self.metrics.join(",")),
            ("output", self.output.display().to_string()),
            ("record_wall_time", self.record_wall_time.to_string()),
        ];
        let _ = writeln!(out, "[run.{}]", self.name);
        for (k, v) in lines {
            let _ = writeln!(out, "{k}={v}");
        }
        for (k, v) in &self.env_params {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

/// Builds an environment by name. `gamma` overrides a fixture's own discount.
pub fn build_env(env: &str, params: &BTreeMap<String, String>, gamma: Option<f64>, seed: u64) -> Result<Env> {
    let get = |k: &str| params.get(k).map(String::as_str);
    macro_rules! apply {
        ($cfg:ident; $($field:ident),*) => {$(
            if let Some(v) = get(stringify!($field)) {
                $cfg.$field = parse_num(stringify!($field), v)?;
            }
        )*};
    }
    match env.split_once(':') {
        None if env == "cliff" => {
            let mut c = CliffConfig::default();
            apply!(c; wind_probability, cliff_reward, goal_reward, max_steps);
            if !(0.0..=1.0).contains(&c.wind_probability) || c.max_steps == 0 {
                return Err(Error::Config("cliff: wind_probability in [0, 1] and max_steps ≥ 1 required".into()));
            }
            Ok(Env::Cliff(CliffWalk::new(c, seed)))
        }
        None if env == "put" => {
            let mut c = PutConfig::default();
            apply!(c; drift, volatility, initial_price, strike, horizon, dt);
            if c.horizon == 0 || !(c.dt > 0.0 && c.initial_price > 0.0 && c.strike > 0.0 && c.volatility >= 0.0) {
                return Err(Error::Config("put: positive horizon, dt, price and strike required".into()));
            }
            Ok(Env::Put(AmericanPut::new(c, seed)))
        }
        None if env == "meanrev" => {
            let mut c = MeanRevConfig::default();
            apply!(c; mean, reversion, sigma, dt, horizon, max_inventory, max_trade, action_count, transaction_cost, terminal_penalty);
            if c.horizon == 0 || c.action_count < 2 || !(c.dt > 0.0 && c.reversion > 0.0 && c.sigma >= 0.0) {
                return Err(Error::Config("meanrev: positive horizon, dt, reversion and ≥ 2 actions required".into()));
            }
            Ok(Env::MeanRev(MeanReversion::new(c, seed)))
        }
        Some(("fixture", spec)) => Ok(Env::Fixture(FixtureEnv::new(Fixture::load(spec, gamma)?, seed))),
        _ => Err(Error::Config(format!("unknown environment `{env}`"))),
    }
}

/// A run section before defaults are applied: the shared keys merged with
/// the section's own.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRun {
    pub name: String,
    /// Line of the section header (0 for a file without sections).
    pub line: usize,
    pub pairs: BTreeMap<String, String>,
}

impl RawRun {
    pub fn resolve(&self) -> Result<RunConfig> {
        RunConfig::from_pairs(&self.name, &self.pairs).map_err(|e| match e {
            Error::Config(msg) if self.line > 0 => Error::Parse { line: self.line, msg: format!("run `{}`: {msg}", self.name) },
            other => other,
        })
    }
}

/// Splits a configuration file into its runs without resolving them.
pub fn parse_raw(text: &str) -> Result<Vec<RawRun>> {
    let mut base = BTreeMap::new();
    let mut sections: Vec<RawRun> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('[') {
            let name = header
                .strip_suffix(']')
                .and_then(|h| h.trim().strip_prefix("run."))
                .filter(|n| !n.is_empty())
                .ok_or_else(|| Error::Parse { line: line_no, msg: format!("expected `[run.<name>]`, got `{line}`") })?;
            if sections.iter().any(|r| r.name == name) {
                return Err(Error::Parse { line: line_no, msg: format!("duplicate run `{name}`") });
            }
            sections.push(RawRun { name: name.to_string(), line: line_no, pairs: BTreeMap::new() });
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: line_no, msg: format!("expected key=value, got `{line}`") })?;
        let (k, v) = (k.trim(), v.trim());
        let known = RUN_KEYS.contains(&k) || ENV_KEYS.iter().any(|(_, keys)| keys.contains(&k));
        if !known {
            return Err(Error::Parse { line: line_no, msg: format!("unknown key `{k}`") });
        }
        let target = match sections.last_mut() {
            Some(r) => &mut r.pairs,
            None => &mut base,
        };
        if target.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Parse { line: line_no, msg: format!("duplicate key `{k}`") });
        }
    }
    if sections.is_empty() {
        return Ok(vec![RawRun { name: "default".into(), line: 0, pairs: base }]);
    }
    for r in &mut sections {
        let mut pairs = base.clone();
        pairs.append(&mut r.pairs);
        r.pairs = pairs;
    }
    Ok(sections)
}

/// The runs of a configuration file, in file order.
pub fn parse(text: &str) -> Result<Vec<RunConfig>> {
    parse_raw(text)?.iter().map(RawRun::resolve).collect()
}

pub fn load(path: &Path) -> Result<Vec<RunConfig>> {
    parse(&std::fs::read_to_string(path)?)
}
