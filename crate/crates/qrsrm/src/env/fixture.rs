//! Small acyclic MDPs given as a node/edge table, with exact enumeration.
//!
//! Text format, one entry per line (`#` starts a comment):
//!
//! ```text
//! x0 2            node and the reward collected there
//! x0 x11 0.6      edge with its transition probability
//! x0 x12 0.4 1    edge taken under action 1
//! ```
//!
//! The first node is the initial state; nodes without outgoing edges are
//! terminal. A node's edges either all carry an action or none do, in which
//! case every action shares them.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use qrsrm_core::DiscreteDistribution;

use super::{check_action, stream_rng, Environment, Observation, Step};
use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    names: Vec<String>,
    rewards: Vec<f64>,
    actions: usize,
    /// `edges[node][action]`: `(successor, probability)`; empty for leaves.
    edges: Vec<Vec<Vec<(usize, f64)>>>,
    gamma: f64,
}

pub const EXAMPLE_ONE: &str = "\
x0 2
x11 4
x12 6
x21 4
x22 16
x23 20
x24 4
x25 8
x26 20
x0 x11 0.6
x0 x12 0.4
x11 x21 0.5
x11 x22 0.3
x11 x23 0.2
x12 x24 0.4
x12 x25 0.3
x12 x26 0.3
";

/// Two actions everywhere, non-negative rewards, probabilities on a 0.1 grid.
pub const CHOICE: &str = "\
x0 1
x1 2
x2 0
x3 6
x4 3
x5 0
x6 12
x7 5
x0 x1 1.0 0
x0 x2 0.5 1
x0 x3 0.5 1
x1 x4 1.0 0
x1 x5 0.8 1
x1 x6 0.2 1
x2 x5 0.5 0
x2 x7 0.5 0
x2 x4 1.0 1
x3 x6 0.3 0
x3 x7 0.7 0
x3 x4 1.0 1
";

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

impl Fixture {
    pub fn parse(text: &str, gamma: f64) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut rewards = Vec::new();
        let mut raw_edges: Vec<(usize, String, String, f64, Option<usize>)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = content.split_whitespace().collect();
            match tokens.len() {
                2 => {
                    let reward: f64 = tokens[1]
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad reward `{}`", tokens[1])))?;
                    if !reward.is_finite() {
                        return Err(parse_err(line_no, "reward must be finite"));
                    }
                    if index.insert(tokens[0].to_string(), names.len()).is_some() {
                        return Err(parse_err(line_no, format!("node `{}` declared twice", tokens[0])));
                    }
                    names.push(tokens[0].to_string());
                    rewards.push(reward);
                }
                3 | 4 => {
                    let prob: f64 = tokens[2]
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad probability `{}`", tokens[2])))?;
                    if !(0.0..=1.0).contains(&prob) {
                        return Err(parse_err(line_no, format!("probability {prob} outside [0, 1]")));
                    }
                    let action = match tokens.get(3) {
                        Some(a) => Some(a.parse().map_err(|_| parse_err(line_no, format!("bad action `{a}`")))?),
                        None => None,
                    };
                    raw_edges.push((line_no, tokens[0].to_string(), tokens[1].to_string(), prob, action));
                }
                _ => return Err(parse_err(line_no, "expected `node reward` or `from to prob [action]`")),
            }
        }
        if names.is_empty() {
            return Err(parse_err(0, "fixture has no nodes"));
        }
        let actions = raw_edges.iter().filter_map(|e| e.4).max().map_or(1, |a| a + 1);
        let n = names.len();
        let mut labelled: Vec<Option<bool>> = vec![None; n];
        let mut edges = vec![vec![Vec::new(); actions]; n];
        for (line_no, from, to, prob, action) in raw_edges {
            let lookup = |name: &str| {
                index.get(name).copied().ok_or_else(|| parse_err(line_no, format!("unknown node `{name}`")))
            };
            let (f, t) = (lookup(&from)?, lookup(&to)?);
            match labelled[f] {
                Some(l) if l != action.is_some() => {
                    return Err(parse_err(line_no, format!("node `{from}` mixes labelled and unlabelled edges")));
                }
                _ => labelled[f] = Some(action.is_some()),
            }
            match action {
                Some(a) => edges[f][a].push((t, prob)),
                None => edges[f].iter_mut().for_each(|e| e.push((t, prob))),
            }
        }
        for (node, per_action) in edges.iter().enumerate() {
            if per_action.iter().all(Vec::is_empty) {
                continue;
            }
            for (a, list) in per_action.iter().enumerate() {
                let total: f64 = list.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > PROB_TOL {
                    return Err(parse_err(
                        0,
                        format!("probabilities out of `{}` under action {a} sum to {total}", names[node]),
                    ));
                }
            }
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Config(format!("fixture discount {gamma} outside (0, 1)")));
        }
        let fixture = Self { names, rewards, actions, edges, gamma };
        fixture.check_acyclic()?;
        Ok(fixture)
    }

    /// The two-level Markov process with `γ = 0.5` whose return takes six values.
    pub fn example_one() -> Self {
        Self::parse(EXAMPLE_ONE, 0.5).expect("built-in fixture is valid")
    }

    /// A two-action decision tree with non-negative rewards.
    pub fn choice() -> Self {
        Self::parse(CHOICE, 0.5).expect("built-in fixture is valid")
    }

    /// `"example1"`, `"choice"` or a path to a fixture file.
    pub fn load(spec: &str, gamma: Option<f64>) -> Result<Self> {
        match spec {
            "example1" => Ok(Self::with_gamma(Self::example_one(), gamma)),
            "choice" => Ok(Self::with_gamma(Self::choice(), gamma)),
            path => Self::parse(&std::fs::read_to_string(path)?, gamma.unwrap_or(0.5)),
        }
    }

    fn with_gamma(mut f: Self, gamma: Option<f64>) -> Self {
        if let Some(g) = gamma {
            f.gamma = g;
        }
        f
    }

    fn check_acyclic(&self) -> Result<()> {
        // 0 unvisited, 1 on stack, 2 done
        let mut state = vec![0u8; self.names.len()];
        fn visit(f: &Fixture, node: usize, state: &mut [u8]) -> Result<()> {
            match state[node] {
                1 => return Err(Error::Config(format!("fixture has a cycle through `{}`", f.names[node]))),
                2 => return Ok(()),
                _ => {}
            }
            state[node] = 1;
            for list in &f.edges[node] {
                for (next, _) in list {
                    visit(f, *next, state)?;
                }
            }
            state[node] = 2;
            Ok(())
        }
        for node in 0..self.names.len() {
            visit(self, node, &mut state)?;
        }
        Ok(())
    }

    pub fn default_gamma(&self) -> f64 {
        self.gamma
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn nodes(&self) -> usize {
        self.names.len()
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn name(&self, node: usize) -> &str {
        &self.names[node]
    }

    pub fn node(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn reward(&self, node: usize) -> f64 {
        self.rewards[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.edges[node].iter().all(Vec::is_empty)
    }

    pub fn successors(&self, node: usize, action: usize) -> &[(usize, f64)] {
        &self.edges[node][action]
    }

    /// Longest path length in steps (rewards collected along it).
    pub fn depth(&self) -> usize {
        fn go(f: &Fixture, node: usize) -> usize {
            1 + f.edges[node].iter().flatten().map(|(n, _)| go(f, *n)).max().unwrap_or(0)
        }
        go(self, self.root())
    }

    /// Reward range over all nodes.
    pub fn reward_bounds(&self) -> (f64, f64) {
        let lo = self.rewards.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Exact discounted return from `node` when every node plays `policy(node)`.
    pub fn return_distribution(&self, node: usize, policy: &dyn Fn(usize) -> usize) -> DiscreteDistribution {
        let r = self.rewards[node];
        if self.is_leaf(node) {
            return DiscreteDistribution::delta(r);
        }
        let succ = &self.edges[node][policy(node)];
        let parts: Vec<(f64, DiscreteDistribution)> = succ
            .iter()
            .map(|(n, p)| (*p, self.return_distribution(*n, policy).pushforward(r, self.gamma)))
            .collect();
        let refs: Vec<(f64, &DiscreteDistribution)> = parts.iter().map(|(p, d)| (*p, d)).collect();
        DiscreteDistribution::mix(&refs).expect("validated fixture probabilities")
    }

    /// Every root-to-leaf path with its probability and discounted return.
    pub fn trajectories(&self, policy: &dyn Fn(usize) -> usize) -> Vec<(Vec<usize>, f64, f64)> {
        let mut out = Vec::new();
        let mut path = vec![self.root()];
        self.walk(&mut path, 1.0, 0.0, 1.0, policy, &mut out);
        out
    }

    fn walk(
        &self,
        path: &mut Vec<usize>,
        prob: f64,
        ret: f64,
        disc: f64,
        policy: &dyn Fn(usize) -> usize,
        out: &mut Vec<(Vec<usize>, f64, f64)>,
    ) {
        let node = *path.last().expect("non-empty path");
        let ret = ret + disc * self.rewards[node];
        if self.is_leaf(node) {
            out.push((path.clone(), prob, ret));
            return;
        }
        for (next, p) in &self.edges[node][policy(node)] {
            path.push(*next);
            self.walk(path, prob * p, ret, disc * self.gamma, policy, out);
            path.pop();
        }
    }
}

/// A fixture as a simulator.
#[derive(Debug, Clone)]
pub struct FixtureEnv {
    fixture: Arc<Fixture>,
    node: usize,
    t: usize,
    rng: ChaCha8Rng,
}

impl FixtureEnv {
    pub fn new(fixture: Fixture, seed: u64) -> Self {
        Self { fixture: Arc::new(fixture), node: 0, t: 0, rng: stream_rng(seed, 0) }
    }

    pub fn fixture(&self) -> &Fixture {
        &self.fixture
    }

    fn observe(&self) -> Observation {
        let mut features = vec![0.0; self.fixture.nodes()];
        features[self.node] = 1.0;
        Observation { features, node: self.node, t: self.t }
    }
}

impl Environment for FixtureEnv {
    fn actions(&self) -> usize {
        self.fixture.actions()
    }

    fn feature_dim(&self) -> usize {
        self.fixture.nodes()
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.fixture.reward_bounds()
    }

    fn max_steps(&self) -> usize {
        self.fixture.depth()
    }

    fn reseed(&mut self, seed: u64, stream: u64) {
        self.rng = stream_rng(seed, stream);
    }

    fn reset(&mut self) -> Observation {
        self.node = self.fixture.root();
        self.t = 0;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        check_action(action, self.fixture.actions())?;
        let reward = self.fixture.reward(self.node);
        self.t += 1;
        if self.fixture.is_leaf(self.node) {
            return Ok(Step { obs: self.observe(), reward, done: true });
        }
        let u: f64 = self.rng.random();
        let succ = self.fixture.successors(self.node, action);
        let mut acc = 0.0;
        let mut next = succ[succ.len() - 1].0;
        for (n, p) in succ {
            acc += p;
            if u < acc {
                next = *n;
                break;
            }
        }
        self.node = next;
        Ok(Step { obs: self.observe(), reward, done: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_one_return_distribution() {
        let f = Fixture::example_one();
        let g = f.return_distribution(f.root(), &|_| 0);
        let expected = [(5.0, 0.30), (6.0, 0.16), (7.0, 0.12), (8.0, 0.18), (9.0, 0.12), (10.0, 0.12)];
        assert_eq!(g.atoms().len(), 6);
        for ((v, p), (ev, ep)) in g.atoms().iter().zip(expected) {
            assert_eq!(*v, ev);
            assert!((p - ep).abs() < 1e-12);
        }
        let path = [f.node("x0").unwrap(), f.node("x11").unwrap(), f.node("x23").unwrap()];
        let traj = f.trajectories(&|_| 0);
        let (_, p, r) = traj.iter().find(|(nodes, _, _)| nodes.as_slice() == path).unwrap();
        assert!((p - 0.12).abs() < 1e-12);
        assert_eq!(*r, 9.0);
    }

    #[test]
    fn single_node_is_a_point_mass() {
        let f = Fixture::parse("only 3.5\n", 0.9).unwrap();
        assert_eq!(f.return_distribution(0, &|_| 0), DiscreteDistribution::delta(3.5));
    }

    #[test]
    fn malformed_specs_are_rejected() {
        assert!(Fixture::parse("a 1\nb 2\na b 0.5\n", 0.5).is_err());
        assert!(Fixture::parse("a 1\na c 1.0\n", 0.5).is_err());
        assert!(Fixture::parse("a 1\nb 1\na b 1.0\nb a 1.0\n", 0.5).is_err());
        assert!(Fixture::parse("a x\n", 0.5).is_err());
        assert!(Fixture::parse("a 1\nb 1\nc 1\na b 1.0 0\na c 1.0\n", 0.5).is_err());
    }

    #[test]
    fn choice_fixture_has_two_actions() {
        let f = Fixture::choice();
        assert_eq!(f.actions(), 2);
        assert_eq!(f.depth(), 3);
        assert!(f.reward_bounds().0 >= 0.0);
    }

    #[test]
    fn simulation_matches_path_probabilities() {
        let f = Fixture::example_one();
        let mut env = FixtureEnv::new(f, 11);
        let mut hits = 0;
        let episodes = 20_000;
        for _ in 0..episodes {
            env.reset();
            let mut ret = 0.0;
            let mut disc = 1.0;
            loop {
                let s = env.step(0).unwrap();
                ret += disc * s.reward;
                disc *= 0.5;
                if s.done {
                    break;
                }
            }
            if ret == 9.0 {
                hits += 1;
            }
        }
        let freq = hits as f64 / episodes as f64;
        assert!((freq - 0.12).abs() < 3.0 * (0.12f64 * 0.88 / episodes as f64).sqrt() * 1.5);
    }
}
