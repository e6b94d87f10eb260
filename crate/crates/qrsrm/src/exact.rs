//! Exact distributional dynamic programming on fixture MDPs.
//!
//! The augmented state `(x, s, c)` is enumerated explicitly; `η_k` is the
//! distribution of the partial return `Σ_{t≤k} γ^t R_t` under the policy that
//! is greedy with respect to `η_{k−1}`.

use std::collections::HashMap;

use qrsrm_core::dist::quantile_project;
use qrsrm_core::measure::srm_value;
use qrsrm_core::policy::{argmax, greedy_action, qr_dqn_action};
use qrsrm_core::tabular::TabularQuantiles;
use qrsrm_core::{DiscreteDistribution, HFunction, RiskSpectrum};

use crate::env::Fixture;
use crate::error::Result;

/// How the greedy successor action is chosen.
#[derive(Debug, Clone, Copy)]
pub enum Selection<'a> {
    /// Maximize `E[h(s′ + c′G)]`.
    Utility(&'a HFunction),
    /// Maximize `E[G]`.
    Mean,
}

impl Selection<'_> {
    fn score(&self, dist: &DiscreteDistribution, s: f64, c: f64) -> f64 {
        match self {
            Selection::Utility(h) => dist.atoms().iter().map(|(v, p)| p * h.eval(s + c * v)).sum(),
            Selection::Mean => dist.mean(),
        }
    }
}

/// One reachable augmented state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedNode {
    pub node: usize,
    pub s: f64,
    pub c: f64,
    pub t: usize,
}

type Key = (usize, usize, u64, u64);

pub struct ExactSolver<'a> {
    fixture: &'a Fixture,
    selection: Selection<'a>,
    gamma: f64,
    cache: HashMap<Key, DiscreteDistribution>,
}

impl<'a> ExactSolver<'a> {
    pub fn new(fixture: &'a Fixture, selection: Selection<'a>) -> Self {
        Self { fixture, selection, gamma: fixture.default_gamma(), cache: HashMap::new() }
    }

    /// `η_k(x, s, c, a)`.
    pub fn partial_return(&mut self, node: usize, s: f64, c: f64, action: usize, k: usize) -> DiscreteDistribution {
        let key = (node * self.fixture.actions() + action, k, s.to_bits(), c.to_bits());
        if let Some(d) = self.cache.get(&key) {
            return d.clone();
        }
        let r = self.fixture.reward(node);
        let out = if k == 0 || self.fixture.is_leaf(node) {
            DiscreteDistribution::delta(r)
        } else {
            let (s2, c2) = (s + c * r, c * self.gamma);
            let succ = self.fixture.successors(node, action).to_vec();
            let parts: Vec<(f64, DiscreteDistribution)> = succ
                .iter()
                .map(|&(next, p)| {
                    let a = self.greedy(next, s2, c2, k - 1);
                    (p, self.partial_return(next, s2, c2, a, k - 1).pushforward(r, self.gamma))
                })
                .collect();
            let refs: Vec<(f64, &DiscreteDistribution)> = parts.iter().map(|(p, d)| (*p, d)).collect();
            DiscreteDistribution::mix(&refs).expect("fixture probabilities are validated")
        };
        self.cache.insert(key, out.clone());
        out
    }

    /// Greedy action at `(x, s, c)` with respect to `η_k`.
    pub fn greedy(&mut self, node: usize, s: f64, c: f64, k: usize) -> usize {
        let scores: Vec<f64> = (0..self.fixture.actions())
            .map(|a| {
                let d = self.partial_return(node, s, c, a, k);
                self.selection.score(&d, s, c)
            })
            .collect();
        argmax(scores)
    }

    /// `V_k(x, s, c, a) = E[h(s + c·G_k)]`.
    pub fn value(&mut self, h: &HFunction, at: AugmentedNode, action: usize, k: usize) -> f64 {
        let d = self.partial_return(at.node, at.s, at.c, action, k);
        d.atoms().iter().map(|(v, p)| p * h.eval(at.s + at.c * v)).sum()
    }

    /// Iterations after which `η_k` no longer changes.
    pub fn horizon(&self) -> usize {
        self.fixture.depth()
    }

    /// All augmented states reachable from `(x₀, 0, 1)` under any actions.
    pub fn reachable(&self) -> Vec<AugmentedNode> {
        let mut out = Vec::new();
        let mut frontier = vec![AugmentedNode { node: self.fixture.root(), s: 0.0, c: 1.0, t: 0 }];
        while let Some(at) = frontier.pop() {
            if out.iter().any(|o: &AugmentedNode| {
                o.node == at.node && o.s.to_bits() == at.s.to_bits() && o.c.to_bits() == at.c.to_bits()
            }) {
                continue;
            }
            out.push(at);
            if self.fixture.is_leaf(at.node) {
                continue;
            }
            let s = at.s + at.c * self.fixture.reward(at.node);
            let c = at.c * self.gamma;
            for a in 0..self.fixture.actions() {
                for (next, _) in self.fixture.successors(at.node, a) {
                    frontier.push(AugmentedNode { node: *next, s, c, t: at.t + 1 });
                }
            }
        }
        out
    }
}

/// One outer iteration: the utility's optimal value and the SRM it certifies.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterStep {
    /// `max_a E[h_l(G^{π*_l}(x₀, 0, 1, a))]`.
    pub objective: f64,
    /// SRM of the initial action with the highest SRM.
    pub srm: f64,
    pub action: usize,
}

/// Alternates exact inner optimization with `h ← h_{φ, G*}` from the root.
pub fn outer_loop(fixture: &Fixture, spectrum: &RiskSpectrum, iterations: usize) -> Vec<OuterStep> {
    let mut h = HFunction::initial(spectrum, 1);
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut solver = ExactSolver::new(fixture, Selection::Utility(&h));
        let k = solver.horizon();
        let root = fixture.root();
        let dists: Vec<DiscreteDistribution> =
            (0..fixture.actions()).map(|a| solver.partial_return(root, 0.0, 1.0, a, k)).collect();
        let objective = dists
            .iter()
            .map(|d| h.expectation(d))
            .fold(f64::NEG_INFINITY, f64::max);
        let action = argmax(dists.iter().map(|d| srm_value(spectrum, d)));
        let srm = srm_value(spectrum, &dists[action]);
        h = HFunction::build_exact(spectrum, &dists[action]);
        out.push(OuterStep { objective, srm, action });
    }
    out
}

/// Quantile dynamic programming on a table indexed by `(node, s-bin, t)`.
pub struct TabularSweeps<'a> {
    fixture: &'a Fixture,
    states: Vec<AugmentedNode>,
    pub table: TabularQuantiles,
}

impl<'a> TabularSweeps<'a> {
    /// `s_bins` must separate the distinct accumulated rewards met at each
    /// `(node, t)`; a fine grid over the return range does.
    pub fn new(fixture: &'a Fixture, quantiles: usize, s_bins: usize) -> Result<Self> {
        let states = ExactSolver::new(fixture, Selection::Mean).reachable();
        let (lo, hi) = fixture.reward_bounds();
        let gamma = fixture.default_gamma();
        let span = 1.0 / (1.0 - gamma);
        let table = TabularQuantiles::new(
            fixture.nodes(),
            s_bins,
            fixture.depth() + 1,
            fixture.actions(),
            quantiles,
            (lo.min(0.0) * span, hi.max(0.0) * span),
        )?;
        Ok(Self { fixture, states, table })
    }

    pub fn states(&self) -> &[AugmentedNode] {
        &self.states
    }

    /// Quantile row for `(x, s, c = γ^t, a)`.
    pub fn row(&self, at: AugmentedNode, action: usize) -> &[f64] {
        self.table.row(at.node, self.table.s_bin(at.s), at.t, action)
    }

    fn select(&self, selection: Selection<'_>, at: AugmentedNode) -> usize {
        let n = self.table.quantiles();
        let q = self.table.state(at.node, self.table.s_bin(at.s), at.t);
        match selection {
            Selection::Utility(h) => greedy_action(h, q, n, at.s, at.c),
            Selection::Mean => qr_dqn_action(q, n),
        }
    }

    /// Greedy action at a state under the current table.
    pub fn greedy(&self, selection: Selection<'_>, at: AugmentedNode) -> usize {
        self.select(selection, at)
    }

    /// One synchronous sweep with step size `lr` (1 replaces every entry by
    /// the projected Bellman target).
    pub fn sweep(&mut self, selection: Selection<'_>, lr: f64) -> Result<()> {
        let n = self.table.quantiles();
        let gamma = self.fixture.default_gamma();
        let mut updates = Vec::new();
        for &at in &self.states {
            let r = self.fixture.reward(at.node);
            for a in 0..self.fixture.actions() {
                let target = if self.fixture.is_leaf(at.node) {
                    vec![r; n]
                } else {
                    let next = |node| AugmentedNode { node, s: at.s + at.c * r, c: at.c * gamma, t: at.t + 1 };
                    let mut atoms = Vec::new();
                    for &(node, p) in self.fixture.successors(at.node, a) {
                        let x = next(node);
                        let a2 = self.select(selection, x);
                        atoms.extend(self.row(x, a2).iter().map(|v| (r + gamma * v, p / n as f64)));
                    }
                    quantile_project(&DiscreteDistribution::new(atoms)?, n).into_theta()
                };
                updates.push(((at.node, self.table.s_bin(at.s), at.t, a), target));
            }
        }
        for (index, target) in updates {
            self.table.blend(index, &target, lr)?;
        }
        Ok(())
    }
}
