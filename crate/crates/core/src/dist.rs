//! Return distributions: exact atoms and `N`-quantile representations.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

const PROB_SUM_TOL: f64 = 1e-12;

/// Read access shared by both return-distribution representations.
pub trait ReturnDistribution {
    /// `(F(z), p(z))`: cumulative mass at or below `z` and point mass at `z`.
    ///
    /// Atoms within `tol` of `z` count as sitting at `z`.
    fn cdf_within(&self, z: f64, tol: f64) -> (f64, f64);

    /// The risk threshold `λ_α` used by the CVaR dual variable at level `α`.
    fn level_value(&self, alpha: f64) -> f64;

    fn cdf_at(&self, z: f64) -> (f64, f64) {
        self.cdf_within(z, 0.0)
    }

    fn to_discrete(&self) -> DiscreteDistribution;
}

/// Exact finite distribution as sorted `(value, probability)` atoms.
///
/// Equal values are merged and zero-probability atoms are dropped on
/// construction, so `p(z)` is well defined.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        let mut total = 0.0;
        for &(v, p) in &atoms {
            if !v.is_finite() {
                return Err(Error::InvalidDistribution(format!("non-finite atom {v}")));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidDistribution(format!("invalid probability {p}")));
            }
            total += p;
        }
        if math::abs(total - 1.0) > PROB_SUM_TOL {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self::from_parts_unchecked(atoms))
    }

    fn from_parts_unchecked(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.retain(|(_, p)| *p > 0.0);
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        Self { atoms: merged }
    }

    /// The point mass `δ_z`.
    pub fn delta(z: f64) -> Self {
        Self { atoms: alloc::vec![(z, 1.0)] }
    }

    /// Uniform distribution over `values` (duplicates merged).
    pub fn uniform(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        let p = 1.0 / values.len() as f64;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution(format!("non-finite atom {v}")));
        }
        Ok(Self::from_parts_unchecked(values.iter().map(|v| (*v, p)).collect()))
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(v, p)| v * p).sum()
    }

    pub fn min(&self) -> f64 {
        self.atoms[0].0
    }

    pub fn max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    /// Left-continuous inverse `F^{-1}(u) = inf{z : F(z) ≥ u}`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for &(v, p) in &self.atoms {
            acc += p;
            if acc >= u {
                return v;
            }
        }
        self.max()
    }

    /// Distribution of `r + γZ`.
    pub fn pushforward(&self, r: f64, gamma: f64) -> Self {
        Self::from_parts_unchecked(self.atoms.iter().map(|(v, p)| (r + gamma * v, *p)).collect())
    }

    /// Distribution of `a·Z + b` for any real `a`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        self.pushforward(b, a)
    }

    /// Exact mixture `Σ p_k D_k` with equal atoms merged.
    pub fn mix(components: &[(f64, &DiscreteDistribution)]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidDistribution("empty mixture".into()));
        }
        let mut total = 0.0;
        for (p, _) in components {
            if !(p.is_finite() && *p >= 0.0) {
                return Err(Error::InvalidDistribution(format!("invalid mixture weight {p}")));
            }
            total += p;
        }
        if math::abs(total - 1.0) > PROB_SUM_TOL {
            return Err(Error::InvalidDistribution(format!("mixture weights sum to {total}")));
        }
        let atoms = components
            .iter()
            .flat_map(|(w, d)| d.atoms.iter().map(move |(v, p)| (*v, w * p)))
            .collect();
        Ok(Self::from_parts_unchecked(atoms))
    }

    /// 1-Wasserstein distance as the area between the two CDFs.
    pub fn w1(&self, other: &DiscreteDistribution) -> f64 {
        let mut points: Vec<f64> = self.atoms.iter().chain(&other.atoms).map(|(v, _)| *v).collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        let (mut i, mut j) = (0, 0);
        let (mut fa, mut fb) = (0.0, 0.0);
        let mut area = 0.0;
        for w in points.windows(2) {
            while i < self.atoms.len() && self.atoms[i].0 <= w[0] {
                fa += self.atoms[i].1;
                i += 1;
            }
            while j < other.atoms.len() && other.atoms[j].0 <= w[0] {
                fb += other.atoms[j].1;
                j += 1;
            }
            area += math::abs(fa - fb) * (w[1] - w[0]);
        }
        area
    }

    /// 1-Wasserstein distance to a quantile representation.
    pub fn w1_to_quantiles(&self, q: &QuantileDistribution) -> f64 {
        self.w1(&q.to_discrete())
    }
}

impl ReturnDistribution for DiscreteDistribution {
    fn cdf_within(&self, z: f64, tol: f64) -> (f64, f64) {
        let mut f = 0.0;
        let mut p = 0.0;
        for &(v, q) in &self.atoms {
            if v <= z + tol {
                f += q;
                if v >= z - tol {
                    p += q;
                }
            } else {
                break;
            }
        }
        (f.min(1.0), p)
    }

    /// Left-continuous inverse CDF at `α`.
    fn level_value(&self, alpha: f64) -> f64 {
        self.quantile(alpha)
    }

    fn to_discrete(&self) -> DiscreteDistribution {
        self.clone()
    }
}

/// `N` equally weighted sorted atoms `θ_i = F^{-1}(τ̂_i)`, `τ̂_i = (2i−1)/(2N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileDistribution {
    theta: Vec<f64>,
}

impl QuantileDistribution {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidDistribution("no quantiles".into()));
        }
        if let Some(v) = theta.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution(format!("non-finite quantile {v}")));
        }
        if theta.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidDistribution("quantiles are not sorted".into()));
        }
        Ok(Self { theta })
    }

    /// Sorts `theta` first; useful for raw network outputs that may cross.
    pub fn from_unsorted(mut theta: Vec<f64>) -> Result<Self> {
        theta.sort_by(f64::total_cmp);
        Self::new(theta)
    }

    /// `N` copies of zero, the initial estimate `δ_0`.
    pub fn zeros(n: usize) -> Self {
        Self { theta: alloc::vec![0.0; n.max(1)] }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_theta(self) -> Vec<f64> {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.theta.iter().sum::<f64>() / self.theta.len() as f64
    }

    /// `τ̂_i = (2i − 1)/(2N)` for `i = 1..=N`.
    pub fn midpoints(n: usize) -> Vec<f64> {
        let two_n = 2.0 * n as f64;
        (1..=n).map(|i| (2 * i - 1) as f64 / two_n).collect()
    }

    /// `θ_i ↦ r + γθ_i`.
    pub fn pushforward(&self, r: f64, gamma: f64) -> Self {
        Self { theta: self.theta.iter().map(|t| r + gamma * t).collect() }
    }

    /// `(#{θ_i ≤ z}/N, #{θ_i = z}/N)`.
    pub fn cdf_eval(&self, z: f64) -> (f64, f64) {
        self.cdf_within(z, 0.0)
    }

    /// Mean absolute difference of sorted quantiles.
    pub fn w1(&self, other: &QuantileDistribution) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        let sum: f64 = self.theta.iter().zip(&other.theta).map(|(a, b)| math::abs(a - b)).sum();
        Ok(sum / self.len() as f64)
    }

    pub fn to_discrete(&self) -> DiscreteDistribution {
        let p = 1.0 / self.theta.len() as f64;
        DiscreteDistribution::from_parts_unchecked(self.theta.iter().map(|v| (*v, p)).collect())
    }
}

impl ReturnDistribution for QuantileDistribution {
    fn cdf_within(&self, z: f64, tol: f64) -> (f64, f64) {
        let n = self.theta.len() as f64;
        let below = self.theta.partition_point(|t| *t <= z + tol);
        let strictly_below = self.theta.partition_point(|t| *t < z - tol);
        (below as f64 / n, (below - strictly_below.min(below)) as f64 / n)
    }

    /// `θ_i` for `τ_{i−1} ≤ α < τ_i`, i.e. `θ_{⌊αN⌋+1}` (clamped to `θ_N`).
    fn level_value(&self, alpha: f64) -> f64 {
        let n = self.theta.len();
        let idx = (math::floor(alpha * n as f64) as usize).min(n - 1);
        self.theta[idx]
    }

    fn to_discrete(&self) -> DiscreteDistribution {
        QuantileDistribution::to_discrete(self)
    }
}

/// Projection onto `N` quantiles at the probability midpoints.
pub fn quantile_project(dist: &DiscreteDistribution, n: usize) -> QuantileDistribution {
    let n = n.max(1);
    let mut theta = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut k = 0;
    let atoms = dist.atoms();
    for tau in QuantileDistribution::midpoints(n) {
        while k < atoms.len() - 1 && acc + atoms[k].1 < tau {
            acc += atoms[k].1;
            k += 1;
        }
        theta.push(atoms[k].0);
    }
    QuantileDistribution { theta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn example_one() -> DiscreteDistribution {
        DiscreteDistribution::new(vec![
            (5.0, 0.30),
            (6.0, 0.16),
            (7.0, 0.12),
            (8.0, 0.18),
            (9.0, 0.12),
            (10.0, 0.12),
        ])
        .unwrap()
    }

    #[test]
    fn construction_validates_and_merges() {
        assert!(DiscreteDistribution::new(vec![(1.0, 0.5)]).is_err());
        assert!(DiscreteDistribution::new(vec![(f64::NAN, 1.0)]).is_err());
        assert!(DiscreteDistribution::new(vec![(1.0, -0.5), (2.0, 1.5)]).is_err());
        let d = DiscreteDistribution::new(vec![(2.0, 0.25), (1.0, 0.5), (2.0, 0.25)]).unwrap();
        assert_eq!(d.atoms(), &[(1.0, 0.5), (2.0, 0.5)]);
        assert!(QuantileDistribution::new(vec![2.0, 1.0]).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(quantile_project(&DiscreteDistribution::delta(3.0), 4).theta(), &[3.0; 4]);
        let coin = DiscreteDistribution::uniform(&[0.0, 1.0]).unwrap();
        assert_eq!(quantile_project(&coin, 2).theta(), &[0.0, 1.0]);
        // probabilities of example one are multiples of 1/50, so 50 quantiles are exact
        let g = example_one();
        let q = quantile_project(&g, 50);
        assert_eq!(q.to_discrete().atoms().len(), 6);
        assert!(g.w1_to_quantiles(&q) < 1e-12);
    }

    #[test]
    fn left_continuous_quantile() {
        let g = example_one();
        assert_eq!(g.quantile(0.3), 5.0);
        assert_eq!(g.quantile(0.30000001), 6.0);
        assert_eq!(g.quantile(0.4), 6.0);
        assert_eq!(g.quantile(0.8), 9.0);
        assert_eq!(g.quantile(1.0), 10.0);
    }

    #[test]
    fn pushforward_examples() {
        let q = QuantileDistribution::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(q.pushforward(0.0, 0.0).theta(), &[0.0, 0.0]);
        assert_eq!(q.pushforward(0.5, 0.5).theta(), &[1.0, 1.5]);
        assert_eq!(QuantileDistribution::zeros(3).pushforward(2.5, 0.9).theta(), &[2.5; 3]);
    }

    #[test]
    fn cdf_examples() {
        let q = QuantileDistribution::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(q.cdf_eval(2.0), (0.5, 0.25));
        assert_eq!(q.cdf_eval(2.5), (0.5, 0.0));
        assert_eq!(q.cdf_eval(0.0), (0.0, 0.0));
        let g = example_one();
        assert_eq!(g.cdf_at(6.0).1, 0.16);
        assert!((g.cdf_at(6.0).0 - 0.46).abs() < 1e-15);
    }

    #[test]
    fn w1_examples() {
        let q = QuantileDistribution::new(vec![0.0, 2.0]).unwrap();
        assert_eq!(q.w1(&q).unwrap(), 0.0);
        let zeros = QuantileDistribution::new(vec![0.0, 0.0]).unwrap();
        let ones = QuantileDistribution::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(zeros.w1(&ones).unwrap(), 1.0);
        assert_eq!(q.w1(&ones).unwrap(), 1.0);
        assert!(matches!(q.w1(&QuantileDistribution::zeros(3)), Err(Error::DimensionMismatch { .. })));
        // the CDF-area route agrees with the sorted-difference route
        assert!((q.to_discrete().w1(&ones.to_discrete()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixture_examples() {
        let d = example_one();
        assert_eq!(DiscreteDistribution::mix(&[(1.0, &d)]).unwrap(), d);
        let one = DiscreteDistribution::delta(1.0);
        assert_eq!(DiscreteDistribution::mix(&[(0.5, &one), (0.5, &one)]).unwrap(), one);
        assert!(DiscreteDistribution::mix(&[(0.5, &one)]).is_err());
    }

    #[test]
    fn grid_level_value() {
        let q = QuantileDistribution::new(vec![7.0, 9.0, 12.0, 20.0, 21.0, 27.0, 30.0, 32.0, 39.0, 46.0]).unwrap();
        assert_eq!(q.level_value(0.25), 12.0);
        assert_eq!(q.level_value(0.8), 39.0);
        assert_eq!(q.level_value(1.0), 46.0);
    }
}
