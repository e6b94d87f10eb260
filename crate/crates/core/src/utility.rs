//! The concave utility `h` whose expectation attains the SRM supremum.
//!
//! Given reference quantiles `θ̃_i`, constant on level intervals with quantile
//! weights `μ̃_i` and level masses `m_i`,
//!
//! ```text
//! h(z) = Σ_i θ̃_i m_i + μ̃_i · min(z − θ̃_i, 0)
//! ```

use alloc::format;
use alloc::vec::Vec;

use crate::dist::{DiscreteDistribution, QuantileDistribution};
use crate::error::{Error, Result};
use crate::math;
use crate::spectrum::RiskSpectrum;

#[derive(Debug, Clone, PartialEq)]
pub struct HFunction {
    ref_quantiles: Vec<f64>,
    quantile_weights: Vec<f64>,
    level_masses: Vec<f64>,
    constant: f64,
    // suffix sums of μ̃ and μ̃θ̃ for O(log N) hinge evaluation
    tail_weight: Vec<f64>,
    tail_weighted_ref: Vec<f64>,
}

impl HFunction {
    pub fn from_parts(
        ref_quantiles: Vec<f64>,
        quantile_weights: Vec<f64>,
        level_masses: Vec<f64>,
    ) -> Result<Self> {
        let n = ref_quantiles.len();
        if n == 0 {
            return Err(Error::Domain("utility needs at least one reference quantile".into()));
        }
        for len in [quantile_weights.len(), level_masses.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if ref_quantiles.iter().any(|v| !v.is_finite()) || ref_quantiles.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Domain("reference quantiles must be finite and sorted".into()));
        }
        if quantile_weights.iter().chain(&level_masses).any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Domain("quantile weights and level masses must be non-negative".into()));
        }
        let mass: f64 = level_masses.iter().sum();
        if math::abs(mass - 1.0) > 1e-9 {
            return Err(Error::Domain(format!("level masses sum to {mass}")));
        }
        let constant = ref_quantiles.iter().zip(&level_masses).map(|(t, m)| t * m).sum();
        let mut tail_weight = alloc::vec![0.0; n + 1];
        let mut tail_weighted_ref = alloc::vec![0.0; n + 1];
        for i in (0..n).rev() {
            tail_weight[i] = tail_weight[i + 1] + quantile_weights[i];
            tail_weighted_ref[i] = tail_weighted_ref[i + 1] + quantile_weights[i] * ref_quantiles[i];
        }
        Ok(Self {
            ref_quantiles,
            quantile_weights,
            level_masses,
            constant,
            tail_weight,
            tail_weighted_ref,
        })
    }

    /// `h` for the quantile estimate `θ̃` on the uniform level grid.
    pub fn build(spectrum: &RiskSpectrum, quantiles: &QuantileDistribution) -> Self {
        let (weights, masses) = spectrum.quantile_weights(quantiles.len());
        Self::from_parts(quantiles.theta().to_vec(), weights, masses)
            .expect("quantile distribution and spectrum invariants give a valid utility")
    }

    /// `h_{φ,Z}` from the exact quantile function of a discrete distribution.
    pub fn build_exact(spectrum: &RiskSpectrum, dist: &DiscreteDistribution) -> Self {
        let atoms = dist.atoms();
        let mut breaks = alloc::vec![0.0];
        let mut acc = 0.0;
        for (_, p) in &atoms[..atoms.len() - 1] {
            acc += p;
            breaks.push(acc.min(1.0));
        }
        breaks.push(1.0);
        let (weights, masses) = spectrum.interval_weights(&breaks);
        let values = atoms.iter().map(|(v, _)| *v).collect();
        Self::from_parts(values, weights, masses)
            .expect("distribution and spectrum invariants give a valid utility")
    }

    /// The initial utility: `N` reference quantiles at zero.
    pub fn initial(spectrum: &RiskSpectrum, n: usize) -> Self {
        Self::build(spectrum, &QuantileDistribution::zeros(n))
    }

    pub fn ref_quantiles(&self) -> &[f64] {
        &self.ref_quantiles
    }

    pub fn quantile_weights(&self) -> &[f64] {
        &self.quantile_weights
    }

    pub fn level_masses(&self) -> &[f64] {
        &self.level_masses
    }

    pub fn len(&self) -> usize {
        self.ref_quantiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ref_quantiles.is_empty()
    }

    /// Replaces the reference quantiles, keeping weights and masses.
    pub fn with_ref_quantiles(&self, mut theta: Vec<f64>) -> Result<Self> {
        theta.sort_by(f64::total_cmp);
        Self::from_parts(theta, self.quantile_weights.clone(), self.level_masses.clone())
    }

    /// The action-independent term `Σ θ̃_i m_i`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `Σ_i μ̃_i · min(z − θ̃_i, 0)`.
    #[inline]
    pub fn hinge(&self, z: f64) -> f64 {
        let k = self.ref_quantiles.partition_point(|t| *t <= z);
        z * self.tail_weight[k] - self.tail_weighted_ref[k]
    }

    /// Full value `h(z)` including the constant term.
    pub fn eval(&self, z: f64) -> f64 {
        self.constant + self.hinge(z)
    }

    /// `E[h(Z)]` for a discrete distribution.
    pub fn expectation(&self, dist: &DiscreteDistribution) -> f64 {
        dist.atoms().iter().map(|(v, p)| p * self.eval(*v)).sum()
    }

    /// `(1/N) Σ_j hinge(s + c θ_j)`, the greedy score of one quantile row.
    #[inline]
    pub fn mean_hinge(&self, row: &[f64], s: f64, c: f64) -> f64 {
        row.iter().map(|t| self.hinge(s + c * t)).sum::<f64>() / row.len() as f64
    }
}
