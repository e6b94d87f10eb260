//! Tabular quantile estimates over a discretized augmented state space.
//!
//! Entries are indexed by `(cell, s-bin, t, action)`; `c = γ^t` is replaced
//! by the step index and `s` is binned uniformly over `[s_min, s_max]`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::loss;
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularQuantiles {
    cells: usize,
    s_bins: usize,
    horizon: usize,
    actions: usize,
    quantiles: usize,
    s_min: f64,
    s_max: f64,
    values: Vec<f64>,
}

impl TabularQuantiles {
    /// All entries start at zero (`δ_0`).
    pub fn new(
        cells: usize,
        s_bins: usize,
        horizon: usize,
        actions: usize,
        quantiles: usize,
        s_range: (f64, f64),
    ) -> Result<Self> {
        if cells == 0 || s_bins == 0 || horizon == 0 || actions == 0 || quantiles == 0 {
            return Err(Error::Domain("tabular dimensions must be positive".into()));
        }
        let (s_min, s_max) = s_range;
        if !(s_min.is_finite() && s_max.is_finite() && s_min <= s_max) {
            return Err(Error::Domain("invalid s range".into()));
        }
        let len = cells * s_bins * horizon * actions * quantiles;
        Ok(Self { cells, s_bins, horizon, actions, quantiles, s_min, s_max, values: alloc::vec![0.0; len] })
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn quantiles(&self) -> usize {
        self.quantiles
    }

    /// Bin of `s`; values outside the range fall in the edge bins.
    pub fn s_bin(&self, s: f64) -> usize {
        if self.s_max <= self.s_min {
            return 0;
        }
        let u = (s - self.s_min) / (self.s_max - self.s_min);
        let b = math::floor(u * self.s_bins as f64);
        if b <= 0.0 {
            0
        } else {
            (b as usize).min(self.s_bins - 1)
        }
    }

    fn offset(&self, cell: usize, bin: usize, t: usize) -> usize {
        assert!(cell < self.cells && bin < self.s_bins, "tabular index out of range");
        let t = t.min(self.horizon - 1);
        ((cell * self.s_bins + bin) * self.horizon + t) * self.actions * self.quantiles
    }

    /// `A × N` quantiles at one state.
    pub fn state(&self, cell: usize, bin: usize, t: usize) -> &[f64] {
        let o = self.offset(cell, bin, t);
        &self.values[o..o + self.actions * self.quantiles]
    }

    pub fn row(&self, cell: usize, bin: usize, t: usize, action: usize) -> &[f64] {
        let n = self.quantiles;
        &self.state(cell, bin, t)[action * n..(action + 1) * n]
    }

    pub fn row_mut(&mut self, cell: usize, bin: usize, t: usize, action: usize) -> &mut [f64] {
        let n = self.quantiles;
        let o = self.offset(cell, bin, t) + action * n;
        &mut self.values[o..o + n]
    }

    /// One gradient step on the quantile Huber loss toward `targets`.
    pub fn sgd_step(
        &mut self,
        index: (usize, usize, usize, usize),
        targets: &[f64],
        lr: f64,
        kappa: f64,
    ) -> Result<f64> {
        let (cell, bin, t, a) = index;
        let row = self.row_mut(cell, bin, t, a);
        let mut grad = alloc::vec![0.0; row.len()];
        let l = loss::row_loss(row, targets, kappa, &mut grad);
        if !l.is_finite() {
            return Err(Error::NonFinite("tabular loss".into()));
        }
        for (v, g) in row.iter_mut().zip(&grad) {
            *v -= lr * g;
        }
        Ok(l)
    }

    /// `θ ← (1 − lr)θ + lr·target` for a target already in quantile form.
    pub fn blend(&mut self, index: (usize, usize, usize, usize), target: &[f64], lr: f64) -> Result<()> {
        let (cell, bin, t, a) = index;
        let row = self.row_mut(cell, bin, t, a);
        if target.len() != row.len() {
            return Err(Error::DimensionMismatch { expected: row.len(), got: target.len() });
        }
        for (v, x) in row.iter_mut().zip(target) {
            *v = if lr == 1.0 { *x } else { (1.0 - lr) * *v + lr * x };
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabular entry".into()));
        }
        Ok(())
    }
}
