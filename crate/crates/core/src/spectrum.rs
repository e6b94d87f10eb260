//! Risk spectra and their CVaR-mixture (Kusuoka) measures.
//!
//! A spectrum `φ` is non-increasing on `[0, 1]`, integrates to one, and is
//! left-continuous. Its mixing measure satisfies `φ(u) = ∫_{[u,1]} μ(dα)/α`,
//! so over any interval `[a, b)` of levels
//!
//! ```text
//! ∫_{[a,b)} μ(dα)/α = φ(a) − φ(b)
//! μ([a, b))         = a·φ(a) − b·φ(b) + Φ(b) − Φ(a)
//! ```
//!
//! with `Φ(u) = ∫_0^u φ` and the convention `φ(1⁺) = 0` on the last interval,
//! which picks up any atom of `μ` at level one.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A parametric risk spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum RiskSpectrum {
    /// `φ(u) = 1{u ≤ α}/α`.
    Cvar { alpha: f64 },
    /// `φ(u) = Σ w_i 1{u ≤ α_i}/α_i`.
    WsCvar { levels: Vec<f64>, weights: Vec<f64> },
    /// Exponential spectrum `φ(u) = λ e^{−λu} / (1 − e^{−λ})`.
    Erm { lambda: f64 },
    /// Dual power spectrum `φ(u) = ν (1 − u)^{ν−1}`.
    Dprm { nu: f64 },
}

fn valid_level(alpha: f64) -> bool {
    alpha.is_finite() && alpha > 0.0 && alpha <= 1.0
}

impl RiskSpectrum {
    pub fn cvar(alpha: f64) -> Result<Self> {
        if !valid_level(alpha) {
            return Err(Error::InvalidSpectrum(format!("CVaR level {alpha} outside (0, 1]")));
        }
        Ok(Self::Cvar { alpha })
    }

    /// The risk-neutral spectrum, `CVaR` at level one.
    pub fn expectation() -> Self {
        Self::Cvar { alpha: 1.0 }
    }

    pub fn wscvar(levels: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || levels.len() != weights.len() {
            return Err(Error::InvalidSpectrum(format!(
                "WSCVaR needs equally many levels and weights (got {} and {})",
                levels.len(),
                weights.len()
            )));
        }
        if let Some(a) = levels.iter().find(|a| !valid_level(**a)) {
            return Err(Error::InvalidSpectrum(format!("WSCVaR level {a} outside (0, 1]")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidSpectrum(format!("WSCVaR weight {w} is negative")));
        }
        let total: f64 = weights.iter().sum();
        if math::abs(total - 1.0) > WEIGHT_SUM_TOL {
            return Err(Error::InvalidSpectrum(format!("WSCVaR weights sum to {total}, not 1")));
        }
        Ok(Self::WsCvar { levels, weights })
    }

    pub fn erm(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidSpectrum(format!("ERM needs λ > 0, got {lambda}")));
        }
        Ok(Self::Erm { lambda })
    }

    pub fn dprm(nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu >= 1.0) {
            return Err(Error::InvalidSpectrum(format!("DPRM needs ν ≥ 1, got {nu}")));
        }
        Ok(Self::Dprm { nu })
    }

    /// Evaluates `φ(u)` with the left-continuous convention at jumps.
    pub fn phi(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain(format!("spectrum argument {u} outside [0, 1]")));
        }
        Ok(self.phi_unchecked(u))
    }

    pub(crate) fn phi_unchecked(&self, u: f64) -> f64 {
        match self {
            Self::Cvar { alpha } => {
                if u <= *alpha {
                    1.0 / alpha
                } else {
                    0.0
                }
            }
            Self::WsCvar { levels, weights } => levels
                .iter()
                .zip(weights)
                .filter(|(a, _)| u <= **a)
                .map(|(a, w)| w / a)
                .sum(),
            Self::Erm { lambda } => lambda * math::exp(-lambda * u) / -math::expm1(-lambda),
            Self::Dprm { nu } => nu * math::powf(1.0 - u, nu - 1.0),
        }
    }

    /// `φ(0)`, the Lipschitz constant of the associated utility.
    pub fn phi_at_zero(&self) -> f64 {
        self.phi_unchecked(0.0)
    }

    /// `φ` evaluated at the right end of a level interval; zero past one.
    fn phi_right(&self, u: f64) -> f64 {
        if u >= 1.0 {
            0.0
        } else {
            self.phi_unchecked(u)
        }
    }

    /// `Φ(u) = ∫_0^u φ`, in closed form for every family.
    pub fn cumulative(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Self::Cvar { alpha } => u.min(*alpha) / alpha,
            Self::WsCvar { levels, weights } => {
                levels.iter().zip(weights).map(|(a, w)| w * u.min(*a) / a).sum()
            }
            Self::Erm { lambda } => math::expm1(-lambda * u) / math::expm1(-lambda),
            Self::Dprm { nu } => 1.0 - math::powf(1.0 - u, *nu),
        }
    }

    /// Per-interval quantile weights `μ̃` and level masses `m` for the level
    /// intervals delimited by `breaks` (`breaks[0] = 0`, last entry `1`).
    ///
    /// Interval `i` is `[breaks[i], breaks[i+1])`; the last one is closed.
    pub fn interval_weights(&self, breaks: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = breaks.len().saturating_sub(1);
        let mut weights = Vec::with_capacity(k);
        let mut masses = Vec::with_capacity(k);
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let phi_a = self.phi_unchecked(a);
            let phi_b = self.phi_right(b);
            weights.push((phi_a - phi_b).max(0.0));
            let mass = a * phi_a - b.min(1.0) * phi_b + self.cumulative(b) - self.cumulative(a);
            masses.push(mass.max(0.0));
        }
        (weights, masses)
    }

    /// `(μ̃, m)` on the uniform grid `τ_i = i/N`.
    pub fn quantile_weights(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        self.interval_weights(&uniform_breaks(n))
    }

    /// The spectrum as a finite CVaR mixture `[(level, weight)]`.
    ///
    /// CVaR and WSCVaR are returned exactly. Smooth spectra are discretized
    /// onto the `n`-interval grid: interval `i` becomes one CVaR component of
    /// weight `m_i` whose level `m_i/μ̃_i` reproduces both `m_i` and `μ̃_i`.
    pub fn cvar_mixture(&self, n: usize) -> Vec<(f64, f64)> {
        match self {
            Self::Cvar { alpha } => alloc::vec![(*alpha, 1.0)],
            Self::WsCvar { levels, weights } => {
                levels.iter().copied().zip(weights.iter().copied()).collect()
            }
            Self::Erm { .. } | Self::Dprm { .. } => {
                let breaks = uniform_breaks(n);
                let (weights, masses) = self.interval_weights(&breaks);
                let mut out = Vec::new();
                for (i, (w, m)) in weights.iter().zip(&masses).enumerate() {
                    if *m > 0.0 && *w > 0.0 {
                        let level = (m / w).clamp(breaks[i].max(f64::MIN_POSITIVE), breaks[i + 1]);
                        out.push((level, *m));
                    }
                }
                let total: f64 = out.iter().map(|(_, m)| m).sum();
                for (_, m) in &mut out {
                    *m /= total;
                }
                out
            }
        }
    }

    /// Weight placed on the expectation (`CVaR_1`).
    pub fn expectation_weight(&self) -> f64 {
        match self {
            Self::Cvar { alpha } => {
                if *alpha >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::WsCvar { levels, weights } => levels
                .iter()
                .zip(weights)
                .filter(|(a, _)| **a >= 1.0)
                .map(|(_, w)| *w)
                .sum(),
            // μ has an atom of mass φ(1) at level one
            Self::Erm { .. } | Self::Dprm { .. } => self.phi_unchecked(1.0),
        }
    }
}

/// `τ_i = i/N` for `i = 0..=N`.
pub fn uniform_breaks(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (0..=n).map(|i| i as f64 / nf).collect()
}

fn parse_num(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidSpectrum(format!("cannot parse {what} `{text}`")))
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',').map(|t| parse_num(t, what)).collect()
}

impl FromStr for RiskSpectrum {
    type Err = Error;

    /// Parses `cvar:0.5`, `wscvar:0.1,1.0@0.8,0.2`, `erm:12.0`, `dprm:4.0`
    /// or `mean` (an alias of `cvar:1.0`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("mean") {
            return Ok(Self::expectation());
        }
        let (family, params) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidSpectrum(format!("missing `:` in spectrum `{s}`")))?;
        match family.to_ascii_lowercase().as_str() {
            "cvar" => Self::cvar(parse_num(params, "CVaR level")?),
            "wscvar" => {
                let (levels, weights) = params.split_once('@').ok_or_else(|| {
                    Error::InvalidSpectrum(format!("WSCVaR needs `levels@weights`, got `{params}`"))
                })?;
                Self::wscvar(parse_list(levels, "level")?, parse_list(weights, "weight")?)
            }
            "erm" => Self::erm(parse_num(params, "ERM λ")?),
            "dprm" => Self::dprm(parse_num(params, "DPRM ν")?),
            other => Err(Error::InvalidSpectrum(format!("unknown spectrum family `{other}`"))),
        }
    }
}

fn join(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{v:?}"));
    }
    out
}

impl fmt::Display for RiskSpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cvar { alpha } => write!(f, "cvar:{alpha:?}"),
            Self::WsCvar { levels, weights } => write!(f, "wscvar:{}@{}", join(levels), join(weights)),
            Self::Erm { lambda } => write!(f, "erm:{lambda:?}"),
            Self::Dprm { nu } => write!(f, "dprm:{nu:?}"),
        }
    }
}
