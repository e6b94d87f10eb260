//! Intermediate risk preferences along a trajectory.
//!
//! A CVaR mixture `Σ w_i CVaR_{α_i}` optimized from the initial state induces,
//! at a later state with accumulated `(s, c)` and future return `G_t`, the
//! mixture `Σ (w_i ξ_i / ξ) CVaR_{α_i ξ_i}` where `ξ_i` is the CVaR dual
//! variable at level `α_i` and `ξ = Σ w_i ξ_i`.

use alloc::format;
use alloc::vec::Vec;

use crate::dist::ReturnDistribution;
use crate::error::{Error, Result};
use crate::math;
use crate::measure;

/// Smallest level reported for components that lost all their mass.
const MIN_LEVEL: f64 = 1e-12;

fn atom_tol(z: f64) -> f64 {
    1e-9 * math::abs(z).max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedPreference {
    /// `(level, weight)` per mixture component, in input order.
    pub components: Vec<(f64, f64)>,
    pub xi: f64,
    /// The induced risk of `G_t`.
    pub value: f64,
}

/// `λ_α`, the threshold whose lower tail carries mass `α` under `g0`.
pub fn lambda_level<D: ReturnDistribution + ?Sized>(g0: &D, alpha: f64) -> f64 {
    g0.level_value(alpha)
}

/// The dual variable `ξ_t^α` (so that `α ξ_t^α ∈ [0, 1]`).
///
/// With `z* = (λ_α − s)/c`, `α ξ = F_{G_t}(z*)`, minus the share of an atom
/// of `G_t` at `z*` matching the excess `F_{G_0}(λ_α) − α` of the atom of
/// `G_0` at `λ_α`.
pub fn xi_t<T, Z>(gt: &T, s: f64, c: f64, g0: &Z, alpha: f64) -> Result<f64>
where
    T: ReturnDistribution + ?Sized,
    Z: ReturnDistribution + ?Sized,
{
    if !(c > 0.0) {
        return Err(Error::Domain(format!("accumulated discount {c} must be positive")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("CVaR level {alpha} outside (0, 1]")));
    }
    let lambda = lambda_level(g0, alpha);
    let z = (lambda - s) / c;
    let (f_t, p_t) = gt.cdf_within(z, atom_tol(z));
    let mut scaled = f_t;
    if p_t > 0.0 {
        let (f_0, p_0) = g0.cdf_within(lambda, atom_tol(lambda));
        if p_0 > 0.0 {
            scaled -= p_t * (f_0 - alpha).max(0.0) / p_0;
        }
    }
    Ok(scaled.clamp(0.0, 1.0) / alpha)
}

/// Decomposes the mixture `[(level, weight)]` at a state with accumulated
/// `(s, c)` whose future return is `gt`.
pub fn decompose<T, Z>(
    mixture: &[(f64, f64)],
    g0: &Z,
    gt: &T,
    s: f64,
    c: f64,
) -> Result<DecomposedPreference>
where
    T: ReturnDistribution + ?Sized,
    Z: ReturnDistribution + ?Sized,
{
    let total: f64 = mixture.iter().map(|(_, w)| w).sum();
    if mixture.is_empty() || mixture.iter().any(|(_, w)| !(*w >= 0.0)) || math::abs(total - 1.0) > 1e-9 {
        return Err(Error::InvalidSpectrum("mixture weights must be non-negative and sum to one".into()));
    }
    let mut raw = Vec::with_capacity(mixture.len());
    let mut xi = 0.0;
    for &(alpha, w) in mixture {
        let x = xi_t(gt, s, c, g0, alpha)?;
        xi += w * x;
        raw.push((alpha * x, w * x));
    }
    if !(xi > 0.0) {
        return Err(Error::DegenerateDecomposition);
    }
    let atoms = gt.to_discrete();
    let mut value = 0.0;
    let components = raw
        .into_iter()
        .map(|(level, w)| {
            let level = level.clamp(MIN_LEVEL, 1.0);
            let weight = w / xi;
            if weight > 0.0 {
                value += weight * measure::cvar_unchecked(&atoms, level);
            }
            (level, weight)
        })
        .collect();
    Ok(DecomposedPreference { components, xi, value })
}

/// `s + c Σ p ξ value` over the successors `(p, ξ, value)` of one step.
pub fn recompose(s: f64, c: f64, successors: &[(f64, f64, f64)]) -> f64 {
    s + c * successors.iter().map(|(p, xi, v)| p * xi * v).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{DiscreteDistribution, QuantileDistribution};
    use alloc::vec;

    fn g() -> DiscreteDistribution {
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

    fn g11() -> DiscreteDistribution {
        DiscreteDistribution::new(vec![(6.0, 0.5), (12.0, 0.3), (14.0, 0.2)]).unwrap()
    }

    fn g12() -> DiscreteDistribution {
        DiscreteDistribution::new(vec![(8.0, 0.4), (10.0, 0.3), (16.0, 0.3)]).unwrap()
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_level(&g(), 0.4), 6.0);
        assert_eq!(lambda_level(&g(), 0.8), 9.0);
        assert_eq!(lambda_level(&DiscreteDistribution::delta(2.5), 0.3), 2.5);
    }

    #[test]
    fn xi_examples() {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(xi_t(&g11(), 2.0, 0.5, &g(), 0.4).unwrap(), 1.25));
        assert!(close(xi_t(&g11(), 2.0, 0.5, &g(), 0.8).unwrap(), 13.0 / 12.0));
        assert!(close(xi_t(&g12(), 2.0, 0.5, &g(), 0.4).unwrap(), 0.625));
        assert!(close(xi_t(&g12(), 2.0, 0.5, &g(), 0.8).unwrap(), 0.875));
        for a in [0.1, 0.4, 0.8, 1.0] {
            assert!(close(xi_t(&g(), 0.0, 1.0, &g(), a).unwrap(), 1.0));
        }
        assert!(xi_t(&g(), 0.0, 0.0, &g(), 0.5).is_err());
    }

    #[test]
    fn example_one_decomposition_recomposes() {
        let mix = [(0.4, 0.7), (0.8, 0.3)];
        let d11 = decompose(&mix, &g(), &g11(), 2.0, 0.5).unwrap();
        let d12 = decompose(&mix, &g(), &g12(), 2.0, 0.5).unwrap();
        assert!((d11.xi - 1.2).abs() < 1e-12);
        assert!((d12.xi - 0.7).abs() < 1e-12);
        assert!((d11.components[0].0 - 0.5).abs() < 1e-12);
        assert!((d11.value - 6.7292).abs() < 5e-3);
        assert!((d12.value - 8.32).abs() < 5e-3);
        let total = recompose(2.0, 0.5, &[(0.6, d11.xi, d11.value), (0.4, d12.xi, d12.value)]);
        assert!((total - 5.5875).abs() < 1e-9);
    }

    #[test]
    fn quantile_example() {
        let g0 = QuantileDistribution::new(vec![7., 9., 12., 20., 21., 27., 30., 32., 39., 46.]).unwrap();
        let gt = QuantileDistribution::new(vec![5., 6., 8., 14., 15., 17., 21., 25., 28., 35.]).unwrap();
        let d = decompose(&[(0.25, 0.6), (0.8, 0.4)], &g0, &gt, 5.0, 0.8).unwrap();
        assert!((d.xi - 1.22).abs() < 1e-9);
        assert!((d.components[0].0 - 0.3).abs() < 1e-9);
        assert!((d.components[1].0 - 1.0).abs() < 1e-9);
        assert!((d.components[0].1 - 0.59).abs() < 5e-3);
    }

    #[test]
    fn degenerate_mass_is_an_error() {
        let gt = DiscreteDistribution::delta(100.0);
        let err = decompose(&[(0.3, 1.0)], &g(), &gt, 0.0, 1.0);
        assert!(matches!(err, Err(Error::DegenerateDecomposition)));
    }
}
