//! Quantile Huber loss.

use crate::dist::QuantileDistribution;
use alloc::vec::Vec;

use crate::math;

/// `ρ_τ^κ(u) = |τ − 1{u<0}| · L_κ(u)` and its derivative in `u`.
///
/// `L_κ(u) = u²/2` for `|u| ≤ κ`, else `κ(|u| − κ/2)`. The derivative at
/// `u = 0` is taken as zero.
#[inline]
pub fn quantile_huber(u: f64, tau: f64, kappa: f64) -> (f64, f64) {
    let weight = if u < 0.0 { 1.0 - tau } else { tau };
    let a = math::abs(u);
    if a <= kappa {
        (weight * 0.5 * u * u, weight * u)
    } else {
        let slope = if u < 0.0 { -kappa } else { kappa };
        (weight * kappa * (a - 0.5 * kappa), weight * slope)
    }
}

/// Loss of one quantile row against a set of targets,
/// `Σ_i (1/M) Σ_j ρ_{τ̂_i}^κ(target_j − θ_i)`.
///
/// Writes `∂loss/∂θ_i` into `grad`. Runs in `O((N + M) log M)`: targets are
/// sorted once and each of the four pieces of the Huber loss (two linear
/// tails, two quadratic halves) is summed from prefix sums of the targets
/// and their squares, taken relative to the median for accuracy.
pub fn row_loss(theta: &[f64], targets: &[f64], kappa: f64, grad: &mut [f64]) -> f64 {
    let n = theta.len();
    let m = targets.len();
    let mut sorted = targets.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    if sorted.iter().any(|y| !y.is_finite()) {
        return f64::NAN;
    }
    let shift = sorted[m / 2];
    let mut p1 = alloc::vec![0.0; m + 1];
    let mut p2 = alloc::vec![0.0; m + 1];
    for (j, y) in sorted.iter().enumerate() {
        let d = y - shift;
        p1[j + 1] = p1[j] + d;
        p2[j + 1] = p2[j] + d * d;
    }
    // Σ_{j∈[a,b)} (y_j − t) and Σ (y_j − t)² with `t` relative to the shift
    let sums = |a: usize, b: usize, t: f64| {
        let k = (b - a) as f64;
        let s1 = p1[b] - p1[a];
        let s2 = p2[b] - p2[a];
        (s1 - k * t, s2 - 2.0 * t * s1 + k * t * t)
    };
    let two_n = 2.0 * n as f64;
    let inv_m = 1.0 / m as f64;
    // visiting θ in increasing order keeps the three split points monotone
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|a, b| theta[*a].total_cmp(&theta[*b]));
    let (mut lo, mut mid, mut hi) = (0, 0, 0);
    let mut total = 0.0;
    for &i in &order {
        let t = theta[i];
        let tau = (2 * i + 1) as f64 / two_n;
        while lo < m && sorted[lo] - t < -kappa {
            lo += 1;
        }
        mid = mid.max(lo);
        while mid < m && sorted[mid] - t < 0.0 {
            mid += 1;
        }
        hi = hi.max(mid);
        while hi < m && sorted[hi] - t <= kappa {
            hi += 1;
        }
        let ts = t - shift;
        let (u_lo, _) = sums(0, lo, ts);
        let (u_neg, q_neg) = sums(lo, mid, ts);
        let (u_pos, q_pos) = sums(mid, hi, ts);
        let (u_hi, _) = sums(hi, m, ts);
        let (k_lo, k_hi) = (lo as f64, (m - hi) as f64);
        let loss = (1.0 - tau) * (kappa * (-u_lo - 0.5 * kappa * k_lo) + 0.5 * q_neg.max(0.0))
            + tau * (0.5 * q_pos.max(0.0) + kappa * (u_hi - 0.5 * kappa * k_hi));
        let du = (1.0 - tau) * (u_neg - kappa * k_lo) + tau * (u_pos + kappa * k_hi);
        total += loss * inv_m;
        grad[i] = -du * inv_m;
    }
    total
}

/// Reference `O(NM)` evaluation of [`row_loss`].
pub fn row_loss_naive(theta: &[f64], targets: &[f64], kappa: f64, grad: &mut [f64]) -> f64 {
    let n = theta.len();
    let m = targets.len() as f64;
    let two_n = 2.0 * n as f64;
    let mut total = 0.0;
    for (i, (t, g)) in theta.iter().zip(grad.iter_mut()).enumerate() {
        let tau = (2 * i + 1) as f64 / two_n;
        let mut acc = 0.0;
        let mut dacc = 0.0;
        for y in targets {
            let (l, d) = quantile_huber(y - t, tau, kappa);
            acc += l;
            dacc += d;
        }
        total += acc / m;
        *g = -dacc / m;
    }
    total
}

/// Convenience wrapper returning the loss only.
pub fn row_loss_value(theta: &QuantileDistribution, targets: &[f64], kappa: f64) -> f64 {
    let mut grad = alloc::vec![0.0; theta.len()];
    row_loss(theta.theta(), targets, kappa, &mut grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_examples() {
        assert_eq!(quantile_huber(0.0, 0.3, 1.0), (0.0, 0.0));
        assert_eq!(quantile_huber(0.5, 0.5, 1.0), (0.0625, 0.25));
        let (l, d) = quantile_huber(-2.0, 0.25, 1.0);
        assert!((l - 0.75 * 1.5).abs() < 1e-15);
        assert_eq!(d, -0.75);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for &u in &[-3.0, -1.2, -0.4, 0.3, 0.9, 2.5] {
            for &tau in &[0.05, 0.5, 0.95] {
                for &kappa in &[0.5, 1.0, 2.0] {
                    let eps = 1e-6;
                    let fd = (quantile_huber(u + eps, tau, kappa).0 - quantile_huber(u - eps, tau, kappa).0) / (2.0 * eps);
                    assert!((fd - quantile_huber(u, tau, kappa).1).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn fast_row_loss_matches_reference() {
        let theta = [-3.0, -0.5, 0.0, 0.2, 1.7, 4.0];
        let targets = [0.1, -2.9, 3.5, 0.2, 0.2, -0.4, 9.0, 1.0, -7.5];
        for &kappa in &[1e-3, 0.5, 1.0, 3.0] {
            let (mut g1, mut g2) = ([0.0; 6], [0.0; 6]);
            let fast = row_loss(&theta, &targets, kappa, &mut g1);
            let slow = row_loss_naive(&theta, &targets, kappa, &mut g2);
            assert!((fast - slow).abs() < 1e-12 * slow.max(1.0));
            for (a, b) in g1.iter().zip(&g2) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let mut g = [0.0; 2];
        assert!(row_loss(&[0.0, 1.0], &[f64::NAN, 1.0], 1.0, &mut g).is_nan());
    }

    #[test]
    fn row_loss_zero_at_fixed_point() {
        let theta = [1.0, 1.0];
        let mut g = [9.0; 2];
        assert_eq!(row_loss(&theta, &[1.0, 1.0], 1.0, &mut g), 0.0);
        assert_eq!(g, [0.0, 0.0]);
    }
}
