//! Greedy action rules over an `A × N` matrix of quantile estimates.
//!
//! `quantiles` is row-major: row `a` holds the `N` quantiles of action `a`.
//! Every rule breaks ties toward the lowest action index.

use alloc::vec::Vec;

use crate::utility::HFunction;

/// Index of the first maximum.
pub fn argmax(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.into_iter().enumerate() {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

fn rows(quantiles: &[f64], n: usize) -> core::slice::ChunksExact<'_, f64> {
    assert!(n > 0 && quantiles.len() % n == 0, "quantile matrix is not A×N");
    quantiles.chunks_exact(n)
}

pub fn row_mean(row: &[f64]) -> f64 {
    row.iter().sum::<f64>() / row.len() as f64
}

/// QR-SRM greedy action at the augmented state `(x′, s′, c′)`:
/// `argmax_a (1/N) Σ_{i,j} μ̃_i min(s′ + c′θ_j(a) − θ̃_i, 0)`.
pub fn greedy_action(h: &HFunction, quantiles: &[f64], n: usize, s: f64, c: f64) -> usize {
    argmax(rows(quantiles, n).map(|row| h.mean_hinge(row, s, c)))
}

/// Distributional TD targets `r + γθ_j(x′, a*)`, or `r` on terminal steps.
pub fn td_targets(next_row: &[f64], reward: f64, gamma: f64, done: bool) -> Vec<f64> {
    let mut out = alloc::vec![0.0; next_row.len()];
    td_targets_into(next_row, reward, gamma, done, &mut out);
    out
}

pub fn td_targets_into(next_row: &[f64], reward: f64, gamma: f64, done: bool, out: &mut [f64]) {
    for (o, t) in out.iter_mut().zip(next_row) {
        *o = if done { reward } else { reward + gamma * t };
    }
}

/// Risk-neutral QR-DQN: highest mean quantile.
pub fn qr_dqn_action(quantiles: &[f64], n: usize) -> usize {
    argmax(rows(quantiles, n).map(row_mean))
}

/// Static-CVaR selection with the state-carried threshold `b′`:
/// `argmax_a (1/N) Σ_j min(θ_j(a) − b′, 0)`.
pub fn qr_cvar_action(quantiles: &[f64], n: usize, b: f64) -> usize {
    argmax(rows(quantiles, n).map(|row| row.iter().map(|t| (t - b).min(0.0)).sum::<f64>() / n as f64))
}

/// Empirical `CVaR_α` of `N` equally weighted values; the quantile straddling
/// `αN` enters fractionally.
pub fn row_cvar(row: &[f64], alpha: f64) -> f64 {
    if alpha >= 1.0 {
        return row_mean(row);
    }
    let mut sorted = row.to_vec();
    sorted.sort_by(f64::total_cmp);
    let base = sorted[0];
    let mass = alpha * row.len() as f64;
    let mut remaining = mass;
    let mut acc = 0.0;
    for v in sorted {
        let take = remaining.min(1.0);
        acc += (v - base) * take;
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    base + acc / mass
}

/// Per-step CVaR selection (QR-iCVaR).
pub fn qr_icvar_action(quantiles: &[f64], n: usize, alpha: f64) -> usize {
    argmax(rows(quantiles, n).map(|row| row_cvar(row, alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::RiskSpectrum;
    use alloc::vec;

    #[test]
    fn srm_greedy_examples() {
        let h = HFunction::from_parts(vec![0.0, 0.0], vec![0.0, 2.0], vec![0.0, 1.0]).unwrap();
        let q = [0.0, 0.0, -10.0, 10.0];
        assert_eq!(greedy_action(&h, &q, 2, 0.0, 1.0), 0);
        assert_eq!(h.mean_hinge(&q[2..], 0.0, 1.0), -10.0);
        let single = HFunction::initial(&RiskSpectrum::cvar(0.3).unwrap(), 3);
        assert_eq!(greedy_action(&single, &[5.0, -1.0, 2.0], 3, 0.3, 0.9), 0);
    }

    #[test]
    fn expectation_reduces_to_mean() {
        let h = HFunction::from_parts(vec![100.0; 3], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]).unwrap();
        let q = [1.0, 2.0, 3.0, 0.0, 0.0, 7.0, 2.0, 2.0, 2.0];
        assert_eq!(greedy_action(&h, &q, 3, 0.0, 1.0), qr_dqn_action(&q, 3));
        assert_eq!(qr_dqn_action(&q, 3), 1);
    }

    #[test]
    fn targets() {
        assert_eq!(td_targets(&[3.0, 4.0], 10.0, 0.9, true), vec![10.0, 10.0]);
        assert_eq!(td_targets(&[1.0, 2.0], 0.5, 0.5, false), vec![1.0, 1.5]);
    }

    #[test]
    fn baseline_examples() {
        assert_eq!(qr_dqn_action(&[0.0, 2.0, 1.0, 1.0], 2), 0);
        assert_eq!(qr_dqn_action(&[0.0, 0.0, 1.0, 1.0], 2), 1);
        assert_eq!(qr_cvar_action(&[1.0, 2.0, 3.0, 4.0], 2, -5.0), 0);
        assert_eq!(qr_cvar_action(&[1.0, 2.0], 2, 10.0), 0);
        assert_eq!(qr_icvar_action(&[-10.0, 10.0, 0.0, 0.0], 2, 0.5), 1);
        let row = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(row_cvar(&row, 0.25), 1.0);
        assert_eq!(row_cvar(&row, 0.5), 1.5);
        assert!((row_cvar(&row, 0.375) - (1.0 + 0.5 * 2.0) / 1.5).abs() < 1e-15);
    }
}
