use proptest::prelude::*;

use qrsrm_core::decompose::{decompose, recompose, xi_t};
use qrsrm_core::dist::quantile_project;
use qrsrm_core::measure::{cvar, srm_value};
use qrsrm_core::policy::{greedy_action, qr_cvar_action, qr_dqn_action, qr_icvar_action};
use qrsrm_core::{DiscreteDistribution, HFunction, QuantileDistribution, RiskSpectrum};

fn distribution() -> impl Strategy<Value = DiscreteDistribution> {
    prop::collection::vec((-50.0f64..50.0, 0.01f64..1.0), 1..12).prop_map(|raw| {
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        DiscreteDistribution::new(raw.into_iter().map(|(v, w)| (v, w / total)).collect()).unwrap()
    })
}

/// Atoms on an integer grid so affine maps with dyadic coefficients stay exact.
fn grid_distribution() -> impl Strategy<Value = DiscreteDistribution> {
    prop::collection::vec((0i32..20, 1u32..8), 1..6).prop_map(|raw| {
        let total: u32 = raw.iter().map(|(_, w)| w).sum();
        DiscreteDistribution::new(raw.into_iter().map(|(v, w)| (v as f64, w as f64 / total as f64)).collect())
            .unwrap()
    })
}

fn spectrum() -> impl Strategy<Value = RiskSpectrum> {
    prop_oneof![
        (0.01f64..=1.0).prop_map(|a| RiskSpectrum::cvar(a).unwrap()),
        prop::collection::vec((0.01f64..=1.0, 0.05f64..1.0), 1..5).prop_map(|raw| {
            let total: f64 = raw.iter().map(|(_, w)| w).sum();
            let (levels, weights) = raw.into_iter().map(|(a, w)| (a, w / total)).unzip();
            RiskSpectrum::wscvar(levels, weights).unwrap()
        }),
        (0.1f64..20.0).prop_map(|l| RiskSpectrum::erm(l).unwrap()),
        (1.0f64..10.0).prop_map(|n| RiskSpectrum::dprm(n).unwrap()),
    ]
}

fn mixture_spectrum() -> impl Strategy<Value = RiskSpectrum> {
    prop::collection::vec((1u32..=20, 1u32..10), 1..4).prop_map(|raw| {
        let total: u32 = raw.iter().map(|(_, w)| w).sum();
        let (levels, weights) = raw.into_iter().map(|(a, w)| (a as f64 / 20.0, w as f64 / total as f64)).unzip();
        RiskSpectrum::wscvar(levels, weights).unwrap()
    })
}

fn sorted_vec(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, n).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn conjugate_identity(z in distribution(), s in spectrum()) {
        let h = HFunction::build_exact(&s, &z);
        prop_assert!((h.expectation(&z) - srm_value(&s, &z)).abs() <= 1e-8);
    }

    #[test]
    fn utility_supremum_is_attained_at_own_quantiles(z in distribution(), s in spectrum(), other in distribution()) {
        // the exact utility attains the supremum; any other reference falls short
        let h = HFunction::build_exact(&s, &other);
        prop_assert!(h.expectation(&z) <= srm_value(&s, &z) + 1e-8);
    }

    #[test]
    fn coherence(z in distribution(), s in spectrum(), a in 0.0f64..5.0, b in -20.0f64..20.0) {
        let lhs = srm_value(&s, &z.affine(a, b));
        let rhs = a * srm_value(&s, &z) + b;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn cvar_monotone_in_level(z in distribution(), a in 0.001f64..=1.0, b in 0.001f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(cvar(&z, lo).unwrap() <= cvar(&z, hi).unwrap() + 1e-12);
    }

    #[test]
    fn srm_below_mean(z in distribution(), s in spectrum()) {
        prop_assert!(srm_value(&s, &z) <= z.mean() + 1e-9);
    }

    #[test]
    fn utility_concave_monotone_lipschitz(
        z in distribution(),
        s in spectrum(),
        mut pts in prop::collection::vec(-80.0f64..80.0, 3),
    ) {
        pts.sort_by(f64::total_cmp);
        prop_assume!(pts[1] - pts[0] > 1e-6 && pts[2] - pts[1] > 1e-6);
        let h = HFunction::build_exact(&s, &z);
        let slope = |x: f64, y: f64| (h.eval(y) - h.eval(x)) / (y - x);
        let (s1, s2) = (slope(pts[0], pts[1]), slope(pts[1], pts[2]));
        let bound = s.phi_at_zero() + 1e-9;
        for sl in [s1, s2] {
            prop_assert!(sl >= -1e-9 && sl <= bound, "slope {} bound {}", sl, bound);
        }
        prop_assert!(s2 <= s1 + 1e-7);
    }

    #[test]
    fn level_masses_sum_to_one(s in spectrum(), n in 1usize..200) {
        let (w, m) = s.quantile_weights(n);
        prop_assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(w.iter().chain(&m).all(|v| *v >= 0.0));
    }

    #[test]
    fn grid_cvar_weights_follow_closed_rule(n in 1usize..60, k in 1usize..60) {
        prop_assume!(k <= n);
        let alpha = k as f64 / n as f64;
        let (w, _) = RiskSpectrum::cvar(alpha).unwrap().quantile_weights(n);
        let j = if k == n { n - 1 } else { k };
        for (i, wi) in w.iter().enumerate() {
            let expected = if i == j { 1.0 / alpha } else { 0.0 };
            prop_assert!((wi - expected).abs() <= 1e-9 * expected.max(1.0), "i={} w={}", i, wi);
        }
    }

    #[test]
    fn pushforward_commutes_with_projection(z in distribution(), r in -5.0f64..5.0, g in 0.0f64..0.999, n in 1usize..40) {
        let a = quantile_project(&z.pushforward(r, g), n);
        let b = quantile_project(&z, n).pushforward(r, g);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cdf_consistent_with_quantiles(theta in sorted_vec(17, -10.0, 10.0)) {
        let q = QuantileDistribution::new(theta).unwrap();
        let n = q.len() as f64;
        for (i, t) in q.theta().iter().enumerate() {
            prop_assert!(q.cdf_eval(*t).0 >= (i + 1) as f64 / n - 1e-12);
        }
    }

    #[test]
    fn w1_is_a_metric(a in sorted_vec(9, -5.0, 5.0), b in sorted_vec(9, -5.0, 5.0), c in sorted_vec(9, -5.0, 5.0)) {
        let (a, b, c) = (
            QuantileDistribution::new(a).unwrap(),
            QuantileDistribution::new(b).unwrap(),
            QuantileDistribution::new(c).unwrap(),
        );
        prop_assert_eq!(a.w1(&a).unwrap(), 0.0);
        prop_assert_eq!(a.w1(&b).unwrap(), b.w1(&a).unwrap());
        prop_assert!(a.w1(&c).unwrap() <= a.w1(&b).unwrap() + b.w1(&c).unwrap() + 1e-12);
    }

    #[test]
    fn projection_beats_random_candidates(z in distribution(), n in 1usize..20, cands in prop::collection::vec(sorted_vec(19, -50.0, 50.0), 20)) {
        let best = z.w1_to_quantiles(&quantile_project(&z, n));
        for c in cands {
            let q = QuantileDistribution::new(c[..n].to_vec()).unwrap();
            prop_assert!(best <= z.w1_to_quantiles(&q) + 1e-12);
        }
    }

    #[test]
    fn greedy_action_is_translation_invariant(
        rows in prop::collection::vec(-16i32..16, 12),
        refs in prop::collection::vec(-16i32..16, 4),
        s in -8i32..8,
        shift in -32i32..32,
    ) {
        // quarter-integers keep every sum exact
        let q: Vec<f64> = rows.iter().map(|v| *v as f64 / 4.0).collect();
        let mut theta: Vec<f64> = refs.iter().map(|v| *v as f64 / 4.0).collect();
        theta.sort_by(f64::total_cmp);
        let spectrum = RiskSpectrum::wscvar(vec![0.25, 1.0], vec![0.5, 0.5]).unwrap();
        let h = HFunction::build(&spectrum, &QuantileDistribution::new(theta.clone()).unwrap());
        let shifted = h.with_ref_quantiles(theta.iter().map(|t| t + shift as f64).collect()).unwrap();
        let s = s as f64 / 4.0;
        prop_assert_eq!(
            greedy_action(&h, &q, 4, s, 0.5),
            greedy_action(&shifted, &q, 4, s + shift as f64, 0.5)
        );
    }

    #[test]
    fn expectation_spectrum_selects_max_mean(rows in prop::collection::vec(-100i32..100, 15)) {
        let q: Vec<f64> = rows.iter().map(|v| *v as f64).collect();
        let h = HFunction::from_parts(vec![1000.0; 5], vec![0.0, 0.0, 0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        prop_assert_eq!(greedy_action(&h, &q, 5, 0.0, 1.0), qr_dqn_action(&q, 5));
    }

    #[test]
    fn icvar_at_one_is_qr_dqn(q in prop::collection::vec(-10.0f64..10.0, 1..40), n in 1usize..5) {
        let len = q.len() / n * n;
        prop_assume!(len > 0);
        prop_assert_eq!(qr_icvar_action(&q[..len], n, 1.0), qr_dqn_action(&q[..len], n));
    }

    #[test]
    fn qr_cvar_action_is_translation_invariant(
        rows in prop::collection::vec(-40i32..40, 12),
        b in -40i32..40,
        shift in -40i32..40,
    ) {
        let q: Vec<f64> = rows.iter().map(|v| *v as f64 / 2.0).collect();
        let moved: Vec<f64> = q.iter().map(|v| v + shift as f64).collect();
        let b = b as f64 / 2.0;
        prop_assert_eq!(qr_cvar_action(&q, 3, b), qr_cvar_action(&moved, 3, b + shift as f64));
    }

    #[test]
    fn decomposition_recomposes_one_step(
        root in 0i32..10,
        succ in prop::collection::vec((1u32..6, grid_distribution()), 1..4),
        s in mixture_spectrum(),
    ) {
        let gamma = 0.5;
        let r0 = root as f64;
        let total: u32 = succ.iter().map(|(w, _)| w).sum();
        let probs: Vec<f64> = succ.iter().map(|(w, _)| *w as f64 / total as f64).collect();
        let shifted: Vec<DiscreteDistribution> = succ.iter().map(|(_, g)| g.pushforward(r0, gamma)).collect();
        let parts: Vec<(f64, &DiscreteDistribution)> = probs.iter().copied().zip(shifted.iter()).collect();
        let g0 = DiscreteDistribution::mix(&parts).unwrap();
        let mixture = s.cvar_mixture(0);

        for &(alpha, _) in &mixture {
            let mut expected = 0.0;
            for (p, (_, gt)) in probs.iter().zip(&succ) {
                let x = xi_t(gt, r0, gamma, &g0, alpha).unwrap();
                prop_assert!(alpha * x >= 0.0 && alpha * x <= 1.0 + 1e-12);
                expected += p * x;
            }
            prop_assert!((expected - 1.0).abs() <= 1e-9);
        }

        let mut successors = Vec::new();
        for (p, (_, gt)) in probs.iter().zip(&succ) {
            match decompose(&mixture, &g0, gt, r0, gamma) {
                Ok(d) => {
                    let total: f64 = d.components.iter().map(|(_, w)| w).sum();
                    prop_assert!((total - 1.0).abs() <= 1e-9);
                    if s.expectation_weight() > 0.0 {
                        prop_assert!(d.components.iter().any(|(l, w)| *l >= 1.0 - 1e-9 && *w > 0.0));
                    }
                    successors.push((*p, d.xi, d.value));
                }
                Err(qrsrm_core::Error::DegenerateDecomposition) => {}
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            }
        }
        prop_assert!((recompose(r0, gamma, &successors) - srm_value(&s, &g0)).abs() <= 1e-9);
    }
}
