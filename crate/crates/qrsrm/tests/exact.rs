use qrsrm::env::Fixture;
use qrsrm::exact::{outer_loop, ExactSolver, Selection, TabularSweeps};
use qrsrm_core::dist::quantile_project;
use qrsrm_core::measure::srm_value;
use qrsrm_core::{HFunction, RiskSpectrum};

fn spectra() -> Vec<RiskSpectrum> {
    vec![
        RiskSpectrum::cvar(0.3).unwrap(),
        RiskSpectrum::expectation(),
        RiskSpectrum::wscvar(vec![0.2, 1.0], vec![0.6, 0.4]).unwrap(),
        RiskSpectrum::erm(3.0).unwrap(),
        RiskSpectrum::dprm(2.5).unwrap(),
    ]
}

#[test]
fn example_one_root_distribution() {
    let f = Fixture::example_one();
    let h = HFunction::initial(&RiskSpectrum::expectation(), 1);
    let mut solver = ExactSolver::new(&f, Selection::Utility(&h));
    let g = solver.partial_return(f.root(), 0.0, 1.0, 0, solver.horizon());
    assert_eq!(g, f.return_distribution(f.root(), &|_| 0));
    let s = RiskSpectrum::wscvar(vec![0.4, 0.8], vec![0.7, 0.3]).unwrap();
    assert!((srm_value(&s, &g) - 5.5875).abs() < 1e-12);
}

#[test]
fn inner_iteration_is_monotone_and_within_bound() {
    let f = Fixture::choice();
    let gamma = f.default_gamma();
    let g_max = f.reward_bounds().1 / (1.0 - gamma);
    for spectrum in spectra() {
        // a utility anchored at a non-trivial reference distribution
        let reference = f.return_distribution(f.root(), &|_| 1);
        let h = HFunction::build_exact(&spectrum, &reference);
        let mut solver = ExactSolver::new(&f, Selection::Utility(&h));
        let lip = spectrum.phi_at_zero();
        for at in solver.reachable() {
            for a in 0..f.actions() {
                let v_star = solver.value(&h, at, a, 60);
                let mut prev = f64::NEG_INFINITY;
                for k in 0..=30 {
                    let v = solver.value(&h, at, a, k);
                    assert!(v >= prev - 1e-12, "{spectrum}: V_k decreased at k={k}");
                    let eps = lip * at.c * gamma.powi(k as i32 + 1) * g_max;
                    assert!(v_star - v <= eps + 1e-12, "{spectrum}: bound violated at k={k}");
                    assert!(v <= v_star + 1e-12);
                    prev = v;
                }
            }
        }
    }
}

#[test]
fn outer_objective_never_decreases() {
    let f = Fixture::choice();
    for spectrum in spectra() {
        let steps = outer_loop(&f, &spectrum, 10);
        for w in steps.windows(2) {
            assert!(w[1].objective >= w[0].objective - 1e-12, "{spectrum}: {:?}", steps);
            // the certified SRM sits between consecutive objectives
            assert!(w[0].srm >= w[0].objective - 1e-12);
            assert!(w[1].objective >= w[0].srm - 1e-12);
        }
    }
}

#[test]
fn tabular_sweeps_reproduce_exact_projection() {
    let f = Fixture::example_one();
    let mut sweeps = TabularSweeps::new(&f, 50, 1).unwrap();
    for _ in 0..=f.depth() {
        sweeps.sweep(Selection::Mean, 1.0).unwrap();
    }
    let root = sweeps.states()[0];
    let exact = f.return_distribution(f.root(), &|_| 0);
    let row = qrsrm_core::QuantileDistribution::new(sweeps.row(root, 0).to_vec()).unwrap();
    assert_eq!(row, quantile_project(&exact, 50));
    assert!(exact.w1_to_quantiles(&row) <= 1e-9);
}

#[test]
fn tabular_utility_policy_matches_exact_values() {
    let f = Fixture::choice();
    for spectrum in spectra() {
        let reference = f.return_distribution(f.root(), &|_| 0);
        let h = HFunction::build_exact(&spectrum, &reference);
        let mut sweeps = TabularSweeps::new(&f, 100, 512).unwrap();
        for _ in 0..=f.depth() {
            sweeps.sweep(Selection::Utility(&h), 1.0).unwrap();
        }
        let mut solver = ExactSolver::new(&f, Selection::Utility(&h));
        for &at in sweeps.states() {
            for a in 0..f.actions() {
                let exact = solver.value(&h, at, a, 60);
                let row = sweeps.row(at, a);
                let approx: f64 = row.iter().map(|v| h.eval(at.s + at.c * v)).sum::<f64>() / row.len() as f64;
                assert!((exact - approx).abs() <= 1e-6, "{spectrum}: {exact} vs {approx}");
            }
            let k = solver.horizon();
            let a_exact = solver.greedy(at.node, at.s, at.c, k);
            let exact_best = solver.value(&h, at, a_exact, k);
            let tab_best = solver.value(&h, at, sweeps.greedy(Selection::Utility(&h), at), k);
            assert!((exact_best - tab_best).abs() <= 1e-6);
        }
    }
}

#[test]
fn tabular_mean_selection_finds_max_mean_policy() {
    let f = Fixture::choice();
    let mut sweeps = TabularSweeps::new(&f, 100, 512).unwrap();
    for _ in 0..=f.depth() {
        sweeps.sweep(Selection::Mean, 1.0).unwrap();
    }
    let mut solver = ExactSolver::new(&f, Selection::Mean);
    let root = sweeps.states()[0];
    assert_eq!(sweeps.greedy(Selection::Mean, root), solver.greedy(f.root(), 0.0, 1.0, solver.horizon()));
}
