use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qrsrm_core::network::{Batch, NetworkConfig, QuantileNetwork};

fn tiny(seed: u64) -> QuantileNetwork {
    let mut cfg = NetworkConfig::new(3, 2, 4);
    cfg.hidden = vec![6, 6, 6];
    cfg.zero_output = false;
    QuantileNetwork::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    for seed in 0..5u64 {
        let mut net = tiny(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let batch_size = 4;
        let inputs: Vec<f64> = (0..batch_size * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let actions: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..2)).collect();
        let targets: Vec<f64> = (0..batch_size * 4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let batch = Batch { inputs: &inputs, actions: &actions, targets: &targets };
        let (_, analytic) = net.loss_and_gradient(&batch).unwrap();
        let numeric = net.numerical_gradient(&batch, 1e-5).unwrap();
        let worst = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(1e-6))
            .fold(0.0, f64::max);
        assert!(worst <= 1e-4, "seed {seed}: relative error {worst}");
    }
}

#[test]
fn constant_input_regresses_to_target_quantiles() {
    let mut cfg = NetworkConfig::new(1, 1, 5);
    cfg.hidden = vec![8];
    cfg.kappa = 1e-3;
    cfg.learning_rate = 2e-3;
    let mut net = QuantileNetwork::new(cfg, &mut ChaCha8Rng::seed_from_u64(9));
    // five distinct targets: the τ̂ = (2i−1)/10 quantiles are the targets themselves
    let targets = [3.0, -1.0, 4.0, 0.5, 2.0];
    let inputs = [1.0];
    for _ in 0..20_000 {
        net.train_step(&Batch { inputs: &inputs, actions: &[0], targets: &targets }).unwrap();
    }
    let mut sorted = targets;
    sorted.sort_by(f64::total_cmp);
    for (got, want) in net.forward(&inputs).iter().zip(sorted) {
        assert!((got - want).abs() <= 1e-2, "{got} vs {want}");
    }
}

#[test]
fn repeated_updates_keep_parameters_finite() {
    let mut net = tiny(42);
    let inputs = [0.2, -0.3, 0.8, 0.1, 0.1, 0.1];
    let targets = [1e3; 8];
    for _ in 0..200 {
        net.train_step(&Batch { inputs: &inputs, actions: &[0, 1], targets: &targets }).unwrap();
    }
    assert!(net.params().iter().all(|p| p.is_finite()));
}
