use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stancefield_core::ingest::TimeBinning;
use stancefield_core::landscape::*;
use stancefield_core::latent::LatentTrajectory;

fn random_net(dim: usize, hidden: &[usize], seed: u64) -> PotentialNet {
    let mut net = PotentialNet::init(dim, hidden, TimeBinning::default(), seed);
    net.dropout_rate = 0.1;
    net.radius_r = 1.5;
    net.confinement_c0 = 0.5;
    net
}

fn central_drift(net: &PotentialNet, x: &[f64], t: f64, h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (potential_eval(net, &a, t, None).unwrap() - potential_eval(net, &b, t, None).unwrap()) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

#[test]
fn drift_matches_finite_differences_on_default_architecture() {
    let net = random_net(3, &TrainConfig::default().hidden_dims, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t = rng.random_range(1.0..4.0);
        let g = drift_eval(&net, &x, t).unwrap();
        let fd = central_drift(&net, &x, t, 1e-4);
        assert!(rel_err(&g, &fd) < 1e-4, "x={x:?} t={t}: {g:?} vs {fd:?}");
    }
}

#[test]
fn linear_net_has_constant_spatial_drift() {
    // φ(x, t) = 0.3 t + 2 x₀ - x₁ + 0.5
    let mut net = PotentialNet::zeros(2, &[], TimeBinning::default());
    net.params = vec![0.3, 2.0, -1.0, 0.5];
    for x in [[0.0, 0.0], [1.0, -3.0], [10.0, 2.5]] {
        assert_eq!(drift_eval(&net, &x, 2.7).unwrap(), vec![2.0, -1.0]);
        assert_eq!(step(&net, &x, 2.7, None).unwrap(), vec![x[0] + 2.0, x[1] - 1.0]);
    }
    let field = drift_field(
        &net,
        &[Axis::new(-1.0, 1.0, 4), Axis::new(-1.0, 1.0, 3)],
        2.0,
        &[vec![0.0, 0.0]],
        &FieldConfig::default(),
    )
    .unwrap();
    assert!(field.drift.iter().all(|d| d == &vec![2.0, -1.0]));
}

#[test]
fn zero_network_is_inert() {
    let net = PotentialNet::zeros(2, &[8, 8], TimeBinning::default());
    assert_eq!(potential_eval(&net, &[0.4, -1.0], 1.5, None).unwrap(), 0.0);
    assert_eq!(potential_eval(&net, &[0.4, -1.0], 1.5, Some(3)).unwrap(), 0.0);
    assert_eq!(drift_eval(&net, &[0.4, -1.0], 1.5).unwrap(), vec![0.0, 0.0]);
    assert_eq!(step(&net, &[0.4, -1.0], 1.5, None).unwrap(), vec![0.4, -1.0]);
    assert_eq!(step(&net, &[0.4, -1.0], 1.5, Some(&[0.1, 0.0])).unwrap(), vec![0.4 + 0.1, -1.0]);

    let pred = predict(&net, &[0.4, -1.0], 1.5, 6).unwrap();
    assert_eq!(pred.path, vec![vec![0.4, -1.0]; 6]);
    assert!(!pred.escaped);

    let field = drift_field(
        &net,
        &[Axis::new(-1.0, 1.0, 5), Axis::new(-1.0, 1.0, 5)],
        1.0,
        &[vec![0.0, 0.0]],
        &FieldConfig::default(),
    )
    .unwrap();
    assert!(field.drift.iter().flatten().all(|v| *v == 0.0));
    assert!(field.potential.iter().all(|v| *v == 0.0));
    assert!(field.mc_variance.iter().all(|v| *v == 0.0));

    let stay = TrainingPair {
        t: 1.0,
        x: vec![0.2, 0.3],
        y: vec![0.2, 0.3],
    };
    assert_eq!(loss(&net, &[stay]).unwrap(), 0.0);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let net = PotentialNet::zeros(2, &[4], TimeBinning::default());
    assert!(potential_eval(&net, &[0.0], 1.0, None).is_err());
    assert!(drift_eval(&net, &[0.0, 0.0, 0.0], 1.0).is_err());
    assert!(step(&net, &[0.0, 0.0], 1.0, Some(&[0.1])).is_err());
}

#[test]
fn dropout_evaluation_is_reproducible() {
    let net = random_net(3, &[16, 16], 2);
    let a = potential_eval(&net, &[0.1, 0.2, 0.3], 2.0, Some(42)).unwrap();
    let b = potential_eval(&net, &[0.1, 0.2, 0.3], 2.0, Some(42)).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    let m1 = mc_uncertainty(&net, &[0.1, 0.2, 0.3], 2.0, DEFAULT_MC_SAMPLES, 9).unwrap();
    let m2 = mc_uncertainty(&net, &[0.1, 0.2, 0.3], 2.0, DEFAULT_MC_SAMPLES, 9).unwrap();
    assert_eq!(m1, m2);
    assert!(m1.1 > 0.0);
    assert!(mc_uncertainty(&net, &[0.1, 0.2, 0.3], 2.0, 1, 9).is_err());

    let mut no_drop = net.clone();
    no_drop.dropout_rate = 0.0;
    assert_eq!(mc_uncertainty(&no_drop, &[0.1, 0.2, 0.3], 2.0, 10, 9).unwrap().1, 0.0);
}

#[test]
fn potential_parameter_gradient_matches_finite_differences() {
    let net = random_net(2, &[6, 5], 11);
    let x = [0.3, -0.7];
    let g = potential_param_gradient(&net, &x, 1.8).unwrap();
    let h = 1e-6;
    let fd: Vec<f64> = (0..net.n_params())
        .map(|i| {
            let mut a = net.clone();
            let mut b = net.clone();
            a.params[i] += h;
            b.params[i] -= h;
            (potential_eval(&a, &x, 1.8, None).unwrap() - potential_eval(&b, &x, 1.8, None).unwrap()) / (2.0 * h)
        })
        .collect();
    assert!(rel_err(&g, &fd) < 1e-6);
}

fn toy_batch(dim: usize, n: usize, seed: u64) -> Vec<TrainingPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| TrainingPair {
            t: rng.random_range(1.0..4.0),
            x: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            y: (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect(),
        })
        .collect()
}

#[test]
fn loss_gradient_matches_finite_differences() {
    // Two hidden layers, with the confinement term active on some samples.
    let net = random_net(2, &[7, 5], 3);
    let batch = toy_batch(2, 12, 5);
    let (l, g) = loss_and_gradient(&net, &batch).unwrap();
    assert_eq!(l, loss(&net, &batch).unwrap());
    let h = 1e-6;
    let fd: Vec<f64> = (0..net.n_params())
        .map(|i| {
            let mut a = net.clone();
            let mut b = net.clone();
            a.params[i] += h;
            b.params[i] -= h;
            (loss(&a, &batch).unwrap() - loss(&b, &batch).unwrap()) / (2.0 * h)
        })
        .collect();
    let err = rel_err(&g, &fd);
    assert!(err < 1e-3, "relative error {err}");
    // The hidden-layer weights must receive signal through the drift.
    assert!(g[..21].iter().any(|v| v.abs() > 1e-6));
}

#[test]
fn loss_gradient_of_linear_net() {
    // With no hidden layer the drift is the weight vector itself.
    let mut net = PotentialNet::zeros(2, &[], TimeBinning::default());
    net.params = vec![0.0, 0.3, -0.4, 0.0];
    let batch = vec![TrainingPair {
        t: 1.0,
        x: vec![0.0, 0.0],
        y: vec![0.0, 0.0],
    }];
    let (l, g) = loss_and_gradient(&net, &batch).unwrap();
    assert!((l - 0.5).abs() < 1e-15);
    assert_eq!(g, vec![0.0, 0.3 / 0.5, -0.4 / 0.5, 0.0]);
}

#[test]
fn confinement_off_is_pure_distance() {
    let mut net = random_net(2, &[6], 4);
    net.confinement_c0 = 0.0;
    net.radius_r = 1e-3;
    let batch = toy_batch(2, 20, 8);
    let manual: f64 = batch
        .iter()
        .map(|p| {
            let xp = step(&net, &p.x, p.t, None).unwrap();
            xp.iter().zip(&p.y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        })
        .sum::<f64>()
        / batch.len() as f64;
    assert_eq!(loss(&net, &batch).unwrap().to_bits(), manual.to_bits());
}

#[test]
fn confinement_penalty_one_unit_outside() {
    // Zero network, perfect prediction at |x'| = r + 1.
    let mut net = PotentialNet::zeros(2, &[3], TimeBinning::default());
    net.confinement_c0 = 0.004;
    net.radius_r = 2.0;
    let p = TrainingPair {
        t: 1.0,
        x: vec![3.0, 0.0],
        y: vec![3.0, 0.0],
    };
    assert!((loss(&net, &[p]).unwrap() - 0.004).abs() < 1e-15);
}

#[test]
fn output_bias_is_a_gauge() {
    let net = random_net(3, &[10, 10], 5);
    let mut shifted = net.clone();
    let last = shifted.params.len() - 1;
    shifted.params[last] += 2.5;
    let x = [0.5, -0.1, 0.9];
    let d = potential_eval(&shifted, &x, 2.0, None).unwrap() - potential_eval(&net, &x, 2.0, None).unwrap();
    assert!((d - 2.5).abs() < 1e-12);
    assert_eq!(drift_eval(&net, &x, 2.0).unwrap(), drift_eval(&shifted, &x, 2.0).unwrap());
}

#[test]
fn prediction_paths_concatenate() {
    let mut net = random_net(2, &[8], 6);
    net.params.iter_mut().for_each(|p| *p *= 0.3);
    net.radius_r = 100.0;
    let x0 = [0.2, 0.1];
    let whole = predict(&net, &x0, 1.3, 7).unwrap();
    let first = predict(&net, &x0, 1.3, 3).unwrap();
    let second = predict(&net, first.path.last().unwrap(), first.end_time, 4).unwrap();
    let mut joined = first.path.clone();
    joined.extend(second.path);
    assert_eq!(joined, whole.path);
    assert_eq!(predict(&net, &x0, 1.3, 1).unwrap().path[0], step(&net, &x0, 1.3, None).unwrap());
    assert!(predict(&net, &x0, 1.3, 0).is_err());
}

#[test]
fn prediction_escape_returns_partial_path() {
    let mut net = PotentialNet::zeros(1, &[], TimeBinning::default());
    net.params = vec![0.0, 1.0, 0.0];
    net.radius_r = 0.5;
    let pred = predict(&net, &[0.0], 1.0, 20).unwrap();
    assert!(pred.escaped);
    assert_eq!(pred.path.len(), 5);
}

#[test]
fn marginal_of_separable_potential_is_shifted() {
    let f = |x: &[f64]| (x[0] - 0.3).powi(2) + x[0] * x[1];
    let g = |x: &[f64]| (1.0 + x[2] * x[2]).ln();
    let axes = [Axis::new(-2.0, 2.0, 9), Axis::new(-1.5, 1.5, 7), Axis::new(-3.0, 3.0, 61)];
    let marg = marginalize_boltzmann_fn(|x| Ok(f(x) + g(x)), [0, 1], &axes, 0.7).unwrap();
    let mut diffs = Vec::new();
    for (i, a) in axes[0].values().into_iter().enumerate() {
        for (j, b) in axes[1].values().into_iter().enumerate() {
            diffs.push(marg[i * 7 + j] - f(&[a, b]));
        }
    }
    let spread = diffs.iter().cloned().fold(f64::MIN, f64::max) - diffs.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1e-6, "spread {spread}");
}

#[test]
fn marginal_of_constant_is_constant() {
    let axes = [Axis::new(0.0, 1.0, 4), Axis::new(0.0, 1.0, 4), Axis::new(0.0, 1.0, 5), Axis::new(-1.0, 1.0, 5)];
    let marg = marginalize_boltzmann_fn(|_| Ok(1.25), [1, 3], &axes, 1.0).unwrap();
    assert_eq!(marg.len(), 20);
    assert!(marg.iter().all(|v| (v - marg[0]).abs() < 1e-12));
}

#[test]
fn marginal_of_gaussian_bowl_matches_closed_form() {
    let axes = [Axis::new(-2.0, 2.0, 11), Axis::new(-2.0, 2.0, 11), Axis::new(-6.0, 6.0, 241)];
    let phi = |x: &[f64]| Ok(0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
    let marg = marginalize_boltzmann_fn(phi, [0, 1], &axes, 1.0).unwrap();
    // ∫ exp(-z²/2) dz = √(2π)
    let c = -(2.0 * std::f64::consts::PI).sqrt().ln();
    for (i, a) in axes[0].values().into_iter().enumerate() {
        for (j, b) in axes[1].values().into_iter().enumerate() {
            let exact = 0.5 * (a * a + b * b) + c;
            assert!((marg[i * 11 + j] - exact).abs() < 1e-4);
        }
    }
}

#[test]
fn two_dimensional_marginal_is_the_potential() {
    let net = random_net(2, &[5], 1);
    let axes = [Axis::new(-1.0, 1.0, 3), Axis::new(-1.0, 1.0, 4)];
    let marg = marginalize_boltzmann(&net, [0, 1], &axes, 2.0, 1.0).unwrap();
    let nodes = lattice_nodes(&axes);
    for (m, n) in marg.iter().zip(&nodes) {
        assert_eq!(*m, potential_eval(&net, n, 2.0, None).unwrap());
    }
    assert!(marginalize_boltzmann(&net, [0, 0], &axes, 2.0, 1.0).is_err());
    assert!(marginalize_boltzmann(&net, [0, 1], &axes, 2.0, 0.0).is_err());
}

#[test]
fn low_support_flags_far_nodes() {
    let axes = [Axis::new(-5.0, 5.0, 11), Axis::fixed(0.0)];
    let nodes = lattice_nodes(&axes);
    // Node spacing is 1; projected onto the varying axis the points sit at
    // -0.2 and 0.1, so nodes within 2 of either are supported.
    let points = vec![vec![-0.2, 7.0], vec![0.1, -7.0]];
    assert!((median_nn_spacing(&[vec![0.0], vec![0.3], vec![0.6], vec![1.0]]) - 0.3).abs() < 1e-12);
    let flags = low_support_flags(&axes, &nodes, &points, 2.0);
    let supported: Vec<usize> = (0..11).filter(|&i| !flags[i]).collect();
    assert_eq!(supported, vec![3, 4, 5, 6, 7]);
    assert!(low_support_flags(&axes, &nodes, &[], 2.0).iter().all(|f| *f));
}

fn still_trajectories(n: usize, len: usize) -> Vec<LatentTrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dt = TimeBinning::default().step_increment().unwrap();
    (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            LatentTrajectory {
                person_id: format!("p{i}"),
                times: (0..len).map(|k| 1.0 + k as f64 * dt).collect(),
                coords: vec![x; len],
            }
        })
        .collect()
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        hidden_dims: vec![16, 16],
        num_epochs: 30,
        batch_size: 64,
        patience: 10,
        ..TrainConfig::default()
    }
}

#[test]
fn training_on_still_data_learns_no_drift() {
    let trajs = still_trajectories(30, 20);
    let (net, hist) = train(&trajs, &quick_config(), &TimeBinning::default()).unwrap();
    let zero = PotentialNet::zeros(2, &[16, 16], TimeBinning::default());
    let val: Vec<LatentTrajectory> = trajs
        .iter()
        .filter(|t| hist.validation_persons.contains(&t.person_id))
        .cloned()
        .collect();
    let pairs = training_pairs(&val);
    let mse = |n: &PotentialNet| -> f64 {
        pairs
            .iter()
            .map(|p| {
                let xp = step(n, &p.x, p.t, None).unwrap();
                xp.iter().zip(&p.y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
            .sum::<f64>()
            / pairs.len() as f64
    };
    assert!(mse(&net) <= mse(&zero) + 1e-3, "mse {}", mse(&net));
}

#[test]
fn training_is_deterministic() {
    let trajs = still_trajectories(10, 12);
    let mut cfg = quick_config();
    cfg.num_epochs = 5;
    let (a, ha) = train(&trajs, &cfg, &TimeBinning::default()).unwrap();
    let (b, hb) = train(&trajs, &cfg, &TimeBinning::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    assert!((ha.best_validation - hb.best_validation).abs() <= 1e-10);
}

#[test]
fn training_rejects_too_few_trajectories() {
    let trajs = still_trajectories(1, 10);
    assert!(train(&trajs, &quick_config(), &TimeBinning::default()).is_err());
}

#[test]
fn radius_is_frozen_from_training_points() {
    let trajs = still_trajectories(10, 5);
    let mut cfg = quick_config();
    cfg.num_epochs = 1;
    let (net, hist) = train(&trajs, &cfg, &TimeBinning::default()).unwrap();
    let max = trajs
        .iter()
        .filter(|t| hist.train_persons.contains(&t.person_id))
        .map(|t| t.coords[0].iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    assert!((net.radius_r - 1.1 * max).abs() < 1e-12);
}
