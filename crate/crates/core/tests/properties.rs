use nalgebra::DMatrix;
use priorglasso::admm::{fit_joint_observed, z_update};
use priorglasso::gaussianize::{class_covariance, nonparanormal_transform};
use priorglasso::inference::{branch_weights, signed_message_passing, MessagePassingWeights, NodeFeatures};
use priorglasso::linalg;
use priorglasso::priors::SelectionContext;
use priorglasso::{
    adaptive_weights, fit_joint, select_k, AdaptiveWeightMatrix, ClassCovariance, JointModel, ObservationMatrix,
    PriorMatrix, SolverConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_data(seed: u64, n: usize, p: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Correlated columns: each column mixes in the previous one.
    let mut m = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    for j in 1..p {
        for i in 0..n {
            m[(i, j)] += 0.6 * m[(i, j - 1)];
        }
    }
    m
}

fn covariances(seed: u64, n: usize, p: usize, classes: usize) -> Vec<ClassCovariance> {
    (0..classes)
        .map(|c| {
            let obs = ObservationMatrix::new(random_data(seed + c as u64, n, p), c + 1).unwrap();
            class_covariance(&nonparanormal_transform(&obs).unwrap().matrix).unwrap()
        })
        .collect()
}

fn z_objective(z: &DMatrix<f64>, sigma: &DMatrix<f64>, g: &DMatrix<f64>, mu: f64) -> f64 {
    linalg::trace_product(sigma, z) - linalg::logdet_spd(z).unwrap() + 0.5 * mu * (z - g).norm_squared()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_ignores_monotone_maps(seed in any::<u64>(), n in 5usize..60) {
        let x = random_data(seed, n, 3);
        let base = nonparanormal_transform(&ObservationMatrix::new(x.clone(), 1).unwrap()).unwrap();
        let mapped = x.map(|v| v.exp() * 3.0 + v * v * v);
        let other = nonparanormal_transform(&ObservationMatrix::new(mapped, 1).unwrap()).unwrap();
        prop_assert_eq!(base.matrix.data(), other.matrix.data());
    }

    #[test]
    fn transform_commutes_with_permutations(seed in any::<u64>(), n in 5usize..40, shift in 1usize..4) {
        let x = random_data(seed, n, 4);
        let rows: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let cols = [2usize, 0, 3, 1];
        let permuted = DMatrix::from_fn(n, 4, |i, j| x[(rows[i], cols[j])]);
        let a = nonparanormal_transform(&ObservationMatrix::new(x, 1).unwrap()).unwrap();
        let b = nonparanormal_transform(&ObservationMatrix::new(permuted, 1).unwrap()).unwrap();
        for i in 0..n {
            for j in 0..4 {
                prop_assert_eq!(b.matrix.data()[(i, j)], a.matrix.data()[(rows[i], cols[j])]);
            }
        }
    }

    #[test]
    fn covariance_is_symmetric_psd(seed in any::<u64>(), n in 3usize..50, p in 1usize..6) {
        let cov = &covariances(seed, n, p, 1)[0];
        prop_assert_eq!(linalg::max_asymmetry(&cov.sigma_hat), 0.0);
        prop_assert!(linalg::min_eigenvalue(&cov.sigma_hat) >= -1e-10);
        prop_assert_eq!(cov.n_c, n);
    }

    #[test]
    fn z_update_beats_perturbations(seed in any::<u64>(), mu in 0.1f64..10.0) {
        let p = 5;
        let sigma = covariances(seed, 30, p, 1).remove(0).sigma_hat;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let g = linalg::symmetrize(&DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0)));
        let z = z_update(&g, &sigma, mu).unwrap();
        prop_assert!(linalg::min_eigenvalue(&z) > 0.0);
        let best = z_objective(&z, &sigma, &g, mu);
        for _ in 0..10 {
            let delta = linalg::symmetrize(&DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0)));
            let moved = &z + delta * 1e-3;
            if linalg::min_eigenvalue(&moved) > 0.0 {
                prop_assert!(z_objective(&moved, &sigma, &g, mu) >= best - 1e-12);
            }
        }
    }

    #[test]
    fn sharpness_zero_is_uniform(vals in proptest::collection::vec(0.0f64..=1.0, 16)) {
        let w = linalg::symmetrize(&DMatrix::from_row_slice(4, 4, &vals));
        let prior = PriorMatrix::from_values(w, 1).unwrap();
        let weights = adaptive_weights(&prior, 0.0).unwrap();
        let uniform = AdaptiveWeightMatrix::uniform(4);
        prop_assert_eq!(weights.w_tilde(), uniform.w_tilde());
    }

    #[test]
    fn branch_weights_partition_by_sign(vals in proptest::collection::vec(-1.0f64..1.0, 25), i in 0usize..5) {
        let theta = linalg::symmetrize(&DMatrix::from_row_slice(5, 5, &vals));
        let (pos, neg) = branch_weights(&theta, i, 1e-8);
        for j in 0..5 {
            let t = theta[(i, j)];
            prop_assert!(pos[j] >= 0.0 && neg[j] >= 0.0);
            prop_assert!(!(pos[j] > 0.0 && neg[j] > 0.0));
            if j == i || t == 0.0 {
                prop_assert_eq!(pos[j] + neg[j], 0.0);
            }
            prop_assert_eq!(pos[j] > 0.0, j != i && t > 0.0);
            prop_assert_eq!(neg[j] > 0.0, j != i && t < 0.0);
        }
        prop_assert!(pos.iter().sum::<f64>() <= 1.0 && neg.iter().sum::<f64>() <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_iterate_is_positive_definite(seed in any::<u64>(), p in 2usize..8, classes in 1usize..4) {
        let covs = covariances(seed, 25, p, classes);
        let weights: Vec<_> = (0..classes).map(|_| AdaptiveWeightMatrix::uniform(p)).collect();
        let mut worst = f64::INFINITY;
        let model = fit_joint_observed(&covs, &weights, &SolverConfig::default(), |state| {
            for z in &state.z {
                worst = worst.min(linalg::min_eigenvalue(z));
            }
        })
        .unwrap();
        prop_assert!(worst > 0.0);
        prop_assert!(model.iterations >= 1);
    }

    #[test]
    fn fitted_layers_are_symmetric(seed in any::<u64>(), p in 2usize..7) {
        let covs = covariances(seed, 40, p, 2);
        let weights: Vec<_> = (0..2).map(|_| AdaptiveWeightMatrix::uniform(p)).collect();
        let m = fit_joint(&covs, &weights, &SolverConfig::default()).unwrap();
        prop_assert!(linalg::max_asymmetry(&m.theta_com) <= 1e-12);
        for c in 0..2 {
            prop_assert!(linalg::max_asymmetry(&m.s[c]) <= 1e-12);
            prop_assert!(linalg::max_asymmetry(&m.theta_hat[c]) <= 1e-12);
        }
    }

    #[test]
    fn model_json_round_trips(seed in any::<u64>()) {
        let covs = covariances(seed, 30, 4, 2);
        let weights: Vec<_> = (0..2).map(|_| AdaptiveWeightMatrix::uniform(4)).collect();
        let m = fit_joint(&covs, &weights, &SolverConfig::default()).unwrap();
        let back: JointModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }
}

#[test]
fn selection_over_zero_only_is_the_uniform_fit() {
    let covs = covariances(11, 40, 5, 2);
    let priors: Vec<_> = (0..2)
        .map(|c| {
            let w = DMatrix::from_fn(5, 5, |i, j| if i == j { 1.0 } else { 0.1 * (i + j) as f64 / 8.0 });
            PriorMatrix::from_values(w, c + 1).unwrap()
        })
        .collect();
    let config = SolverConfig::default();
    let ctx = SelectionContext { covs: &covs, priors: &priors, config, gamma_ebic: 0.5, edge_tol: 1e-6 };
    let report = select_k(&[0.0], &ctx).unwrap();
    assert_eq!(report.k_star, 0.0);
    let uniform: Vec<_> = (0..2).map(|_| AdaptiveWeightMatrix::uniform(5)).collect();
    let direct = fit_joint(&covs, &uniform, &config).unwrap();
    assert_eq!(report.model.theta_hat, direct.theta_hat);
    assert_eq!(report.model.theta_com, direct.theta_com);
}

#[test]
fn empty_graph_passes_features_through_gelu_of_zero() {
    let theta = DMatrix::identity(3, 3);
    let nodes = NodeFeatures::new(DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 3.0, -1.0, 0.0])).unwrap();
    let h = signed_message_passing(&theta, &nodes, &MessagePassingWeights::identity(2)).unwrap();
    assert_eq!(h, DMatrix::zeros(3, 2));
}
