mod common;

use common::{fd_mismatch, random_matrix, toy_set};
use dtc_qrc::learn::{
    accuracy, accuracy_of, pca_fit, ridge_fit, softmax_fit, softmax_loss, softmax_loss_and_grad, LinearModel, Mlp,
    MlpArchitecture, SoftmaxConfig,
};
use dtc_qrc::rng::rng_for;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pca_maps_training_mean_to_origin(rows in 10usize..40, cols in 2usize..8, k_pick in any::<usize>(), seed in any::<u64>()) {
        let x = random_matrix(rows, cols, seed);
        let k = 1 + k_pick % cols;
        let model = pca_fit(&x, k).unwrap();
        let mean = DMatrix::from_fn(1, cols, |_, c| model.mean[c]);
        prop_assert!(model.transform(&mean).unwrap().amax() < 1e-10);
    }

    #[test]
    fn ridge_predictions_ignore_duplicated_column(rows in 20usize..60, cols in 1usize..6, seed in any::<u64>()) {
        // Duplication halves the penalty along the copied direction, so the
        // shift is O(λ); λ here keeps it far below the tolerance.
        let lambda = 1e-8;
        let x = random_matrix(rows, cols, seed);
        let y = random_matrix(rows, 2, seed ^ 9);
        let dup = DMatrix::from_fn(rows, cols + 1, |r, c| x[(r, c.min(cols - 1))]);
        let a = ridge_fit(&x, &y, lambda).unwrap().predict_values(&x).unwrap();
        let b = ridge_fit(&dup, &y, lambda).unwrap().predict_values(&dup).unwrap();
        let dev = (&a - &b).amax();
        prop_assert!(dev < 1e-6, "deviation {dev}");
    }

    #[test]
    fn accuracy_is_a_fraction_and_order_free(labels in prop::collection::vec(0usize..4, 1..50), seed in any::<u64>()) {
        let n = labels.len();
        let mut rng = rng_for(seed, &[2]);
        let preds: Vec<usize> = labels.iter().map(|&l| if rng.random_bool(0.6) { l } else { rng.random_range(0..4) }).collect();
        let acc = accuracy_of(&preds, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let p2: Vec<usize> = order.iter().map(|&i| preds[i]).collect();
        let l2: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        prop_assert_eq!(accuracy_of(&p2, &l2).unwrap(), acc);
    }

    #[test]
    fn softmax_gradient_matches_finite_differences(seed in any::<u64>()) {
        let (x, labels) = toy_set(seed);
        let mut model = LinearModel::zeros(4, 3);
        let init = random_matrix(1, 15, seed ^ 4);
        model.set_params(init.as_slice());
        let (_, grad) = softmax_loss_and_grad(&model, &x, &labels).unwrap();
        let mut probe = model.clone();
        let worst = fd_mismatch(&model.params(), &grad.params(), |p| {
            probe.set_params(p);
            softmax_loss(&probe, &x, &labels).unwrap()
        });
        prop_assert!(worst < 1e-5, "relative mismatch {worst}");
    }

    #[test]
    fn mlp_gradient_matches_finite_differences(seed in any::<u64>()) {
        let (x, labels) = toy_set(seed);
        let arch = MlpArchitecture { hidden: vec![5, 4], dropout: vec![0.0, 0.0] };
        let mut mlp = Mlp::new(4, 3, arch, seed).unwrap();
        // Zero biases put units fed by all-dead layers exactly on the ReLU kink.
        let jitter = random_matrix(1, mlp.param_count(), seed ^ 5);
        let p: Vec<f64> = mlp.params().iter().zip(jitter.iter()).map(|(a, b)| a + 0.1 * b).collect();
        mlp.set_params(&p);
        let (_, grad) = mlp.loss_and_grad(&x, &labels, None).unwrap();
        let mut probe = mlp.clone();
        let worst = fd_mismatch(&mlp.params(), &grad, |p| {
            probe.set_params(p);
            probe.loss_and_grad(&x, &labels, None).unwrap().0
        });
        // ReLU kinks can sit inside the difference stencil; they are rare at h = 1e-6.
        prop_assert!(worst < 1e-4, "relative mismatch {worst}");
    }
}

#[test]
fn softmax_loss_is_monotone_at_small_step() {
    let (x, labels) = toy_set(11);
    let cfg = SoftmaxConfig { epochs: 300, learning_rate: 1e-3, momentum: 0.0, ..SoftmaxConfig::default() };
    let fit = softmax_fit(&x, &labels, 3, &cfg).unwrap();
    assert_eq!(fit.losses.len(), 301);
    assert!(fit.losses.windows(2).all(|w| w[1] <= w[0]), "loss increased");
    assert!(fit.losses[300] < fit.losses[0]);
    assert!((0.0..=1.0).contains(&accuracy(&fit.model, &x, &labels).unwrap()));
}
