mod common;

use common::random_amplitudes;
use dtc_qrc::floquet::{
    extract_features, feature_matrix, sample_params, CompiledCycle, EncodingScheme, MeasurementMode, ReservoirConfig,
};
use dtc_qrc::qstate::StateVector;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// ⟨Z_i⟩ for every qubit over `t_max + 1` periods of `cycle` from basis state `b`.
fn z_history(cycle: &CompiledCycle, n: usize, b: usize, t_max: usize) -> Vec<Vec<f64>> {
    let mut psi = StateVector::basis(n, b).unwrap();
    let mut out = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        if t > 0 {
            cycle.apply(&mut psi);
        }
        out.push((0..n).map(|i| psi.expect_z(i).unwrap()).collect());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn perfect_flip_is_subharmonic(n in 2usize..=6, seed in any::<u64>(), b_pick in any::<usize>()) {
        let params = sample_params(n, 1.0, seed).unwrap();
        let b = b_pick % (1 << n);
        let hist = z_history(&CompiledCycle::new(&params), n, b, 40);
        for (t, z) in hist.iter().enumerate() {
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            for i in 0..n {
                prop_assert!((z[i] - sign * hist[0][i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_flip_conserves_z(n in 2usize..=6, seed in any::<u64>(), b_pick in any::<usize>()) {
        let params = sample_params(n, 0.0, seed).unwrap();
        let hist = z_history(&CompiledCycle::new(&params), n, b_pick % (1 << n), 20);
        for z in &hist {
            for i in 0..n {
                prop_assert!((z[i] - hist[0][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_features_are_bounded_and_deterministic(
        n in 2usize..=6,
        g in 0.0f64..=1.0,
        seed in any::<u64>(),
        x in prop::collection::vec(-4.0f64..4.0, 18),
    ) {
        let params = sample_params(n, g, seed).unwrap();
        let cfg = ReservoirConfig::new(6, 3);
        let x = &x[..3 * n];
        let a = extract_features(x, &EncodingScheme::dense_angle(), &params, &cfg, seed).unwrap();
        let b = extract_features(x, &EncodingScheme::dense_angle(), &params, &cfg, seed).unwrap();
        prop_assert_eq!(a.len(), cfg.feature_dim(n));
        prop_assert!(a.iter().all(|v| (-1.0 - 1e-12..=1.0 + 1e-12).contains(v)));
        prop_assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn inverse_cycle_echoes_back(n in 2usize..=8, m in 0usize..=20, g in 0.0f64..=1.0, seed in any::<u64>()) {
        let cycle = CompiledCycle::new(&sample_params(n, g, seed).unwrap());
        let init = random_amplitudes(n, seed);
        let mut psi = StateVector::from_amplitudes(n, init.clone()).unwrap();
        (0..m).for_each(|_| cycle.apply(&mut psi));
        (0..m).for_each(|_| cycle.apply_inverse(&mut psi));
        let dev = psi.amplitudes().iter().zip(&init).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(dev < 1e-8);
    }
}

#[test]
fn disorder_is_shared_across_flip_strengths() {
    let a = sample_params(8, 0.2, 99).unwrap();
    let b = sample_params(8, 0.9, 99).unwrap();
    assert_eq!((a.phi.clone(), a.h.clone()), (b.phi.clone(), b.h.clone()));
    assert_eq!(a.with_g(0.9).unwrap(), b);
}

#[test]
fn shot_features_are_reproducible_and_close_to_exact() {
    let params = sample_params(4, 0.84, 3).unwrap();
    let inputs = DMatrix::from_fn(5, 12, |r, c| 0.1 * (r * 12 + c) as f64);
    let exact =
        feature_matrix(&inputs, &EncodingScheme::dense_angle(), &params, &ReservoirConfig::new(4, 2), 7).unwrap();
    let shots_cfg = ReservoirConfig { mode: MeasurementMode::Shots(20_000), ..ReservoirConfig::new(4, 2) };
    let a = feature_matrix(&inputs, &EncodingScheme::dense_angle(), &params, &shots_cfg, 7).unwrap();
    let b = feature_matrix(&inputs, &EncodingScheme::dense_angle(), &params, &shots_cfg, 7).unwrap();
    assert_eq!(a, b);
    // 5σ for a ±1 variable at 20k shots.
    assert!((a - exact).amax() < 5.0 / (20_000f64).sqrt());
}
