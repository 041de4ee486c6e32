#![allow(dead_code)]

use std::f64::consts::PI;

use dtc_qrc::kernel::GramMatrix;
use dtc_qrc::qstate::Gate;
use dtc_qrc::rng::rng_for;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Uniformly mixed single- and two-qubit gates with random angles.
pub fn random_circuit(n: usize, depth: usize, seed: u64) -> Vec<Gate> {
    let mut rng = rng_for(seed, &[0xc1c]);
    (0..depth)
        .map(|_| {
            let q = rng.random_range(0..n);
            let other = if n > 1 {
                let b = rng.random_range(0..n - 1);
                if b >= q {
                    b + 1
                } else {
                    b
                }
            } else {
                0
            };
            let kind = if n == 1 { rng.random_range(0..5) } else { rng.random_range(0..7) };
            let t = rng.random_range(-PI..PI);
            match kind {
                0 => Gate::rx(q, t),
                1 => Gate::ry(q, t),
                2 => Gate::rz(q, t),
                3 => Gate::u3(q, t, rng.random_range(-PI..PI), rng.random_range(-PI..PI)),
                4 => Gate::x(q),
                5 => Gate::zz(q, other, t),
                _ => Gate::cnot(q, other),
            }
        })
        .collect()
}

/// Haar-ish random pure state on `n` qubits from Gaussian amplitudes.
pub fn random_amplitudes(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = rng_for(seed, &[0xa3b]);
    let mut v: Vec<C64> =
        (0..1usize << n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

/// Random full-rank density matrix `A A† / tr(A A†)`.
pub fn random_density(n: usize, seed: u64) -> DMatrix<C64> {
    let d = 1usize << n;
    let mut rng = rng_for(seed, &[0xde5]);
    let a = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = &a * a.adjoint();
    let tr = m.trace();
    m / tr
}

pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Direct recurrence written out term by term, independent of the library loop.
pub fn narma_oracle(u: &[f64]) -> Vec<f64> {
    let mut y: Vec<f64> = Vec::new();
    for k in 0..u.len() {
        if k < 10 {
            y.push(0.0);
            continue;
        }
        let mut window = 0.0;
        for i in 1..=10 {
            window += y[k - i];
        }
        let prev = y[k - 1];
        y.push(0.3 * prev + 0.05 * prev * window + 1.5 * u[k - 10] * u[k - 1] + 0.1);
    }
    y
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_for(seed, &[0x3a7]);
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Three Gaussian-ish blobs in 4 dimensions.
pub fn toy_set(seed: u64) -> (DMatrix<f64>, Vec<usize>) {
    let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
    let noise = random_matrix(60, 4, seed);
    let x = DMatrix::from_fn(60, 4, |r, c| noise[(r, c)] + if c == labels[r] { 2.0 } else { 0.0 });
    (x, labels)
}

/// Largest relative gap between an analytic gradient and central differences.
pub fn fd_mismatch(params: &[f64], grad: &[f64], mut loss_at: impl FnMut(&[f64]) -> f64) -> f64 {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut p = params.to_vec();
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = loss_at(&p);
        p[i] = orig - h;
        let down = loss_at(&p);
        p[i] = orig;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / (fd.abs() + grad[i].abs()).max(1e-4));
    }
    worst
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_for(seed, &[0x6a55]);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Well-conditioned Gram `A Aᵀ / d + 0.1 I`.
pub fn random_gram(n: usize, seed: u64) -> GramMatrix {
    let a = gaussian(n, n + 2, seed);
    GramMatrix::new(&a * a.transpose() / (n + 2) as f64 + DMatrix::identity(n, n) * 0.1).unwrap()
}

/// `√‖√K_C K_Q⁻¹ √K_C‖` through power iteration on the similar matrix
/// `K_Q⁻¹ K_C`, sharing no code with the library path.
pub fn g_cq_oracle(k_c: &DMatrix<f64>, k_q: &DMatrix<f64>) -> f64 {
    let lu = k_q.clone().lu();
    let m = lu.solve(k_c).unwrap();
    let mut v = DVector::from_element(k_c.nrows(), 1.0);
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let w = &m * &v;
        lambda = w.norm() / v.norm();
        v = w.normalize();
    }
    lambda.sqrt()
}
