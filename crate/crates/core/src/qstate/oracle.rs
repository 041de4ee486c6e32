//! Brute-force full-space matrices for small systems. Single-qubit gates are
//! embedded by Kronecker products, two-qubit gates by explicit element
//! matching; neither route shares code with the strided kernels.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::gate::{Gate, GateMatrix, Targets};
use crate::error::{Error, Result};

pub const ORACLE_MAX_QUBITS: usize = 6;

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    DMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// Full `2^n x 2^n` matrix of a single gate.
pub fn embed_gate(gate: &Gate, n: usize) -> Result<DMatrix<C64>> {
    if n > ORACLE_MAX_QUBITS {
        return Err(Error::TooManyQubits { what: "dense oracle", n, max: ORACLE_MAX_QUBITS });
    }
    gate.validate(n)?;
    let dim = 1usize << n;
    match (gate.targets(), gate.matrix()) {
        (Targets::One(q), GateMatrix::One(m)) => {
            let u = DMatrix::from_fn(2, 2, |r, c| m[r][c]);
            let high = DMatrix::<C64>::identity(1 << (n - 1 - q), 1 << (n - 1 - q));
            let low = DMatrix::<C64>::identity(1 << q, 1 << q);
            Ok(kron(&kron(&high, &u), &low))
        }
        (Targets::Two(a, b), GateMatrix::Two(m)) => {
            let rest = !((1usize << a) | (1usize << b));
            let local = |k: usize| (k >> a & 1) | ((k >> b & 1) << 1);
            Ok(DMatrix::from_fn(dim, dim, |r, c| {
                if r & rest == c & rest {
                    m[local(r)][local(c)]
                } else {
                    C64::new(0.0, 0.0)
                }
            }))
        }
        _ => unreachable!(),
    }
}

/// Ordered product `G_k ⋯ G_1` of the embedded gates.
pub fn dense_unitary_oracle(gates: &[Gate], n: usize) -> Result<DMatrix<C64>> {
    if n > ORACLE_MAX_QUBITS {
        return Err(Error::TooManyQubits { what: "dense oracle", n, max: ORACLE_MAX_QUBITS });
    }
    let dim = 1usize << n;
    gates.iter().try_fold(DMatrix::<C64>::identity(dim, dim), |acc, g| Ok(embed_gate(g, n)? * acc))
}

/// Largest entry of `U†U - I`.
pub fn unitarity_deviation(u: &DMatrix<C64>) -> f64 {
    let d = u.nrows();
    (u.adjoint() * u - DMatrix::<C64>::identity(d, d)).iter().map(|v| v.norm()).fold(0.0, f64::max)
}
