use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::gate::{Gate, GateMatrix, Targets};
use super::kernels::{apply_1q, apply_2q, apply_local, conj2, conj4};
use super::state::{z_features_from_probs, StateVector};
use crate::error::{invalid, Error, Result};

/// Mixed `n`-qubit state stored row-major. Viewed as a vector over `2n`
/// qubits, row bits sit above column bits, so `ρ → UρU†` is `U` on qubit
/// `q + n` followed by `conj(U)` on qubit `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    elems: Vec<C64>,
}

/// A 2x2 complex matrix in row-major nested-array form.
pub type Qubit2x2 = [[C64; 2]; 2];

impl DensityMatrix {
    pub const MAX_QUBITS: usize = 12;

    fn check_size(n: usize) -> Result<()> {
        if n > Self::MAX_QUBITS {
            return Err(Error::TooManyQubits { what: "density matrix", n, max: Self::MAX_QUBITS });
        }
        Ok(())
    }

    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::check_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut elems = vec![C64::new(0.0, 0.0); dim * dim];
        elems[0] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, elems })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        Self::check_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut elems = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            elems[i * dim + i] = C64::new(1.0 / dim as f64, 0.0);
        }
        Ok(Self { n_qubits, elems })
    }

    pub fn from_pure(state: &StateVector) -> Result<Self> {
        let n = state.n_qubits();
        Self::check_size(n)?;
        let a = state.amplitudes();
        let mut elems = Vec::with_capacity(a.len() * a.len());
        for r in a {
            for c in a {
                elems.push(r * c.conj());
            }
        }
        Ok(Self { n_qubits: n, elems })
    }

    /// Validates Hermiticity and unit trace (1e-10).
    pub fn from_matrix(m: &DMatrix<C64>) -> Result<Self> {
        let dim = m.nrows();
        if !dim.is_power_of_two() || m.ncols() != dim {
            return Err(invalid(format!("{}x{} is not a 2^n square matrix", m.nrows(), m.ncols())));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        Self::check_size(n_qubits)?;
        let mut elems = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                elems.push(m[(r, c)]);
            }
        }
        let dm = Self { n_qubits, elems };
        if !dm.is_hermitian(1e-10) {
            return Err(Error::InvalidDensityMatrix("not Hermitian".into()));
        }
        if (dm.trace() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDensityMatrix(format!("trace {} != 1", dm.trace())));
        }
        Ok(dm)
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| self.elems[r * d + c])
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub(crate) fn elements_mut(&mut self) -> &mut [C64] {
        &mut self.elems
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.elems[r * self.dim() + c]
    }

    pub fn trace(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|i| self.elems[i * d + i].re).sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|r| (r..d).all(|c| (self.elems[r * d + c] - self.elems[c * d + r].conj()).norm() <= tol))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_matrix();
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn check_qubit(&self, i: usize) -> Result<()> {
        if i >= self.n_qubits {
            return Err(Error::QubitOutOfRange { index: i, n_qubits: self.n_qubits });
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        let n = self.n_qubits;
        match (gate.targets(), gate.matrix()) {
            (Targets::One(q), GateMatrix::One(m)) => {
                apply_1q(&mut self.elems, q + n, &m);
                apply_1q(&mut self.elems, q, &conj2(&m));
            }
            (Targets::Two(a, b), GateMatrix::Two(m)) => {
                apply_2q(&mut self.elems, a + n, b + n, &m);
                apply_2q(&mut self.elems, a, b, &conj4(&m));
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    pub fn apply_gates<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    /// `ρ_rc → d_r ρ_rc conj(d_c)`.
    pub(crate) fn apply_diagonal(&mut self, diag: &[C64]) {
        let d = self.dim();
        for r in 0..d {
            let dr = diag[r];
            for c in 0..d {
                self.elems[r * d + c] *= dr * diag[c].conj();
            }
        }
    }

    /// `ρ → Σ_k K_k ρ K_k†` on `targets`; local index bit `t` of each Kraus
    /// operator addresses `targets[t]`.
    pub fn apply_channel(&mut self, kraus: &[DMatrix<C64>], targets: &[usize]) -> Result<()> {
        let local = 1usize << targets.len();
        for (k, &t) in targets.iter().enumerate() {
            self.check_qubit(t)?;
            if targets[..k].contains(&t) {
                return Err(Error::DuplicateTarget(t));
            }
        }
        if kraus.is_empty() {
            return Err(invalid("empty Kraus set"));
        }
        for k in kraus {
            if k.nrows() != local || k.ncols() != local {
                return Err(Error::DimensionMismatch { expected: local, got: k.nrows() });
            }
        }
        let completeness = kraus.iter().fold(DMatrix::<C64>::zeros(local, local), |acc, k| acc + k.adjoint() * k);
        let dev = (completeness - DMatrix::<C64>::identity(local, local)).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if dev > 1e-10 {
            return Err(Error::NotTracePreserving(dev));
        }
        self.apply_kraus_unchecked(kraus, targets);
        Ok(())
    }

    pub(crate) fn apply_kraus_unchecked(&mut self, kraus: &[DMatrix<C64>], targets: &[usize]) {
        let n = self.n_qubits;
        let row_qubits: Vec<usize> = targets.iter().map(|t| t + n).collect();
        let flat = |m: &DMatrix<C64>, conj: bool| -> Vec<C64> {
            let d = m.nrows();
            (0..d * d).map(|i| if conj { m[(i / d, i % d)].conj() } else { m[(i / d, i % d)] }).collect()
        };
        let mut acc = vec![C64::new(0.0, 0.0); self.elems.len()];
        for k in kraus {
            let mut term = self.elems.clone();
            apply_local(&mut term, &row_qubits, &flat(k, false));
            apply_local(&mut term, targets, &flat(k, true));
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
        }
        self.elems = acc;
    }

    /// 2x2 reduced state of qubit `i`.
    pub fn reduced_qubit(&self, i: usize) -> Result<Qubit2x2> {
        self.check_qubit(i)?;
        let d = self.dim();
        let mask = 1usize << i;
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        for r in 0..d {
            let rb = usize::from(r & mask != 0);
            for cb in 0..2 {
                let c = (r & !mask) | (cb << i);
                out[rb][cb] += self.elems[r * d + c];
            }
        }
        Ok(out)
    }

    /// Traces out qubit `i`; higher qubits shift down by one.
    pub fn partial_trace(&self, i: usize) -> Result<DensityMatrix> {
        self.check_qubit(i)?;
        let d = self.dim();
        let nd = d / 2;
        let lift = |k: usize, b: usize| (k & ((1 << i) - 1)) | (b << i) | ((k >> i) << (i + 1));
        let mut elems = vec![C64::new(0.0, 0.0); nd * nd];
        for r in 0..nd {
            for c in 0..nd {
                elems[r * nd + c] = (0..2).map(|b| self.elems[lift(r, b) * d + lift(c, b)]).sum();
            }
        }
        Ok(DensityMatrix { n_qubits: self.n_qubits - 1, elems })
    }

    /// `ρ → σ_i ⊗ Tr_i ρ`.
    pub fn reset_qubit(&mut self, i: usize, replacement: &Qubit2x2) -> Result<()> {
        self.check_qubit(i)?;
        validate_qubit_state(replacement)?;
        let d = self.dim();
        let mask = 1usize << i;
        for r0 in (0..d).filter(|r| r & mask == 0) {
            for c0 in (0..d).filter(|c| c & mask == 0) {
                let t = self.elems[r0 * d + c0] + self.elems[(r0 | mask) * d + (c0 | mask)];
                for (a, row) in replacement.iter().enumerate() {
                    for (b, s) in row.iter().enumerate() {
                        let r = r0 | (a << i);
                        let c = c0 | (b << i);
                        self.elems[r * d + c] = s * t;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|i| self.elems[i * d + i].re).collect()
    }

    pub fn expect_z(&self, i: usize) -> Result<f64> {
        self.check_qubit(i)?;
        Ok(self.probabilities().iter().enumerate().map(|(k, p)| if k >> i & 1 == 0 { *p } else { -p }).sum())
    }

    pub fn expect_zz(&self, i: usize, j: usize) -> Result<f64> {
        self.check_qubit(i)?;
        self.check_qubit(j)?;
        if i == j {
            return Err(invalid("expect_zz needs two distinct qubits"));
        }
        Ok(self.probabilities().iter().enumerate().map(|(k, p)| if (k >> i ^ k >> j) & 1 == 0 { *p } else { -p }).sum())
    }

    /// Same layout as [`StateVector::z_features`].
    pub fn z_features(&self) -> Vec<f64> {
        z_features_from_probs(self.n_qubits, &self.probabilities())
    }
}

pub(crate) fn validate_qubit_state(m: &Qubit2x2) -> Result<()> {
    let tr = m[0][0].re + m[1][1].re;
    let herm = m[0][0].im.abs() <= 1e-10 && m[1][1].im.abs() <= 1e-10 && (m[0][1] - m[1][0].conj()).norm() <= 1e-10;
    if !herm {
        return Err(Error::InvalidDensityMatrix("replacement is not Hermitian".into()));
    }
    if (tr - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidDensityMatrix(format!("replacement trace {tr} != 1")));
    }
    let det = m[0][0].re * m[1][1].re - m[0][1].norm_sqr();
    if m[0][0].re < -1e-10 || m[1][1].re < -1e-10 || det < -1e-10 {
        return Err(Error::InvalidDensityMatrix("replacement is not positive semidefinite".into()));
    }
    Ok(())
}

/// `|ψ⟩⟨ψ|` for a single-qubit pure state.
pub fn qubit_projector(a0: C64, a1: C64) -> Qubit2x2 {
    [[a0 * a0.conj(), a0 * a1.conj()], [a1 * a0.conj(), a1 * a1.conj()]]
}
