use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::Rng;

use super::gate::{Gate, GateMatrix};
use super::kernels::{apply_1q, apply_2q, apply_diag_1q, apply_diag_2q};
use super::pauli::PauliString;
use crate::error::{invalid, Error, Result};
use crate::rng::rng_for;

/// Pure `n`-qubit state. Qubit 0 is the least-significant bit of the
/// amplitude index.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub const MAX_QUBITS: usize = 20;

    fn check_size(n: usize) -> Result<()> {
        if n > Self::MAX_QUBITS {
            return Err(Error::TooManyQubits { what: "state vector", n, max: Self::MAX_QUBITS });
        }
        Ok(())
    }

    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        Self::check_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(invalid(format!("basis index {index} out of range for {n_qubits} qubits")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Takes the amplitudes as given; the norm must be 1 within 1e-8.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        Self::check_size(n_qubits)?;
        if amps.len() != 1 << n_qubits {
            return Err(Error::DimensionMismatch { expected: 1 << n_qubits, got: amps.len() });
        }
        let norm: f64 = amps.iter().map(C64::norm_sqr).sum();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(invalid(format!("state norm {norm} is not 1")));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(C64::norm_sqr).sum()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    fn check_qubit(&self, i: usize) -> Result<()> {
        if i >= self.n_qubits {
            return Err(Error::QubitOutOfRange { index: i, n_qubits: self.n_qubits });
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_gate_unchecked(gate);
        Ok(())
    }

    pub fn apply_gates<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    pub(crate) fn apply_gate_unchecked(&mut self, gate: &Gate) {
        match (*gate, gate.matrix()) {
            (Gate::Rz { qubit, .. }, GateMatrix::One(m)) => apply_diag_1q(&mut self.amps, qubit, m[0][0], m[1][1]),
            (Gate::Zz { a, b, .. }, GateMatrix::Two(m)) => {
                apply_diag_2q(&mut self.amps, a, b, &[m[0][0], m[1][1], m[2][2], m[3][3]])
            }
            (Gate::X { qubit }, _) => {
                let stride = 1usize << qubit;
                for base in (0..self.amps.len()).step_by(stride << 1) {
                    for i in base..base + stride {
                        self.amps.swap(i, i + stride);
                    }
                }
            }
            (g, GateMatrix::One(m)) => {
                let super::gate::Targets::One(q) = g.targets() else { unreachable!() };
                apply_1q(&mut self.amps, q, &m);
            }
            (g, GateMatrix::Two(m)) => {
                let super::gate::Targets::Two(a, b) = g.targets() else { unreachable!() };
                apply_2q(&mut self.amps, a, b, &m);
            }
        }
    }

    /// Multiply amplitude `k` by `diag[k]`.
    pub(crate) fn apply_diagonal(&mut self, diag: &[C64]) {
        for (a, d) in self.amps.iter_mut().zip(diag) {
            *a *= d;
        }
    }

    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        if p.len() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, got: p.len() });
        }
        self.amps = p.apply(&self.amps);
        Ok(())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(C64::norm_sqr).collect()
    }

    pub fn expect_z(&self, i: usize) -> Result<f64> {
        self.check_qubit(i)?;
        let mask = 1usize << i;
        Ok(self.amps.iter().enumerate().map(|(k, a)| if k & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() }).sum())
    }

    pub fn expect_zz(&self, i: usize, j: usize) -> Result<f64> {
        self.check_qubit(i)?;
        self.check_qubit(j)?;
        if i == j {
            return Err(invalid("expect_zz needs two distinct qubits"));
        }
        let mask = (1usize << i) | (1usize << j);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(k, a)| if (k & mask).count_ones() % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    /// All `⟨Z_i⟩` followed by `⟨Z_iZ_j⟩` for `i < j` in lexicographic order.
    pub fn z_features(&self) -> Vec<f64> {
        z_features_from_probs(self.n_qubits, &self.probabilities())
    }

    /// `⟨ψ| P_1 P_2 … P_k |ψ⟩`; the rightmost string acts first.
    pub fn expect_pauli_product(&self, ops: &[PauliString]) -> Result<C64> {
        let mut phi = self.amps.clone();
        for p in ops.iter().rev() {
            if p.len() != self.n_qubits {
                return Err(Error::DimensionMismatch { expected: self.n_qubits, got: p.len() });
            }
            phi = p.apply(&phi);
        }
        Ok(self.amps.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn sample_bitstrings(&self, shots: usize, seed: u64) -> Result<Histogram> {
        if shots == 0 {
            return Err(invalid("shots must be at least 1"));
        }
        let mut rng = rng_for(seed, &[0x5a17]);
        Ok(sample_from_probs(self.n_qubits, &self.probabilities(), shots, &mut rng))
    }
}

pub(crate) fn sample_from_probs(n_qubits: usize, probs: &[f64], shots: usize, rng: &mut impl Rng) -> Histogram {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.random::<f64>() * total;
        let k = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
        *counts.entry(k as u64).or_insert(0usize) += 1;
    }
    Histogram { n_qubits, shots, counts }
}

pub(crate) fn z_features_from_probs(n: usize, probs: &[f64]) -> Vec<f64> {
    let n_pairs = n * (n.saturating_sub(1)) / 2;
    let mut out = vec![0.0; n + n_pairs];
    for (k, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let mut idx = n;
        for i in 0..n {
            let zi = if k >> i & 1 == 0 { 1.0 } else { -1.0 };
            out[i] += p * zi;
            for j in i + 1..n {
                let zj = if k >> j & 1 == 0 { 1.0 } else { -1.0 };
                out[idx] += p * zi * zj;
                idx += 1;
            }
        }
    }
    out
}

/// Bitstring counts; key bit `i` is qubit `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub n_qubits: usize,
    pub shots: usize,
    pub counts: BTreeMap<u64, usize>,
}

impl Histogram {
    pub fn count(&self, bitstring: u64) -> usize {
        self.counts.get(&bitstring).copied().unwrap_or(0)
    }

    pub fn expect_z(&self, i: usize) -> f64 {
        let s: i64 = self.counts.iter().map(|(&k, &c)| if k >> i & 1 == 0 { c as i64 } else { -(c as i64) }).sum();
        s as f64 / self.shots as f64
    }

    pub fn expect_zz(&self, i: usize, j: usize) -> f64 {
        let s: i64 =
            self.counts.iter().map(|(&k, &c)| if (k >> i ^ k >> j) & 1 == 0 { c as i64 } else { -(c as i64) }).sum();
        s as f64 / self.shots as f64
    }

    /// Shot estimates in the same layout as [`StateVector::z_features`].
    pub fn z_features(&self) -> Vec<f64> {
        let n = self.n_qubits;
        let mut out: Vec<f64> = (0..n).map(|i| self.expect_z(i)).collect();
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.expect_zz(i, j));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ry_pi_flips_zero_to_one() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply_gate(&Gate::ry(0, PI)).unwrap();
        assert!((s.amplitudes()[1].norm() - 1.0).abs() < 1e-12);
        assert!(s.amplitudes()[0].norm() < 1e-12);
    }

    #[test]
    fn rx_zero_is_identity() {
        let mut s = StateVector::zero(3).unwrap();
        s.apply_gate(&Gate::ry(1, 0.4)).unwrap();
        s.apply_gate(&Gate::u3(2, 0.9, 0.3, 1.0)).unwrap();
        let before = s.clone();
        s.apply_gate(&Gate::rx(1, 0.0)).unwrap();
        assert_eq!(before, s);
    }

    #[test]
    fn gate_errors() {
        let mut s = StateVector::zero(2).unwrap();
        assert!(s.apply_gate(&Gate::rx(2, 0.1)).is_err());
        assert!(s.apply_gate(&Gate::cnot(1, 1)).is_err());
        assert!(StateVector::zero(21).is_err());
    }

    #[test]
    fn z_expectations() {
        let s = StateVector::zero(3).unwrap();
        for i in 0..3 {
            assert_eq!(s.expect_z(i).unwrap(), 1.0);
        }
        let one = StateVector::basis(3, 0b010).unwrap();
        assert_eq!(one.expect_z(1).unwrap(), -1.0);
        assert_eq!(one.expect_z(0).unwrap(), 1.0);
        assert!(s.expect_z(3).is_err());

        let mut r = StateVector::zero(1).unwrap();
        r.apply_gate(&Gate::ry(0, 0.7)).unwrap();
        assert!((r.expect_z(0).unwrap() - 0.7f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn zz_expectations() {
        let s = StateVector::zero(3).unwrap();
        assert_eq!(s.expect_zz(0, 2).unwrap(), 1.0);
        assert!(s.expect_zz(1, 1).is_err());
        assert!(s.expect_zz(0, 5).is_err());

        let (a, b) = (0.4, 1.9);
        let mut p = StateVector::zero(2).unwrap();
        p.apply_gate(&Gate::ry(0, a)).unwrap();
        p.apply_gate(&Gate::ry(1, b)).unwrap();
        assert!((p.expect_zz(0, 1).unwrap() - a.cos() * b.cos()).abs() < 1e-12);

        let h = 1.0 / 2f64.sqrt();
        let bell = StateVector::from_amplitudes(
            2,
            vec![C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)],
        )
        .unwrap();
        assert!((bell.expect_zz(0, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn features_layout_matches_individual_calls() {
        let mut s = StateVector::zero(4).unwrap();
        for (q, t) in [0.3, 1.2, 2.0, 0.8].iter().enumerate() {
            s.apply_gate(&Gate::ry(q, *t)).unwrap();
        }
        s.apply_gate(&Gate::cnot(0, 3)).unwrap();
        let f = s.z_features();
        assert_eq!(f.len(), 4 + 6);
        let mut idx = 4;
        for i in 0..4 {
            assert!((f[i] - s.expect_z(i).unwrap()).abs() < 1e-14);
            for j in i + 1..4 {
                assert!((f[idx] - s.expect_zz(i, j).unwrap()).abs() < 1e-14);
                idx += 1;
            }
        }
    }

    #[test]
    fn pauli_products() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply_gate(&Gate::u3(0, 0.7, 0.2, 0.1)).unwrap();
        s.apply_gate(&Gate::cnot(0, 1)).unwrap();
        let id: PauliString = "II".parse().unwrap();
        assert!((s.expect_pauli_product(&[id]).unwrap() - 1.0).norm() < 1e-12);
        let z0: PauliString = "ZI".parse().unwrap();
        assert!((s.expect_pauli_product(&[z0.clone(), z0]).unwrap() - 1.0).norm() < 1e-12);
        // X_0 X_1 X_0 X_1 = I at t = 0.
        let x0: PauliString = "XI".parse().unwrap();
        let x1: PauliString = "IX".parse().unwrap();
        let v = s.expect_pauli_product(&[x0.clone(), x1.clone(), x0, x1]).unwrap();
        assert!((v - 1.0).norm() < 1e-12);
        let bad: PauliString = "X".parse().unwrap();
        assert!(s.expect_pauli_product(&[bad]).is_err());
    }

    #[test]
    fn sampling() {
        let ones = StateVector::basis(3, 0b111).unwrap();
        let h = ones.sample_bitstrings(100, 1).unwrap();
        assert_eq!(h.count(0b111), 100);
        assert!(ones.sample_bitstrings(0, 1).is_err());

        let mut plus = StateVector::zero(1).unwrap();
        plus.apply_gate(&Gate::ry(0, PI / 2.0)).unwrap();
        let a = plus.sample_bitstrings(1000, 42).unwrap();
        let b = plus.sample_bitstrings(1000, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.values().sum::<usize>(), 1000);
    }
}
