//! Discrete-time-crystal Floquet reservoir: parameter sampling, the cycle
//! circuit, input encodings, snapshot features and time-series injection.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qstate::kernels::{apply_1q, conj2, M2};
use crate::qstate::{qubit_projector, DensityMatrix, Gate, GateMatrix, StateVector};
use crate::rng::{derive_seed, rng_for};

pub const PHI_RANGE: (f64, f64) = (-1.5 * PI, -0.5 * PI);
pub const H_RANGE: (f64, f64) = (-PI, PI);

/// Largest chain handled by the density-matrix time-series path.
pub const TIMESERIES_MAX_QUBITS: usize = 10;

/// Open-chain reservoir: flip strength `g`, `n - 1` couplings `phi` and `n`
/// onsite fields `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloquetParams {
    pub n: usize,
    pub g: f64,
    pub phi: Vec<f64>,
    pub h: Vec<f64>,
    pub seed: u64,
}

impl FloquetParams {
    pub fn new(g: f64, phi: Vec<f64>, h: Vec<f64>, seed: u64) -> Result<Self> {
        let n = h.len();
        if n < 2 {
            return Err(invalid("reservoir needs at least 2 qubits"));
        }
        if phi.len() != n - 1 {
            return Err(Error::DimensionMismatch { expected: n - 1, got: phi.len() });
        }
        if !(0.0..=1.0).contains(&g) {
            return Err(invalid(format!("flip strength g = {g} outside [0, 1]")));
        }
        if let Some(p) = phi.iter().find(|p| !(PHI_RANGE.0..=PHI_RANGE.1).contains(*p)) {
            return Err(invalid(format!("coupling angle {p} outside [-1.5π, -0.5π]")));
        }
        if let Some(x) = h.iter().find(|x| !(H_RANGE.0..=H_RANGE.1).contains(*x)) {
            return Err(invalid(format!("onsite angle {x} outside [-π, π]")));
        }
        Ok(Self { n, g, phi, h, seed })
    }

    /// Same disorder, different flip strength.
    pub fn with_g(&self, g: f64) -> Result<Self> {
        Self::new(g, self.phi.clone(), self.h.clone(), self.seed)
    }

    /// Disorder-free cycle with no flip: every layer is the identity up to
    /// phases that vanish (`phi` and `h` are not in their sampling ranges,
    /// so this bypasses validation). Useful as a memoryless control.
    pub fn trivial(n: usize) -> Self {
        Self { n, g: 0.0, phi: vec![0.0; n.saturating_sub(1)], h: vec![0.0; n], seed: 0 }
    }
}

/// Uniform disorder: `phi_i ~ U[-1.5π, -0.5π]`, `h_i ~ U[-π, π]`.
pub fn sample_params(n: usize, g: f64, seed: u64) -> Result<FloquetParams> {
    if n < 2 {
        return Err(invalid("reservoir needs at least 2 qubits"));
    }
    if !(0.0..=1.0).contains(&g) {
        return Err(invalid(format!("flip strength g = {g} outside [0, 1]")));
    }
    let mut rng = rng_for(seed, &[0xf10c]);
    let phi = (0..n - 1).map(|_| rng.random_range(PHI_RANGE.0..=PHI_RANGE.1)).collect();
    let h = (0..n).map(|_| rng.random_range(H_RANGE.0..=H_RANGE.1)).collect();
    Ok(FloquetParams { n, g, phi, h, seed })
}

/// One period: `RX(πg)` on every qubit, `ZZ(φ_i/2)` on each bond, `RZ(h_i)`
/// on every qubit.
pub fn build_cycle(params: &FloquetParams) -> Vec<Gate> {
    let n = params.n;
    let mut gates = Vec::with_capacity(3 * n - 1);
    gates.extend((0..n).map(|q| Gate::rx(q, PI * params.g)));
    gates.extend(params.phi.iter().enumerate().map(|(i, &p)| Gate::zz(i, i + 1, p / 2.0)));
    gates.extend(params.h.iter().enumerate().map(|(q, &h)| Gate::rz(q, h)));
    gates
}

/// The cycle folded into a flip matrix plus one diagonal phase vector.
#[derive(Clone, Debug)]
pub struct CompiledCycle {
    n: usize,
    flip: M2,
    diag: Vec<C64>,
}

impl CompiledCycle {
    pub fn new(params: &FloquetParams) -> Self {
        let n = params.n;
        let GateMatrix::One(flip) = Gate::rx(0, PI * params.g).matrix() else { unreachable!() };
        let z = |k: usize, q: usize| if k >> q & 1 == 0 { 1.0 } else { -1.0 };
        let diag = (0..1usize << n)
            .map(|k| {
                let bonds: f64 = params.phi.iter().enumerate().map(|(i, p)| p / 4.0 * z(k, i) * z(k, i + 1)).sum();
                let fields: f64 = params.h.iter().enumerate().map(|(q, h)| h / 2.0 * z(k, q)).sum();
                C64::from_polar(1.0, -(bonds + fields))
            })
            .collect();
        Self { n, flip, diag }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn apply(&self, state: &mut StateVector) {
        debug_assert_eq!(state.n_qubits(), self.n);
        let amps = state.amplitudes_mut();
        for q in 0..self.n {
            apply_1q(amps, q, &self.flip);
        }
        state.apply_diagonal(&self.diag);
    }

    /// `U_F†`.
    pub fn apply_inverse(&self, state: &mut StateVector) {
        let conj_diag: Vec<C64> = self.diag.iter().map(|d| d.conj()).collect();
        state.apply_diagonal(&conj_diag);
        let inv = [[self.flip[0][0].conj(), self.flip[1][0].conj()], [self.flip[0][1].conj(), self.flip[1][1].conj()]];
        let amps = state.amplitudes_mut();
        for q in 0..self.n {
            apply_1q(amps, q, &inv);
        }
    }

    pub fn apply_density(&self, dm: &mut DensityMatrix) {
        let n = self.n;
        let conj_flip = conj2(&self.flip);
        let elems = dm.elements_mut();
        for q in 0..n {
            apply_1q(elems, q + n, &self.flip);
            apply_1q(elems, q, &conj_flip);
        }
        dm.apply_diagonal(&self.diag);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    /// `RY(x_i)|0⟩` per qubit, `n` inputs.
    Angle,
    /// `U3(x_i, x_{n+i}, x_{2n+i})|0⟩`, `3n` inputs.
    DenseAngle,
    /// Dense angle preceded by a probabilistic `|0⟩ → |1⟩` preparation error.
    FullAngle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingScheme {
    pub kind: EncodingKind,
    #[serde(default)]
    pub prep_flip_p1: f64,
}

impl EncodingScheme {
    pub fn angle() -> Self {
        Self { kind: EncodingKind::Angle, prep_flip_p1: 0.0 }
    }
    pub fn dense_angle() -> Self {
        Self { kind: EncodingKind::DenseAngle, prep_flip_p1: 0.0 }
    }
    pub fn full_angle(prep_flip_p1: f64) -> Self {
        Self { kind: EncodingKind::FullAngle, prep_flip_p1 }
    }

    pub fn input_dim(&self, n: usize) -> usize {
        match self.kind {
            EncodingKind::Angle => n,
            EncodingKind::DenseAngle | EncodingKind::FullAngle => 3 * n,
        }
    }

    fn validate(&self, x: &[f64], n: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prep_flip_p1) {
            return Err(invalid(format!("prep_flip_p1 = {} outside [0, 1]", self.prep_flip_p1)));
        }
        let want = self.input_dim(n);
        if x.len() != want {
            return Err(Error::DimensionMismatch { expected: want, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("encoding input contains a non-finite value"));
        }
        Ok(())
    }

    /// Rotation layer applied after preparation (no preparation flips).
    pub fn gates(&self, x: &[f64], n: usize) -> Result<Vec<Gate>> {
        self.validate(x, n)?;
        Ok(match self.kind {
            EncodingKind::Angle => (0..n).map(|q| Gate::ry(q, x[q])).collect(),
            EncodingKind::DenseAngle | EncodingKind::FullAngle => {
                (0..n).map(|q| Gate::u3(q, x[q], x[n + q], x[2 * n + q])).collect()
            }
        })
    }

    /// Which qubits start in `|1⟩` for this preparation draw.
    pub fn sample_prep_flips(&self, n: usize, seed: u64) -> Vec<bool> {
        if self.kind != EncodingKind::FullAngle || self.prep_flip_p1 == 0.0 {
            return vec![false; n];
        }
        let mut rng = rng_for(seed, &[0x9e9]);
        (0..n).map(|_| rng.random::<f64>() < self.prep_flip_p1).collect()
    }
}

/// Product state for input `x`.
pub fn encode(x: &[f64], scheme: &EncodingScheme, n: usize, seed: u64) -> Result<StateVector> {
    let gates = scheme.gates(x, n)?;
    let flips = scheme.sample_prep_flips(n, seed);
    let index = flips.iter().enumerate().filter(|(_, &f)| f).fold(0usize, |acc, (q, _)| acc | 1 << q);
    let mut state = StateVector::basis(n, index)?;
    for g in &gates {
        state.apply_gate_unchecked(g);
    }
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    Exact,
    /// Expectations estimated from this many bitstrings per snapshot.
    Shots(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    pub cycles: usize,
    pub snapshots: usize,
    pub mode: MeasurementMode,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self { cycles: 12, snapshots: 4, mode: MeasurementMode::Exact }
    }
}

impl ReservoirConfig {
    pub fn new(cycles: usize, snapshots: usize) -> Self {
        Self { cycles, snapshots, mode: MeasurementMode::Exact }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snapshots == 0 {
            return Err(invalid("snapshots must be at least 1"));
        }
        if self.cycles == 0 || self.cycles % self.snapshots != 0 {
            return Err(invalid(format!(
                "cycle count {} is not a positive multiple of snapshot count {}",
                self.cycles, self.snapshots
            )));
        }
        if self.mode == MeasurementMode::Shots(0) {
            return Err(invalid("shots must be at least 1"));
        }
        Ok(())
    }

    pub fn cycles_per_snapshot(&self) -> usize {
        self.cycles / self.snapshots
    }

    pub fn feature_dim(&self, n: usize) -> usize {
        self.snapshots * features_per_snapshot(n)
    }
}

pub fn features_per_snapshot(n: usize) -> usize {
    n + n * (n - 1) / 2
}

/// One feature row: after every `cycles / snapshots` periods the single-Z and
/// pairwise ZZ expectations are appended, oldest snapshot first.
pub fn extract_features(
    x: &[f64],
    scheme: &EncodingScheme,
    params: &FloquetParams,
    cfg: &ReservoirConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let cycle = CompiledCycle::new(params);
    extract_with_cycle(x, scheme, &cycle, cfg, seed)
}

fn extract_with_cycle(
    x: &[f64],
    scheme: &EncodingScheme,
    cycle: &CompiledCycle,
    cfg: &ReservoirConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = cycle.n_qubits();
    let mut state = encode(x, scheme, n, seed)?;
    let mut row = Vec::with_capacity(cfg.feature_dim(n));
    for snap in 0..cfg.snapshots {
        for _ in 0..cfg.cycles_per_snapshot() {
            cycle.apply(&mut state);
        }
        match cfg.mode {
            MeasurementMode::Exact => row.extend(state.z_features()),
            MeasurementMode::Shots(shots) => {
                let h = state.sample_bitstrings(shots, derive_seed(seed, &[0x5407, snap as u64]))?;
                row.extend(h.z_features());
            }
        }
    }
    Ok(row)
}

/// Per-sample features; row `i` uses seed `derive_seed(seed, [i])` and rows
/// are computed in parallel.
pub fn feature_matrix(
    inputs: &DMatrix<f64>,
    scheme: &EncodingScheme,
    params: &FloquetParams,
    cfg: &ReservoirConfig,
    seed: u64,
) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let cycle = CompiledCycle::new(params);
    let rows: Vec<Vec<f64>> = (0..inputs.nrows())
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = inputs.row(i).iter().copied().collect();
            extract_with_cycle(&x, scheme, &cycle, cfg, derive_seed(seed, &[i as u64]))
        })
        .collect::<Result<_>>()?;
    let cols = cfg.feature_dim(params.n);
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

/// Single-qubit injected state `√(1-s)|0⟩ + √s|1⟩`.
pub fn injection_state(s: f64) -> crate::qstate::Qubit2x2 {
    qubit_projector(C64::new((1.0 - s).sqrt(), 0.0), C64::new(s.sqrt(), 0.0))
}

/// When the per-step features are recorded relative to the injection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOrder {
    /// Inject `s_k`, apply the cycle, record.
    #[default]
    InjectEvolveRecord,
    /// Apply the cycle, inject `s_k` in place of qubit 0, record.
    EvolveInjectRecord,
}

/// Drives the reservoir with `s`, one value per step: qubit 0 is replaced by
/// the injected state, one cycle is applied and the Z/ZZ expectations are
/// recorded. Starts from `|0…0⟩`. Row `k` holds the features after step `k`.
pub fn timeseries_run(s: &[f64], params: &FloquetParams) -> Result<DMatrix<f64>> {
    timeseries_run_ordered(s, params, StepOrder::InjectEvolveRecord)
}

pub fn timeseries_run_ordered(s: &[f64], params: &FloquetParams, order: StepOrder) -> Result<DMatrix<f64>> {
    if params.n > TIMESERIES_MAX_QUBITS {
        return Err(Error::TooManyQubits { what: "time-series reservoir", n: params.n, max: TIMESERIES_MAX_QUBITS });
    }
    if let Some(v) = s.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(format!("time-series input {v} outside [0, 1]")));
    }
    let cycle = CompiledCycle::new(params);
    let mut rho = DensityMatrix::zero(params.n)?;
    let width = features_per_snapshot(params.n);
    let mut out = DMatrix::zeros(s.len(), width);
    for (k, &sk) in s.iter().enumerate() {
        match order {
            StepOrder::InjectEvolveRecord => {
                rho.reset_qubit(0, &injection_state(sk))?;
                cycle.apply_density(&mut rho);
            }
            StepOrder::EvolveInjectRecord => {
                cycle.apply_density(&mut rho);
                rho.reset_qubit(0, &injection_state(sk))?;
            }
        }
        for (c, v) in rho.z_features().into_iter().enumerate() {
            out[(k, c)] = v;
        }
    }
    Ok(out)
}
