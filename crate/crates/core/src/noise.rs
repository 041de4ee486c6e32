//! Hardware-style noise: preparation flips, thermal relaxation and
//! depolarizing channels, executed exactly on density matrices or sampled
//! as state-vector trajectories.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::floquet::{
    build_cycle, extract_features, EncodingKind, EncodingScheme, FloquetParams, MeasurementMode, ReservoirConfig,
};
use crate::qstate::kernels::apply_1q;
use crate::qstate::{sample_from_probs, z_features_from_probs, DensityMatrix, Gate, GateMatrix, StateVector, Targets};
use crate::rng::{derive_seed, rng_for};

/// Largest register the exact channel backend accepts.
pub const CHANNEL_MAX_QUBITS: usize = 10;

/// Noise rates, coherence statistics and gate durations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Probability that a qubit starts in `|1⟩` instead of `|0⟩`.
    pub prep_flip_p1: f64,
    pub depol_1q_p: f64,
    pub depol_2q_p: f64,
    /// Enables T1/T2 relaxation during gates and the measurement delay.
    pub relaxation: bool,
    pub t1_mean_us: f64,
    pub t1_sd_us: f64,
    pub t2_mean_us: f64,
    pub t2_sd_us: f64,
    pub dur_1q_ns: f64,
    pub dur_u3_ns: f64,
    pub dur_2q_ns: f64,
    pub dur_meas_ns: f64,
    /// Runs each ZZ rotation as CNOT, RZ, CNOT with per-CNOT noise.
    pub decompose_zz: bool,
    /// Seeds the per-qubit coherence-time draw.
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::ideal()
    }
}

impl NoiseSpec {
    pub fn ideal() -> Self {
        Self {
            prep_flip_p1: 0.0,
            depol_1q_p: 0.0,
            depol_2q_p: 0.0,
            relaxation: false,
            t1_mean_us: 73.0,
            t1_sd_us: 10.0,
            t2_mean_us: 25.0,
            t2_sd_us: 5.0,
            dur_1q_ns: 50.0,
            dur_u3_ns: 150.0,
            dur_2q_ns: 500.0,
            dur_meas_ns: 1000.0,
            decompose_zz: false,
            seed: 0,
        }
    }

    /// Gate depolarizing only.
    pub fn depolarizing(p1: f64, p2: f64) -> Self {
        Self { depol_1q_p: p1, depol_2q_p: p2, ..Self::ideal() }
    }

    /// Thermal relaxation only, with the default coherence statistics.
    pub fn thermal() -> Self {
        Self { relaxation: true, ..Self::ideal() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in
            [("prep_flip_p1", self.prep_flip_p1), ("depol_1q_p", self.depol_1q_p), ("depol_2q_p", self.depol_2q_p)]
        {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        for (name, d) in [
            ("dur_1q_ns", self.dur_1q_ns),
            ("dur_u3_ns", self.dur_u3_ns),
            ("dur_2q_ns", self.dur_2q_ns),
            ("dur_meas_ns", self.dur_meas_ns),
            ("t1_mean_us", self.t1_mean_us),
            ("t2_mean_us", self.t2_mean_us),
        ] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if self.t1_sd_us < 0.0 || self.t2_sd_us < 0.0 {
            return Err(invalid("coherence-time spreads must be non-negative"));
        }
        if self.relaxation && self.t2_mean_us >= self.t1_mean_us {
            return Err(invalid("mean T2 must be below mean T1"));
        }
        Ok(())
    }

    /// No noise source is active.
    pub fn is_ideal(&self) -> bool {
        self.prep_flip_p1 == 0.0 && self.depol_1q_p == 0.0 && self.depol_2q_p == 0.0 && !self.relaxation
    }

    /// Duration of `gate` in nanoseconds.
    pub fn duration_ns(&self, gate: &Gate) -> f64 {
        match gate {
            Gate::U3 { .. } => self.dur_u3_ns,
            g if g.arity() == 2 => self.dur_2q_ns,
            _ => self.dur_1q_ns,
        }
    }
}

/// Per-qubit coherence times in microseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub t1_us: Vec<f64>,
    pub t2_us: Vec<f64>,
}

impl DeviceProfile {
    /// Draws `T1 ~ N(μ1, σ1)`, `T2 ~ N(μ2, σ2)` per qubit, redrawing the pair
    /// until `0 < T2 < T1`.
    pub fn sample(n: usize, spec: &NoiseSpec) -> Result<Self> {
        spec.validate()?;
        let d1 = Normal::new(spec.t1_mean_us, spec.t1_sd_us).map_err(|e| invalid(e.to_string()))?;
        let d2 = Normal::new(spec.t2_mean_us, spec.t2_sd_us).map_err(|e| invalid(e.to_string()))?;
        let mut rng = rng_for(spec.seed, &[0xde71]);
        let mut t1_us = Vec::with_capacity(n);
        let mut t2_us = Vec::with_capacity(n);
        for _ in 0..n {
            let mut tries = 0;
            loop {
                let (a, b) = (d1.sample(&mut rng), d2.sample(&mut rng));
                if b > 0.0 && b < a {
                    t1_us.push(a);
                    t2_us.push(b);
                    break;
                }
                tries += 1;
                if tries > 10_000 {
                    return Err(invalid("could not draw T2 < T1 from the configured distributions"));
                }
            }
        }
        Ok(Self { t1_us, t2_us })
    }

    pub fn uniform(n: usize, t1_us: f64, t2_us: f64) -> Result<Self> {
        if !(t2_us > 0.0 && t2_us < t1_us) {
            return Err(invalid("coherence times need 0 < T2 < T1"));
        }
        Ok(Self { t1_us: vec![t1_us; n], t2_us: vec![t2_us; n] })
    }

    pub fn n_qubits(&self) -> usize {
        self.t1_us.len()
    }
}

/// Weights of the `{Reset, Z, I}` mixture for a relaxation window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalProbs {
    pub reset: f64,
    pub z: f64,
    pub id: f64,
}

/// Relaxation mixture for duration `t` (same time unit as `t1`, `t2`).
pub fn thermal_probs(t: f64, t1: f64, t2: f64) -> Result<ThermalProbs> {
    if !(t1 > 0.0 && t2 > 0.0) || t < 0.0 {
        return Err(invalid("relaxation times must be positive and t non-negative"));
    }
    if t2 >= t1 {
        return Err(invalid(format!("T2 = {t2} must be below T1 = {t1}")));
    }
    let reset = 1.0 - (-t / t1).exp();
    let z = 0.5 * (1.0 - reset) * (1.0 - (-t * (1.0 / t2 - 1.0 / t1)).exp());
    Ok(ThermalProbs { reset, z, id: 1.0 - z - reset })
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Depolarizing on one or two qubits: each non-identity Pauli string on the
/// targets is applied with probability `p/3` or `p/15`.
pub fn depolarize(dm: &mut DensityMatrix, targets: &[usize], p: f64) -> Result<()> {
    check_p(p)?;
    if !(1..=2).contains(&targets.len()) {
        return Err(invalid("depolarizing acts on one or two qubits"));
    }
    for (k, &t) in targets.iter().enumerate() {
        if t >= dm.n_qubits() {
            return Err(Error::QubitOutOfRange { index: t, n_qubits: dm.n_qubits() });
        }
        if targets[..k].contains(&t) {
            return Err(Error::DuplicateTarget(t));
        }
    }
    depolarize_unchecked(dm, targets, p);
    Ok(())
}

/// Uses `Σ_P PρP = 4^k (I/2^k ⊗ Tr_S ρ)` over all `4^k` Paulis `P` on the
/// target set `S`, so the channel is `(1-λ)ρ + λ (I/2^k ⊗ Tr_S ρ)` with
/// `λ = p·4^k/(4^k-1)`.
fn depolarize_unchecked(dm: &mut DensityMatrix, targets: &[usize], p: f64) {
    if p == 0.0 {
        return;
    }
    let k = targets.len() as u32;
    let local = 1usize << k;
    let lambda = p * 4f64.powi(k as i32) / (4f64.powi(k as i32) - 1.0);
    let d = dm.dim();
    let mask: usize = targets.iter().map(|&t| 1usize << t).sum();
    let patterns: Vec<usize> =
        (0..local).map(|x| targets.iter().enumerate().map(|(b, &t)| ((x >> b) & 1) << t).sum()).collect();
    let elems = dm.elements_mut();
    for r0 in (0..d).filter(|r| r & mask == 0) {
        for c0 in (0..d).filter(|c| c & mask == 0) {
            let tr: C64 = patterns.iter().map(|&x| elems[(r0 | x) * d + (c0 | x)]).sum();
            let mixed = tr * (lambda / local as f64);
            for &xr in &patterns {
                for &xc in &patterns {
                    let e = &mut elems[(r0 | xr) * d + (c0 | xc)];
                    *e *= 1.0 - lambda;
                    if xr == xc {
                        *e += mixed;
                    }
                }
            }
        }
    }
}

/// `ρ → p_id ρ + p_z ZρZ + p_reset |0⟩⟨0| ⊗ Tr_q ρ`.
pub fn thermal_relax(dm: &mut DensityMatrix, q: usize, probs: ThermalProbs) -> Result<()> {
    if q >= dm.n_qubits() {
        return Err(Error::QubitOutOfRange { index: q, n_qubits: dm.n_qubits() });
    }
    thermal_unchecked(dm, q, probs);
    Ok(())
}

fn thermal_unchecked(dm: &mut DensityMatrix, q: usize, probs: ThermalProbs) {
    if probs.reset == 0.0 && probs.z == 0.0 {
        return;
    }
    let d = dm.dim();
    let m = 1usize << q;
    let keep = probs.id + probs.z;
    let flip = probs.id - probs.z;
    let elems = dm.elements_mut();
    for r0 in (0..d).filter(|r| r & m == 0) {
        for c0 in (0..d).filter(|c| c & m == 0) {
            let i00 = r0 * d + c0;
            let i01 = r0 * d + (c0 | m);
            let i10 = (r0 | m) * d + c0;
            let i11 = (r0 | m) * d + (c0 | m);
            let tr = elems[i00] + elems[i11];
            elems[i00] = elems[i00] * keep + tr * probs.reset;
            elems[i11] *= keep;
            elems[i01] *= flip;
            elems[i10] *= flip;
        }
    }
}

/// `ρ → (1-p) ρ + p XρX` on qubit `q`.
pub fn prep_flip_channel(dm: &mut DensityMatrix, q: usize, p: f64) -> Result<()> {
    check_p(p)?;
    if q >= dm.n_qubits() {
        return Err(Error::QubitOutOfRange { index: q, n_qubits: dm.n_qubits() });
    }
    if p == 0.0 {
        return Ok(());
    }
    let mut flipped = dm.clone();
    flipped.apply_gate(&Gate::x(q))?;
    let src = flipped.elements_mut().to_vec();
    for (e, f) in dm.elements_mut().iter_mut().zip(src) {
        *e = *e * (1.0 - p) + f * p;
    }
    Ok(())
}

/// Trajectory form of the preparation flip: `X` with probability `p`.
pub fn prep_flip_state(state: &mut StateVector, q: usize, p: f64, seed: u64) -> Result<bool> {
    check_p(p)?;
    let mut rng = rng_for(seed, &[0x9f1, q as u64]);
    let flip = rng.random::<f64>() < p;
    if flip {
        state.apply_gate(&Gate::x(q))?;
    }
    Ok(flip)
}

const PAULI_Y: [[C64; 2]; 2] = [[C64::new(0.0, 0.0), C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), C64::new(0.0, 0.0)]];
const PAULI_Z: [[C64; 2]; 2] = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]];

/// Pauli index 0..4 = I, X, Y, Z on qubit `q`.
fn apply_pauli_index(state: &mut StateVector, q: usize, which: usize) {
    match which {
        1 => state.apply_gate_unchecked(&Gate::x(q)),
        2 => apply_1q(state.amplitudes_mut(), q, &PAULI_Y),
        3 => apply_1q(state.amplitudes_mut(), q, &PAULI_Z),
        _ => {}
    }
}

/// A noise event drawn for one gate of one trajectory. Drawing does not
/// depend on the state, so events can be drawn before the gate runs.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Event {
    Reset(usize),
    Z(usize),
    /// Pauli code: two bits per target, `0..4 = I, X, Y, Z`.
    Pauli {
        a: usize,
        b: Option<usize>,
        code: usize,
    },
}

fn draw_thermal(q: usize, probs: ThermalProbs, rng: &mut ChaCha8Rng, out: &mut Vec<Event>) {
    let r: f64 = rng.random();
    if r < probs.reset {
        out.push(Event::Reset(q));
    } else if r < probs.reset + probs.z {
        out.push(Event::Z(q));
    }
}

fn draw_depolarizing(targets: Targets, p: f64, rng: &mut ChaCha8Rng, out: &mut Vec<Event>) {
    if p == 0.0 || rng.random::<f64>() >= p {
        return;
    }
    match targets {
        Targets::One(a) => out.push(Event::Pauli { a, b: None, code: 1 + rng.random_range(0..3) }),
        Targets::Two(a, b) => out.push(Event::Pauli { a, b: Some(b), code: 1 + rng.random_range(0..15) }),
    }
}

/// Reset is a Born-rule measurement of `q` followed by `|1⟩ → |0⟩`.
fn apply_event(state: &mut StateVector, ev: Event, rng: &mut ChaCha8Rng) {
    match ev {
        Event::Z(q) => apply_pauli_index(state, q, 3),
        Event::Pauli { a, b, code } => {
            apply_pauli_index(state, a, code & 3);
            if let Some(b) = b {
                apply_pauli_index(state, b, code >> 2);
            }
        }
        Event::Reset(q) => {
            let m = 1usize << q;
            let amps = state.amplitudes_mut();
            let p1: f64 = amps.iter().enumerate().filter(|(i, _)| i & m != 0).map(|(_, a)| a.norm_sqr()).sum();
            let one = rng.random::<f64>() < p1;
            let norm = if one { p1 } else { 1.0 - p1 }.sqrt();
            for i in (0..amps.len()).filter(|i| i & m == 0) {
                let (a0, a1) = (amps[i], amps[i | m]);
                amps[i] = if one { a1 } else { a0 } / norm;
                amps[i | m] = C64::new(0.0, 0.0);
            }
        }
    }
}

/// One step of a noisy program.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Gate(Gate),
    /// Record Z/ZZ features after the measurement delay.
    Snapshot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseBackend {
    Channel,
    Trajectories(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoisyOutput {
    /// Concatenated per-snapshot `[Z_i…, Z_iZ_j…]` features.
    pub features: Vec<f64>,
    /// Standard error of each feature over trajectories (trajectory backend).
    pub stderr: Option<Vec<f64>>,
}

struct Plan<'a> {
    n: usize,
    ops: &'a [Op],
    spec: &'a NoiseSpec,
    /// Per-gate, per-touched-qubit relaxation mixture.
    gate_thermal: Vec<Vec<(usize, ThermalProbs)>>,
    meas_thermal: Vec<ThermalProbs>,
    prep_p: f64,
    segments: Vec<Segment>,
    /// Fused diagonals, shared by identical gate runs.
    diagonals: Vec<(Vec<Gate>, Vec<C64>)>,
}

/// Trajectory execution unit: one op, or a run of at least two diagonal
/// gates whose product is applied in one pass when no event fires inside it.
#[derive(Clone, Copy, Debug)]
enum Segment {
    Single(usize),
    DiagRun { start: usize, end: usize, diag: usize },
}

fn is_diagonal_op(op: &Op) -> bool {
    matches!(op, Op::Gate(g) if g.is_diagonal())
}

fn fused_diagonal(n: usize, gates: &[Gate]) -> Vec<C64> {
    let mut d = vec![C64::new(1.0, 0.0); 1 << n];
    for g in gates {
        match (g.targets(), g.matrix()) {
            (Targets::One(q), GateMatrix::One(m)) => {
                d.iter_mut().enumerate().for_each(|(k, v)| *v *= if k >> q & 1 == 0 { m[0][0] } else { m[1][1] });
            }
            (Targets::Two(a, b), GateMatrix::Two(m)) => {
                d.iter_mut().enumerate().for_each(|(k, v)| {
                    let local = (k >> a & 1) | (k >> b & 1) << 1;
                    *v *= m[local][local];
                });
            }
            _ => unreachable!(),
        }
    }
    d
}

fn build_segments(n: usize, ops: &[Op]) -> (Vec<Segment>, Vec<(Vec<Gate>, Vec<C64>)>) {
    let mut segments = Vec::new();
    let mut diagonals: Vec<(Vec<Gate>, Vec<C64>)> = Vec::new();
    let mut i = 0;
    while i < ops.len() {
        let mut j = i;
        while j < ops.len() && is_diagonal_op(&ops[j]) {
            j += 1;
        }
        if j - i >= 2 {
            let gates: Vec<Gate> = ops[i..j]
                .iter()
                .map(|op| match op {
                    Op::Gate(g) => *g,
                    Op::Snapshot => unreachable!(),
                })
                .collect();
            let diag = match diagonals.iter().position(|(g, _)| *g == gates) {
                Some(k) => k,
                None => {
                    let d = fused_diagonal(n, &gates);
                    diagonals.push((gates, d));
                    diagonals.len() - 1
                }
            };
            segments.push(Segment::DiagRun { start: i, end: j, diag });
            i = j;
        } else {
            segments.push(Segment::Single(i));
            i += 1;
        }
    }
    (segments, diagonals)
}

impl<'a> Plan<'a> {
    fn new(n: usize, ops: &'a [Op], spec: &'a NoiseSpec, device: &DeviceProfile, prep_p: f64) -> Result<Self> {
        spec.validate()?;
        check_p(prep_p)?;
        if device.n_qubits() < n {
            return Err(Error::DimensionMismatch { expected: n, got: device.n_qubits() });
        }
        let probs = |q: usize, ns: f64| thermal_probs(ns * 1e-9, device.t1_us[q] * 1e-6, device.t2_us[q] * 1e-6);
        let mut gate_thermal = Vec::with_capacity(ops.len());
        for op in ops {
            let mut per = Vec::new();
            if let Op::Gate(g) = op {
                g.validate(n)?;
                if spec.relaxation {
                    for q in g.targets().to_vec() {
                        per.push((q, probs(q, spec.duration_ns(g))?));
                    }
                }
            }
            gate_thermal.push(per);
        }
        let meas_thermal = if spec.relaxation {
            (0..n).map(|q| probs(q, spec.dur_meas_ns)).collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let (segments, diagonals) = build_segments(n, ops);
        Ok(Self { n, ops, spec, gate_thermal, meas_thermal, prep_p, segments, diagonals })
    }

    fn draw_events(&self, i: usize, rng: &mut ChaCha8Rng, out: &mut Vec<Event>) {
        let Op::Gate(g) = &self.ops[i] else { return };
        for &(q, p) in &self.gate_thermal[i] {
            draw_thermal(q, p, rng, out);
        }
        draw_depolarizing(g.targets(), self.depol_p(g), rng, out);
    }

    fn depol_p(&self, g: &Gate) -> f64 {
        if g.arity() == 2 {
            self.spec.depol_2q_p
        } else {
            self.spec.depol_1q_p
        }
    }
}

fn z_features_of(n: usize, probs: &[f64]) -> Vec<f64> {
    z_features_from_probs(n, probs)
}

fn run_channel(plan: &Plan, init: usize, mode: MeasurementMode, seed: u64) -> Result<NoisyOutput> {
    let n = plan.n;
    if n > CHANNEL_MAX_QUBITS {
        return Err(Error::TooManyQubits { what: "channel backend", n, max: CHANNEL_MAX_QUBITS });
    }
    let mut rho = DensityMatrix::from_pure(&StateVector::basis(n, init)?)?;
    for q in 0..n {
        prep_flip_channel(&mut rho, q, plan.prep_p)?;
    }
    let mut features = Vec::new();
    let mut snap = 0u64;
    for (op, thermal) in plan.ops.iter().zip(&plan.gate_thermal) {
        match op {
            Op::Gate(g) => {
                rho.apply_gate(g)?;
                for &(q, p) in thermal {
                    thermal_unchecked(&mut rho, q, p);
                }
                let targets = g.targets().to_vec();
                depolarize_unchecked(&mut rho, &targets, plan.depol_p(g));
            }
            Op::Snapshot => {
                let mut probe = rho.clone();
                for (q, &p) in plan.meas_thermal.iter().enumerate() {
                    thermal_unchecked(&mut probe, q, p);
                }
                let probs = probe.probabilities();
                features.extend(readout(n, &probs, mode, derive_seed(seed, &[0x5407, snap])));
                snap += 1;
            }
        }
    }
    Ok(NoisyOutput { features, stderr: None })
}

fn readout(n: usize, probs: &[f64], mode: MeasurementMode, seed: u64) -> Vec<f64> {
    match mode {
        MeasurementMode::Exact => z_features_of(n, probs),
        MeasurementMode::Shots(shots) => {
            // Same stream as `StateVector::sample_bitstrings`.
            let mut rng = rng_for(seed, &[0x5a17]);
            sample_from_probs(n, probs, shots, &mut rng).z_features()
        }
    }
}

/// Per-snapshot probability vectors of one trajectory.
fn one_trajectory(plan: &Plan, init: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = plan.n;
    let mut rng = rng_for(seed, &[]);
    let mut psi = StateVector::basis(n, init)?;
    for q in 0..n {
        if plan.prep_p > 0.0 && rng.random::<f64>() < plan.prep_p {
            psi.apply_gate_unchecked(&Gate::x(q));
        }
    }
    let mut snaps = Vec::new();
    let mut events: Vec<Event> = Vec::new();
    // (op index, first event, end event) for a run being drawn.
    let mut spans: Vec<(usize, usize, usize)> = Vec::new();
    let run_gate = |psi: &mut StateVector, i: usize, evs: &[Event], rng: &mut ChaCha8Rng| {
        if let Op::Gate(g) = &plan.ops[i] {
            psi.apply_gate_unchecked(g);
        }
        for &e in evs {
            apply_event(psi, e, rng);
        }
    };
    for seg in &plan.segments {
        match *seg {
            Segment::DiagRun { start, end, diag } => {
                events.clear();
                spans.clear();
                for i in start..end {
                    let from = events.len();
                    plan.draw_events(i, &mut rng, &mut events);
                    spans.push((i, from, events.len()));
                }
                if events.is_empty() {
                    psi.apply_diagonal(&plan.diagonals[diag].1);
                } else {
                    for &(i, from, to) in &spans {
                        run_gate(&mut psi, i, &events[from..to], &mut rng);
                    }
                }
            }
            Segment::Single(i) => match &plan.ops[i] {
                Op::Gate(_) => {
                    events.clear();
                    plan.draw_events(i, &mut rng, &mut events);
                    run_gate(&mut psi, i, &events, &mut rng);
                }
                Op::Snapshot => {
                    let probs = if plan.meas_thermal.is_empty() {
                        psi.probabilities()
                    } else {
                        let mut probe = psi.clone();
                        let mut delay = Vec::new();
                        for (q, &p) in plan.meas_thermal.iter().enumerate() {
                            draw_thermal(q, p, &mut rng, &mut delay);
                        }
                        for e in delay {
                            apply_event(&mut probe, e, &mut rng);
                        }
                        probe.probabilities()
                    };
                    snaps.push(probs);
                }
            },
        }
    }
    Ok(snaps)
}

/// Features of the trajectory-averaged state. Features are linear in the
/// probabilities, so averaging probabilities first gives the same means;
/// per-trajectory features are formed only when `want_stderr`.
fn run_trajectories(
    plan: &Plan,
    init: usize,
    k: usize,
    mode: MeasurementMode,
    seed: u64,
    want_stderr: bool,
) -> Result<NoisyOutput> {
    if k == 0 {
        return Err(invalid("trajectory count must be positive"));
    }
    let n = plan.n;
    let runs: Vec<(Vec<Vec<f64>>, Option<Vec<f64>>)> = (0..k)
        .into_par_iter()
        .map(|j| {
            let snaps = one_trajectory(plan, init, derive_seed(seed, &[0x7a1, j as u64]))?;
            let feats = want_stderr.then(|| snaps.iter().flat_map(|p| z_features_of(n, p)).collect());
            Ok((snaps, feats))
        })
        .collect::<Result<_>>()?;
    // Reduced in trajectory order so the sums do not depend on scheduling.
    let kf = k as f64;
    let mut prob_sum: Vec<Vec<f64>> = runs[0].0.iter().map(|s| vec![0.0; s.len()]).collect();
    for (snaps, _) in &runs {
        for (acc, s) in prob_sum.iter_mut().zip(snaps) {
            acc.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        }
    }
    let stderr = want_stderr.then(|| {
        let width = runs[0].1.as_ref().map_or(0, Vec::len);
        let mut sum = vec![0.0; width];
        let mut sum_sq = vec![0.0; width];
        for f in runs.iter().filter_map(|(_, f)| f.as_ref()) {
            for (i, v) in f.iter().enumerate() {
                sum[i] += v;
                sum_sq[i] += v * v;
            }
        }
        sum.iter()
            .zip(&sum_sq)
            .map(|(s, sq)| {
                let m = s / kf;
                if k > 1 {
                    ((sq / kf - m * m).max(0.0) / (kf - 1.0)).sqrt()
                } else {
                    f64::NAN
                }
            })
            .collect()
    });
    let features = prob_sum
        .iter()
        .enumerate()
        .flat_map(|(s, acc)| {
            let probs: Vec<f64> = acc.iter().map(|a| a / kf).collect();
            readout(n, &probs, mode, derive_seed(seed, &[0x5407, s as u64]))
        })
        .collect();
    Ok(NoisyOutput { features, stderr })
}

fn ideal_run(n: usize, ops: &[Op], init: usize, mode: MeasurementMode, seed: u64) -> Result<NoisyOutput> {
    let mut psi = StateVector::basis(n, init)?;
    let mut features = Vec::new();
    let mut snap = 0u64;
    for op in ops {
        match op {
            Op::Gate(g) => psi.apply_gate(g)?,
            Op::Snapshot => {
                features.extend(readout(n, &psi.probabilities(), mode, derive_seed(seed, &[0x5407, snap])));
                snap += 1;
            }
        }
    }
    Ok(NoisyOutput { features, stderr: None })
}

/// Runs `ops` from basis state `init`: preparation flips first, then after
/// every gate relaxation on its qubits for its duration followed by
/// depolarizing of its arity. Snapshots see a relaxation-only measurement
/// delay applied to a copy. An ideal spec takes the noiseless path.
pub fn noisy_execute(
    ops: &[Op],
    n: usize,
    init: usize,
    spec: &NoiseSpec,
    device: &DeviceProfile,
    backend: NoiseBackend,
    mode: MeasurementMode,
    seed: u64,
) -> Result<NoisyOutput> {
    spec.validate()?;
    if spec.is_ideal() {
        return ideal_run(n, ops, init, mode, seed);
    }
    let plan = Plan::new(n, ops, spec, device, spec.prep_flip_p1)?;
    match backend {
        NoiseBackend::Channel => run_channel(&plan, init, mode, seed),
        NoiseBackend::Trajectories(k) => run_trajectories(&plan, init, k, mode, seed, true),
    }
}

/// `ZZ(θ) = CNOT · RZ_b(θ) · CNOT`.
pub fn decompose_zz(gate: &Gate) -> Vec<Gate> {
    match *gate {
        Gate::Zz { a, b, theta } => vec![Gate::cnot(a, b), Gate::rz(b, theta), Gate::cnot(a, b)],
        g => vec![g],
    }
}

/// Encoding layer followed by `cfg.cycles` Floquet periods with a snapshot
/// every `cfg.cycles_per_snapshot()` periods.
pub fn reservoir_program(
    x: &[f64],
    scheme: &EncodingScheme,
    params: &FloquetParams,
    cfg: &ReservoirConfig,
    spec: &NoiseSpec,
) -> Result<Vec<Op>> {
    cfg.validate()?;
    let mut cycle = build_cycle(params);
    if spec.decompose_zz {
        cycle = cycle.iter().flat_map(decompose_zz).collect();
    }
    let mut ops: Vec<Op> = scheme.gates(x, params.n)?.into_iter().map(Op::Gate).collect();
    for _ in 0..cfg.snapshots {
        for _ in 0..cfg.cycles_per_snapshot() {
            ops.extend(cycle.iter().copied().map(Op::Gate));
        }
        ops.push(Op::Snapshot);
    }
    Ok(ops)
}

/// Two independent flip chances combine to `a + b - 2ab`.
fn combined_prep(scheme: &EncodingScheme, spec: &NoiseSpec) -> f64 {
    let a = if scheme.kind == EncodingKind::FullAngle { scheme.prep_flip_p1 } else { 0.0 };
    let b = spec.prep_flip_p1;
    a + b - 2.0 * a * b
}

/// Noisy counterpart of `floquet::extract_features`. The ideal spec
/// reproduces it exactly; otherwise the scheme's preparation flip is merged
/// into the spec's.
#[allow(clippy::too_many_arguments)]
pub fn noisy_features(
    x: &[f64],
    scheme: &EncodingScheme,
    params: &FloquetParams,
    cfg: &ReservoirConfig,
    spec: &NoiseSpec,
    device: &DeviceProfile,
    backend: NoiseBackend,
    seed: u64,
) -> Result<Vec<f64>> {
    if spec.is_ideal() {
        return extract_features(x, scheme, params, cfg, seed);
    }
    let ops = reservoir_program(x, scheme, params, cfg, spec)?;
    let plan = Plan::new(params.n, &ops, spec, device, combined_prep(scheme, spec))?;
    let out = match backend {
        NoiseBackend::Channel => run_channel(&plan, 0, cfg.mode, seed)?,
        NoiseBackend::Trajectories(k) => run_trajectories(&plan, 0, k, cfg.mode, seed, false)?,
    };
    Ok(out.features)
}

/// Row `i` uses seed `derive_seed(seed, [i])`; rows run in parallel. The
/// device profile is drawn once from `spec.seed`.
pub fn noisy_feature_matrix(
    inputs: &DMatrix<f64>,
    scheme: &EncodingScheme,
    params: &FloquetParams,
    cfg: &ReservoirConfig,
    spec: &NoiseSpec,
    backend: NoiseBackend,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if spec.is_ideal() {
        return crate::floquet::feature_matrix(inputs, scheme, params, cfg, seed);
    }
    let device = DeviceProfile::sample(params.n, spec)?;
    let rows: Vec<Vec<f64>> = (0..inputs.nrows())
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = inputs.row(i).iter().copied().collect();
            noisy_features(&x, scheme, params, cfg, spec, &device, backend, derive_seed(seed, &[i as u64]))
        })
        .collect::<Result<_>>()?;
    let cols = cfg.feature_dim(params.n);
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}
