//! Memory, nonlinearity and scrambling benchmarks of the Floquet reservoir,
//! and the spin-glass order parameter used to locate its phases.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::floquet::{sample_params, timeseries_run_ordered, CompiledCycle, FloquetParams, StepOrder};
use crate::learn::ridge_fit;
use crate::qstate::{Gate, StateVector};
use crate::rng::{derive_seed, rng_for};

/// `y*_k = s_{k-δ}`; `None` for the first `δ` entries.
pub fn stm_target(s: &[f64], delta: usize) -> Result<Vec<Option<f64>>> {
    if delta == 0 {
        return Err(invalid("short-term memory delay must be at least 1"));
    }
    if delta >= s.len() {
        return Err(invalid(format!("delay {delta} leaves no targets in a length-{} sequence", s.len())));
    }
    Ok((0..s.len()).map(|k| k.checked_sub(delta).map(|j| s[j])).collect())
}

/// `y*_k = (s_k + … + s_{k-δ}) mod 2` on binary input; `None` for `k < δ`.
pub fn parity_target(s: &[f64], delta: usize) -> Result<Vec<Option<f64>>> {
    if delta >= s.len() {
        return Err(invalid(format!("delay {delta} leaves no targets in a length-{} sequence", s.len())));
    }
    if let Some(v) = s.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(invalid(format!("parity input {v} is not binary")));
    }
    Ok((0..s.len())
        .map(|k| {
            (k >= delta).then(|| {
                let ones = s[k - delta..=k].iter().filter(|&&v| v == 1.0).count();
                (ones % 2) as f64
            })
        })
        .collect())
}

/// Tenth-order NARMA response; `y_k = 0` for `k < 10`.
pub fn narma10(s: &[f64]) -> Result<Vec<f64>> {
    if s.len() < 11 {
        return Err(invalid("NARMA10 needs at least 11 input steps"));
    }
    let mut y = vec![0.0; s.len()];
    for k in 10..s.len() {
        let window: f64 = y[k - 10..k].iter().sum();
        y[k] = 0.3 * y[k - 1] + 0.05 * y[k - 1] * window + 1.5 * s[k - 10] * s[k - 1] + 0.1;
    }
    Ok(y)
}

/// Pearson correlation `cov(y, y*) / (σ(y) σ(y*))`. Zero variance in either
/// argument is reported as `Error::ZeroVariance`.
pub fn normalized_covariance(y: &[f64], y_star: &[f64]) -> Result<f64> {
    if y.len() != y_star.len() {
        return Err(Error::DimensionMismatch { expected: y_star.len(), got: y.len() });
    }
    if y.len() < 2 {
        return Err(invalid("normalized covariance needs at least two points"));
    }
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let ms = y_star.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(y_star) {
        let (da, db) = (a - my, b - ms);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let scale_y = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let scale_s = y_star.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let tiny = n * (1e-15_f64).powi(2);
    if sxx <= tiny * scale_y * scale_y || syy <= tiny * scale_s * scale_s {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityTask {
    Stm(usize),
    Parity(usize),
    Narma10,
}

impl CapacityTask {
    pub fn name(&self) -> String {
        match self {
            CapacityTask::Stm(d) => format!("stm_d{d}"),
            CapacityTask::Parity(d) => format!("parity_d{d}"),
            CapacityTask::Narma10 => "narma10".into(),
        }
    }
}

impl std::str::FromStr for CapacityTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if lower == "narma10" {
            return Ok(CapacityTask::Narma10);
        }
        let parse = |rest: &str| {
            rest.trim_start_matches("_d").trim_start_matches(['(', 'd']).trim_end_matches(')').parse::<usize>()
        };
        if let Some(rest) = lower.strip_prefix("stm") {
            return parse(rest).map(CapacityTask::Stm).map_err(|_| invalid(format!("bad task {s:?}")));
        }
        if let Some(rest) = lower.strip_prefix("parity") {
            return parse(rest).map(CapacityTask::Parity).map_err(|_| invalid(format!("bad task {s:?}")));
        }
        Err(invalid(format!("unknown capacity task {s:?}")))
    }
}

/// Time-series protocol settings shared by all capacity tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacitySettings {
    pub length: usize,
    pub washout: usize,
    /// Leading fraction of the series used for fitting; the rest is test.
    pub train_fraction: f64,
    pub ridge: f64,
    /// The NARMA10 recurrence is driven by `narma_scale * s` so that it stays
    /// bounded on binary input; the reservoir always sees `s` itself.
    pub narma_scale: f64,
    pub order: StepOrder,
}

impl Default for CapacitySettings {
    fn default() -> Self {
        Self {
            length: 1000,
            washout: 50,
            train_fraction: 0.9,
            ridge: 1e-6,
            narma_scale: 0.2,
            order: StepOrder::default(),
        }
    }
}

impl CapacitySettings {
    fn validate(&self) -> Result<()> {
        if !(0.0 < self.train_fraction && self.train_fraction < 1.0) {
            return Err(invalid("train_fraction must be in (0, 1)"));
        }
        let split = self.split();
        if self.washout + 2 > split || self.length < split + 2 {
            return Err(invalid(format!(
                "length {} with washout {} leaves too few train or test steps",
                self.length, self.washout
            )));
        }
        Ok(())
    }

    fn split(&self) -> usize {
        (self.train_fraction * self.length as f64).round() as usize
    }
}

pub fn binary_input(length: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, &[0x1a9u64]);
    (0..length).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect()
}

fn task_targets(task: CapacityTask, s: &[f64], settings: &CapacitySettings) -> Result<Vec<Option<f64>>> {
    match task {
        CapacityTask::Stm(d) => stm_target(s, d),
        CapacityTask::Parity(d) => parity_target(s, d),
        CapacityTask::Narma10 => {
            let scaled: Vec<f64> = s.iter().map(|v| v * settings.narma_scale).collect();
            let y = narma10(&scaled)?;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Singular("NARMA10 recurrence diverged".into()));
            }
            Ok(y.into_iter().enumerate().map(|(k, v)| (k >= 10).then_some(v)).collect())
        }
    }
}

/// Fits a ridge readout on the train window of `features` and returns the
/// capacity on the test window.
pub fn readout_capacity(features: &DMatrix<f64>, targets: &[Option<f64>], settings: &CapacitySettings) -> Result<f64> {
    if features.nrows() != targets.len() {
        return Err(Error::DimensionMismatch { expected: features.nrows(), got: targets.len() });
    }
    let split = settings.split();
    let train: Vec<usize> = (settings.washout..split).filter(|&k| targets[k].is_some()).collect();
    let test: Vec<usize> = (split..targets.len()).filter(|&k| targets[k].is_some()).collect();
    if train.len() < 2 || test.len() < 2 {
        return Err(invalid("too few valid targets in the train or test window"));
    }
    let y_train: Vec<f64> = train.iter().map(|&k| targets[k].unwrap()).collect();
    let model = ridge_fit(
        &features.select_rows(&train),
        &DMatrix::from_column_slice(train.len(), 1, &y_train),
        settings.ridge,
    )?;
    let pred = model.predict_values(&features.select_rows(&test))?;
    let y_test: Vec<f64> = test.iter().map(|&k| targets[k].unwrap()).collect();
    if normalized_covariance(&y_test, &y_test).is_err() {
        return Err(Error::ZeroVariance);
    }
    // A readout with constant output carries no information about the target.
    match normalized_covariance(pred.column(0).as_slice(), &y_test) {
        Err(Error::ZeroVariance) => Ok(0.0),
        other => other,
    }
}

/// Runs one input sequence through the reservoir and scores each task on it.
pub fn run_capacity_tasks(
    tasks: &[CapacityTask],
    params: &FloquetParams,
    settings: &CapacitySettings,
    seed: u64,
) -> Result<Vec<f64>> {
    settings.validate()?;
    let s = binary_input(settings.length, seed);
    let features = timeseries_run_ordered(&s, params, settings.order)?;
    tasks.iter().map(|&task| readout_capacity(&features, &task_targets(task, &s, settings)?, settings)).collect()
}

pub fn run_capacity_task(
    task: CapacityTask,
    params: &FloquetParams,
    settings: &CapacitySettings,
    seed: u64,
) -> Result<f64> {
    Ok(run_capacity_tasks(&[task], params, settings, seed)?[0])
}

/// `n`-qubit computational-basis probe states for the scrambling average.
pub fn random_basis_probes(n: usize, count: usize, seed: u64) -> Result<Vec<StateVector>> {
    let mut rng = rng_for(seed, &[0x07c]);
    (0..count).map(|_| StateVector::basis(n, rng.random_range(0..1usize << n))).collect()
}

/// `1 - Re⟨X_1(t) X_i X_1(t) X_i⟩` averaged over `i ≠ 1`, where qubit 0
/// plays the role of the first site. Evaluated with forward and backward
/// pushes of the probe state.
pub fn otoc_scrambling(params: &FloquetParams, t: usize, probe: &StateVector) -> Result<f64> {
    let n = params.n;
    if n < 2 {
        return Err(invalid("OTOC needs at least two qubits"));
    }
    if probe.n_qubits() != n {
        return Err(Error::DimensionMismatch { expected: n, got: probe.n_qubits() });
    }
    let cycle = CompiledCycle::new(params);
    let x1 = Gate::x(0);
    let mut total = 0.0;
    for i in 1..n {
        let xi = Gate::x(i);
        let mut phi = probe.clone();
        phi.apply_gate_unchecked(&xi);
        for round in 0..2 {
            (0..t).for_each(|_| cycle.apply(&mut phi));
            phi.apply_gate_unchecked(&x1);
            (0..t).for_each(|_| cycle.apply_inverse(&mut phi));
            if round == 0 {
                phi.apply_gate_unchecked(&xi);
            }
        }
        total += probe.inner(&phi).re;
    }
    Ok(1.0 - total / (n - 1) as f64)
}

/// `C_in(t)` for `t = 0..=t_max`.
pub fn otoc_curve(params: &FloquetParams, t_max: usize, probe: &StateVector) -> Result<Vec<f64>> {
    (0..=t_max).map(|t| otoc_scrambling(params, t, probe)).collect()
}

/// Mean of `C_in(t)` over `t ∈ [t_from, t_to]`, averaged over the probes.
pub fn otoc_plateau(params: &FloquetParams, t_from: usize, t_to: usize, probes: &[StateVector]) -> Result<f64> {
    if t_to < t_from || probes.is_empty() {
        return Err(invalid("empty OTOC plateau window or probe set"));
    }
    let mut acc = 0.0;
    for p in probes {
        for t in t_from..=t_to {
            acc += otoc_scrambling(params, t, p)?;
        }
    }
    Ok(acc / (probes.len() * (t_to - t_from + 1)) as f64)
}

/// Edwards–Anderson order `(1/L) Σ_{i≠j} ⟨Z_i Z_j⟩²` over ordered pairs, on
/// `initial` evolved for `t` cycles.
pub fn spin_glass_chi(params: &FloquetParams, initial: &StateVector, t: usize) -> Result<f64> {
    if initial.n_qubits() != params.n {
        return Err(Error::DimensionMismatch { expected: params.n, got: initial.n_qubits() });
    }
    let cycle = CompiledCycle::new(params);
    let mut psi = initial.clone();
    (0..t).for_each(|_| cycle.apply(&mut psi));
    Ok(chi_of_state(&psi))
}

pub(crate) fn chi_of_state(psi: &StateVector) -> f64 {
    let n = psi.n_qubits();
    let probs = psi.probabilities();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let mask = (1usize << i) | (1usize << j);
            let zz: f64 =
                probs.iter().enumerate().map(|(b, p)| if (b & mask).count_ones() % 2 == 0 { *p } else { -*p }).sum();
            sum += 2.0 * zz * zz;
        }
    }
    sum / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseScanSettings {
    pub g_grid: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Disorder realizations per (g, L); each uses its own random basis state.
    pub samples: usize,
    pub t: usize,
    pub seed: u64,
}

impl Default for PhaseScanSettings {
    fn default() -> Self {
        Self { g_grid: (0..=50).map(|i| i as f64 / 50.0).collect(), sizes: vec![6, 8, 10], samples: 20, t: 20, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub g: f64,
    pub l: usize,
    pub mean_chi: f64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub l_small: usize,
    pub l_large: usize,
    pub g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    pub rows: Vec<PhaseRow>,
    pub crossings: Vec<Crossing>,
}

impl PhaseTable {
    pub fn curve(&self, l: usize) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.l == l).map(|r| (r.g, r.mean_chi)).collect()
    }

    pub fn crossings_in(&self, lo: f64, hi: f64) -> Vec<Crossing> {
        self.crossings.iter().copied().filter(|c| c.g > lo && c.g < hi).collect()
    }
}

/// Strict sign changes of `b - a` between neighbouring grid points, located
/// by linear interpolation. Both curves must share the same grid.
pub fn curve_crossings(grid: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    (0..grid.len().saturating_sub(1))
        .filter(|&k| d[k] * d[k + 1] < 0.0)
        .map(|k| grid[k] + (grid[k + 1] - grid[k]) * d[k] / (d[k] - d[k + 1]))
        .collect()
}

/// Disorder and initial state depend on `(seed, L, sample)` only, so every
/// g value sees the same realizations.
pub fn phase_scan(settings: &PhaseScanSettings) -> Result<PhaseTable> {
    if settings.sizes.len() < 2 {
        return Err(invalid("phase scan needs at least two sizes"));
    }
    if settings.samples == 0 || settings.g_grid.is_empty() {
        return Err(invalid("phase scan needs samples and a g grid"));
    }
    if let Some(&l) = settings.sizes.iter().find(|&&l| !(2..=crate::qstate::StateVector::MAX_QUBITS).contains(&l)) {
        return Err(invalid(format!("unsupported chain length {l}")));
    }
    let jobs: Vec<(usize, usize)> =
        (0..settings.g_grid.len()).flat_map(|gi| settings.sizes.iter().map(move |&l| (gi, l))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(gi, l)| {
            let g = settings.g_grid[gi];
            let values = (0..settings.samples)
                .map(|k| {
                    let sample_seed = derive_seed(settings.seed, &[l as u64, k as u64]);
                    let params = sample_params(l, g, sample_seed)?;
                    let start = rng_for(sample_seed, &[0xba5e]).random_range(0..1usize << l);
                    spin_glass_chi(&params, &StateVector::basis(l, start)?, settings.t)
                })
                .collect::<Result<Vec<f64>>>()?;
            let m = values.len() as f64;
            let mean = values.iter().sum::<f64>() / m;
            let var =
                if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
            Ok(PhaseRow { g, l, mean_chi: mean, stderr: (var / m).sqrt(), samples: values.len() })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sorted = settings.sizes.clone();
    sorted.sort_unstable();
    let mut crossings = Vec::new();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let a: Vec<f64> = rows.iter().filter(|r| r.l == w[0]).map(|r| r.mean_chi).collect();
        let b: Vec<f64> = rows.iter().filter(|r| r.l == w[1]).map(|r| r.mean_chi).collect();
        for g in curve_crossings(&settings.g_grid, &a, &b) {
            crossings.push(Crossing { l_small: w[0], l_large: w[1], g });
        }
    }
    Ok(PhaseTable { rows, crossings })
}

/// Long-format result row `g,L,seed,metric,value`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub g: f64,
    pub l: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    pub const CSV_HEADER: &'static str = "g,L,seed,metric,value";

    pub fn to_csv(&self) -> String {
        format!("{:.4},{},{},{},{:.4}", self.g, self.l, self.seed, self.metric, self.value)
    }
}
