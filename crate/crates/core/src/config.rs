//! Run configuration: one TOML file with a section per command, unknown
//! keys rejected, every field defaulted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::capacity::{CapacitySettings, PhaseScanSettings};
use crate::error::{Error, Result};
use crate::floquet::{EncodingKind, EncodingScheme, MeasurementMode, ReservoirConfig, StepOrder};
use crate::kernel::{KernelGrid, QuantumKernelMode, RelabelRule};
use crate::learn::{MlpConfig, SoftmaxConfig};
use crate::noise::NoiseSpec;

/// Prefix of the environment variables that override config values.
pub const ENV_PREFIX: &str = "DTCQRC_";

/// How reservoir expectations are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Noiseless, exact expectations.
    #[default]
    Exact,
    /// Noiseless, estimated from `run.shots` bitstrings per snapshot.
    Shots,
    /// Noisy, exact density-matrix channels.
    Channel,
    /// Noisy, averaged over `run.trajectories` sampled trajectories.
    Traj,
}

impl Backend {
    pub fn is_noisy(self) -> bool {
        matches!(self, Backend::Channel | Backend::Traj)
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Shots => "shots",
            Backend::Channel => "channel",
            Backend::Traj => "traj",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub backend: Backend,
    pub shots: usize,
    pub trajectories: usize,
    pub out: PathBuf,
    /// Reuse feature matrices across runs (stored under `out/cache`).
    pub cache: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            backend: Backend::Exact,
            shots: 1024,
            trajectories: 100,
            out: "out".into(),
            cache: true,
        }
    }
}

/// Encoding and evolution shared by the image commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReservoirSection {
    pub cycles: usize,
    pub snapshots: usize,
    pub encoding: EncodingKind,
    /// Encoding-level preparation flip (full-angle encoding only).
    pub prep_flip_p1: f64,
}

impl Default for ReservoirSection {
    fn default() -> Self {
        Self { cycles: 12, snapshots: 4, encoding: EncodingKind::DenseAngle, prep_flip_p1: 0.0 }
    }
}

impl ReservoirSection {
    pub fn scheme(&self) -> EncodingScheme {
        EncodingScheme { kind: self.encoding, prep_flip_p1: self.prep_flip_p1 }
    }

    pub fn reservoir(&self, mode: MeasurementMode) -> ReservoirConfig {
        ReservoirConfig { cycles: self.cycles, snapshots: self.snapshots, mode }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Directory holding the four standard MNIST IDX files.
    pub mnist_dir: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { mnist_dir: "data/mnist".into() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutKind {
    /// Softmax (logistic) regression.
    #[default]
    Slr,
    Mlp1,
    Mlp2,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutConfig {
    pub kind: ReadoutKind,
    pub softmax: SoftmaxConfig,
    pub mlp: MlpConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacitiesConfig {
    pub n: usize,
    pub g_grid: Vec<f64>,
    pub seeds: usize,
    /// `stm_dK`, `parity_dK`, `narma10` or `otoc`.
    pub tasks: Vec<String>,
    pub length: usize,
    pub washout: usize,
    pub train_fraction: f64,
    pub ridge: f64,
    pub narma_scale: f64,
    pub order: StepOrder,
    /// OTOC plateau window `[otoc_from, otoc_to]` in periods.
    pub otoc_from: usize,
    pub otoc_to: usize,
    pub otoc_probes: usize,
}

impl Default for CapacitiesConfig {
    fn default() -> Self {
        let s = CapacitySettings::default();
        Self {
            n: 6,
            g_grid: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95],
            seeds: 10,
            tasks: ["stm_d1", "parity_d1", "narma10", "otoc"].map(String::from).to_vec(),
            length: s.length,
            washout: s.washout,
            train_fraction: s.train_fraction,
            ridge: s.ridge,
            narma_scale: s.narma_scale,
            order: s.order,
            otoc_from: 20,
            otoc_to: 30,
            otoc_probes: 1,
        }
    }
}

impl CapacitiesConfig {
    pub fn settings(&self) -> CapacitySettings {
        CapacitySettings {
            length: self.length,
            washout: self.washout,
            train_fraction: self.train_fraction,
            ridge: self.ridge,
            narma_scale: self.narma_scale,
            order: self.order,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    pub classes: Vec<usize>,
    pub train: usize,
    pub test: usize,
    pub g_grid: Vec<f64>,
    /// Qubit counts; one table block per size.
    pub sizes: Vec<usize>,
    pub seeds: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            classes: (0..10).collect(),
            train: 1200,
            test: 200,
            g_grid: vec![0.1, 0.22, 0.5, 0.84, 0.95],
            sizes: vec![10],
            seeds: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub classes: Vec<usize>,
    pub n: usize,
    pub train: usize,
    pub test: usize,
    pub g_grid: Vec<f64>,
    pub seeds: usize,
    pub mode: QuantumKernelMode,
    pub rule: RelabelRule,
    pub grid: KernelGrid,
    /// Use the quantum Gram as the classical one (a control run).
    pub force_equal: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            classes: vec![3, 8],
            n: 12,
            train: 400,
            test: 100,
            g_grid: vec![0.5, 0.84],
            seeds: 1,
            mode: QuantumKernelMode::Linear,
            rule: RelabelRule::default(),
            grid: KernelGrid::default(),
            force_equal: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSweepConfig {
    pub classes: Vec<usize>,
    pub n: usize,
    pub g: f64,
    pub train: usize,
    pub test: usize,
    /// Two-qubit depolarizing strengths; 0 gives the ideal reference.
    pub p2_grid: Vec<f64>,
    /// `p1 = p1_ratio · p2`.
    pub p1_ratio: f64,
    pub seeds: usize,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        Self {
            classes: (0..10).collect(),
            n: 8,
            g: 0.84,
            train: 600,
            test: 100,
            p2_grid: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            p1_ratio: 0.1,
            seeds: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub run: RunConfig,
    pub reservoir: ReservoirSection,
    pub data: DataConfig,
    pub readout: ReadoutConfig,
    pub noise: NoiseSpec,
    pub capacities: CapacitiesConfig,
    pub classify: ClassifyConfig,
    pub kernel: KernelConfig,
    pub phase: PhaseScanSettings,
    pub noise_sweep: NoiseSweepConfig,
}

impl Config {
    /// Parses TOML; errors carry the line and column of the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies `DTCQRC_SEED`, `DTCQRC_THREADS`, `DTCQRC_BACKEND`,
    /// `DTCQRC_OUT` and `DTCQRC_MNIST_DIR` from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        let get = |k: &str| lookup(&format!("{ENV_PREFIX}{k}"));
        let bad = |k: &str, v: &str| Error::Config(format!("{ENV_PREFIX}{k}={v:?} is not valid"));
        if let Some(v) = get("SEED") {
            self.run.seed = v.parse().map_err(|_| bad("SEED", &v))?;
        }
        if let Some(v) = get("THREADS") {
            self.run.threads = v.parse().map_err(|_| bad("THREADS", &v))?;
        }
        if let Some(v) = get("BACKEND") {
            self.run.backend = <Backend as clap::ValueEnum>::from_str(&v, true).map_err(|_| bad("BACKEND", &v))?;
        }
        if let Some(v) = get("OUT") {
            self.run.out = v.into();
        }
        if let Some(v) = get("MNIST_DIR") {
            self.data.mnist_dir = v.into();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let mut c = Config::default();
        c.run.seed = 17;
        c.noise = NoiseSpec::depolarizing(0.001, 0.02);
        c.kernel.mode = QuantumKernelMode::Rbf { gamma: 0.25 };
        let text = c.to_toml().unwrap();
        assert_eq!(Config::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = Config::from_toml("[run]\nseed = 1\n\n[capacities]\nseedz = 3\n").unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
        assert!(err.contains("seedz"), "{err}");
    }

    #[test]
    fn env_overrides() {
        let mut c = Config::default();
        let env = |k: &str| match k {
            "DTCQRC_SEED" => Some("9".to_string()),
            "DTCQRC_BACKEND" => Some("traj".to_string()),
            _ => None,
        };
        c.apply_env(env).unwrap();
        assert_eq!((c.run.seed, c.run.backend), (9, Backend::Traj));
        assert!(c.apply_env(|k| (k == "DTCQRC_THREADS").then(|| "many".to_string())).is_err());
    }
}
