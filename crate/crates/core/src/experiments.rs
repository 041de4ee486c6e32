//! End-to-end experiment drivers behind the command-line front end. Each
//! command is a pure function of its config: same config and seed, same
//! bytes out.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::capacity::{
    otoc_plateau, phase_scan, random_basis_probes, run_capacity_tasks, CapacityTask, MetricRow, PhaseTable,
};
use crate::config::{Backend, ClassifyConfig, Config, KernelConfig, ReadoutKind};
use crate::error::{invalid, Error, Result};
use crate::floquet::{feature_matrix, sample_params, EncodingScheme, FloquetParams, MeasurementMode, ReservoirConfig};
use crate::kernel::{kernel_advantage_grams, quantum_gram, rbf_gram, GramMatrix, KernelAdvantage, Split};
use crate::learn::{
    accuracy, mlp_train, pca_fit, read_idx_images, read_idx_labels, softmax_train, stratified_indices, AngleScaler,
    IdxImages, MlpArchitecture, MnistFiles, Standardizer,
};
use crate::noise::{noisy_feature_matrix, NoiseBackend, NoiseSpec};
use crate::rng::derive_seed;

/// How the reservoir is simulated for one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Simulator {
    pub backend: Backend,
    pub shots: usize,
    pub trajectories: usize,
    pub noise: NoiseSpec,
}

impl Simulator {
    pub fn ideal() -> Self {
        Self { backend: Backend::Exact, shots: 0, trajectories: 0, noise: NoiseSpec::ideal() }
    }

    pub fn from_config(cfg: &Config) -> Self {
        Self {
            backend: cfg.run.backend,
            shots: cfg.run.shots,
            trajectories: cfg.run.trajectories,
            noise: cfg.noise.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if !self.backend.is_noisy() && !self.noise.is_ideal() {
            return Err(invalid(format!(
                "noise is configured but backend {:?} is noiseless; use channel or traj",
                self.backend.name()
            )));
        }
        if self.backend == Backend::Shots && self.shots == 0 {
            return Err(invalid("shots backend needs run.shots > 0"));
        }
        if self.backend == Backend::Traj && self.trajectories == 0 {
            return Err(invalid("traj backend needs run.trajectories > 0"));
        }
        Ok(())
    }

    /// Short description used in report rows; never contains a comma.
    pub fn noise_label(&self) -> String {
        let n = &self.noise;
        if n.is_ideal() {
            return "ideal".into();
        }
        let mut parts = Vec::new();
        if n.depol_1q_p > 0.0 || n.depol_2q_p > 0.0 {
            parts.push(format!("depol({}/{})", n.depol_1q_p, n.depol_2q_p));
        }
        if n.relaxation {
            parts.push("thermal".into());
        }
        if n.prep_flip_p1 > 0.0 {
            parts.push(format!("prep({})", n.prep_flip_p1));
        }
        parts.join("+")
    }

    pub fn features(
        &self,
        inputs: &DMatrix<f64>,
        scheme: &EncodingScheme,
        params: &FloquetParams,
        cycles: usize,
        snapshots: usize,
        seed: u64,
    ) -> Result<DMatrix<f64>> {
        self.validate()?;
        let mode =
            if self.backend == Backend::Shots { MeasurementMode::Shots(self.shots) } else { MeasurementMode::Exact };
        let rc = ReservoirConfig { cycles, snapshots, mode };
        match self.backend {
            Backend::Exact | Backend::Shots => feature_matrix(inputs, scheme, params, &rc, seed),
            Backend::Channel => {
                noisy_feature_matrix(inputs, scheme, params, &rc, &self.noise, NoiseBackend::Channel, seed)
            }
            Backend::Traj => noisy_feature_matrix(
                inputs,
                scheme,
                params,
                &rc,
                &self.noise,
                NoiseBackend::Trajectories(self.trajectories),
                seed,
            ),
        }
    }
}

/// Angle-scaled principal components of an MNIST subset.
#[derive(Clone, Debug)]
pub struct ImageData {
    pub train_x: DMatrix<f64>,
    pub train_y: Vec<usize>,
    pub test_x: DMatrix<f64>,
    pub test_y: Vec<usize>,
    pub n_classes: usize,
    /// Row positions in the original train and test files.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Raw MNIST train and test splits held as bytes.
pub struct Mnist {
    pub train_images: IdxImages,
    pub train_labels: Vec<u8>,
    pub test_images: IdxImages,
    pub test_labels: Vec<u8>,
}

impl Mnist {
    pub fn load(dir: &Path) -> Result<Self> {
        let files = MnistFiles::in_dir(dir);
        let missing = files.missing();
        if !missing.is_empty() {
            let names: Vec<String> = missing.iter().map(|p| p.display().to_string()).collect();
            return Err(Error::Format(format!("missing MNIST files: {}", names.join(", "))));
        }
        Ok(Self {
            train_images: read_idx_images(&files.train_images)?,
            train_labels: read_idx_labels(&files.train_labels)?,
            test_images: read_idx_images(&files.test_images)?,
            test_labels: read_idx_labels(&files.test_labels)?,
        })
    }

    /// Balanced draw of `train` and `test` images of `classes` (labels
    /// re-indexed in that order), PCA to `dims` components fitted on the
    /// training rows, then scaled onto `[0, π]` with training ranges.
    pub fn prepare(&self, classes: &[usize], train: usize, test: usize, dims: usize, seed: u64) -> Result<ImageData> {
        if classes.len() < 2 {
            return Err(invalid("need at least two classes"));
        }
        let pick = |labels: &[u8], total: usize, stream: u64| -> Result<(Vec<usize>, Vec<usize>)> {
            let pool: Vec<usize> = (0..labels.len()).filter(|&i| classes.contains(&usize::from(labels[i]))).collect();
            let local: Vec<usize> = pool
                .iter()
                .map(|&i| classes.iter().position(|&c| c == usize::from(labels[i])).expect("filtered"))
                .collect();
            let mut chosen = stratified_indices(&local, classes.len(), total, derive_seed(seed, &[stream]))?;
            chosen.sort_unstable();
            Ok((chosen.iter().map(|&k| pool[k]).collect(), chosen.iter().map(|&k| local[k]).collect()))
        };
        let (train_rows, train_y) = pick(&self.train_labels, train, 0x7a11)?;
        let (test_rows, test_y) = pick(&self.test_labels, test, 0x7e57)?;
        let pixels = |img: &IdxImages, rows: &[usize]| {
            DMatrix::from_fn(rows.len(), img.pixel_dim(), |r, c| f64::from(img.image(rows[r])[c]) / 255.0)
        };
        let raw_train = pixels(&self.train_images, &train_rows);
        let raw_test = pixels(&self.test_images, &test_rows);
        let pca = pca_fit(&raw_train, dims)?;
        let pc_train = pca.transform(&raw_train)?;
        let pc_test = pca.transform(&raw_test)?;
        let scaler = AngleScaler::fit_angles(&pc_train)?;
        Ok(ImageData {
            train_x: scaler.transform(&pc_train)?,
            train_y,
            test_x: scaler.transform(&pc_test)?,
            test_y,
            n_classes: classes.len(),
            train_rows,
            test_rows,
        })
    }
}

/// Train and test accuracy of a readout fitted on standardized features.
pub fn readout_accuracy(
    kind: ReadoutKind,
    cfg: &crate::config::ReadoutConfig,
    train: &DMatrix<f64>,
    train_y: &[usize],
    test: &DMatrix<f64>,
    test_y: &[usize],
    n_classes: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let st = Standardizer::fit(train)?;
    let (xtr, xte) = (st.transform(train)?, st.transform(test)?);
    match kind {
        ReadoutKind::Slr => {
            let sc = crate::learn::SoftmaxConfig { seed, ..cfg.softmax.clone() };
            let m = softmax_train(&xtr, train_y, n_classes, &sc)?;
            Ok((accuracy(&m, &xtr, train_y)?, accuracy(&m, &xte, test_y)?))
        }
        ReadoutKind::Mlp1 | ReadoutKind::Mlp2 => {
            let arch = if kind == ReadoutKind::Mlp1 { MlpArchitecture::mlp1() } else { MlpArchitecture::mlp2() };
            let mc = crate::learn::MlpConfig { seed, ..cfg.mlp.clone() };
            let m = mlp_train(&xtr, train_y, n_classes, arch, &mc)?;
            Ok((accuracy(&m, &xtr, train_y)?, accuracy(&m, &xte, test_y)?))
        }
    }
}

/// Content-addressed store of feature matrices.
pub struct FeatureCache {
    dir: Option<PathBuf>,
    /// Messages about stale or unreadable entries.
    pub warnings: std::sync::Mutex<Vec<String>>,
}

#[derive(Serialize)]
struct CacheKey<'a> {
    version: u32,
    inputs_sha256: String,
    scheme: &'a EncodingScheme,
    params: &'a FloquetParams,
    cycles: usize,
    snapshots: usize,
    simulator: &'a Simulator,
    seed: u64,
}

fn matrix_digest(m: &DMatrix<f64>) -> String {
    let mut h = Sha256::new();
    h.update((m.nrows() as u64).to_le_bytes());
    h.update((m.ncols() as u64).to_le_bytes());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            h.update(m[(r, c)].to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

impl FeatureCache {
    pub fn disabled() -> Self {
        Self { dir: None, warnings: Default::default() }
    }

    pub fn at(dir: PathBuf) -> Self {
        Self { dir: Some(dir), warnings: Default::default() }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn features(
        &self,
        sim: &Simulator,
        inputs: &DMatrix<f64>,
        scheme: &EncodingScheme,
        params: &FloquetParams,
        cycles: usize,
        snapshots: usize,
        seed: u64,
    ) -> Result<DMatrix<f64>> {
        let Some(dir) = &self.dir else {
            return sim.features(inputs, scheme, params, cycles, snapshots, seed);
        };
        let key = CacheKey {
            version: 1,
            inputs_sha256: matrix_digest(inputs),
            scheme,
            params,
            cycles,
            snapshots,
            simulator: sim,
            seed,
        };
        let key_json = serde_json::to_string(&key).map_err(|e| Error::Format(e.to_string()))?;
        let hash = hex::encode(Sha256::digest(key_json.as_bytes()));
        let data = dir.join(format!("{hash}.feat"));
        let meta = dir.join(format!("{hash}.json"));
        if data.exists() {
            let stored = std::fs::read_to_string(&meta).unwrap_or_default();
            if stored == key_json {
                match crate::kernel::read_gram(&data) {
                    Ok(m) => return Ok(m),
                    Err(e) => self.warn(format!("cache entry {hash} unreadable ({e}); recomputing")),
                }
            } else {
                self.warn(format!("cache-hash mismatch for {hash}; recomputing"));
            }
        }
        let m = sim.features(inputs, scheme, params, cycles, snapshots, seed)?;
        std::fs::create_dir_all(dir)?;
        crate::kernel::write_gram(&data, &m)?;
        std::fs::write(&meta, key_json)?;
        Ok(m)
    }

    fn warn(&self, msg: String) {
        self.warnings.lock().expect("warning lock").push(msg);
    }
}

/// Files produced by a command, as (relative name, contents).
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub files: Vec<(String, String)>,
    /// Human-readable summary for the terminal.
    pub summary: String,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            std::fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
    (mean, (var / m).sqrt())
}

fn check_seeds(seeds: usize) -> Result<()> {
    if seeds == 0 {
        return Err(invalid("seeds must be at least 1"));
    }
    Ok(())
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid(format!("{name} is empty")));
    }
    if let Some(g) = grid.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(invalid(format!("{name} value {g} outside [0, 1]")));
    }
    Ok(())
}

enum CapMetric {
    Task(CapacityTask),
    Otoc,
}

/// Capacities and the OTOC plateau over a g grid with disorder averaging.
/// Disorder for seed index `s` is shared by every g.
pub fn cmd_capacities(cfg: &Config) -> Result<Report> {
    let c = &cfg.capacities;
    check_seeds(c.seeds)?;
    check_grid("capacities.g_grid", &c.g_grid)?;
    if c.tasks.is_empty() {
        return Err(invalid("capacities.tasks is empty"));
    }
    let metrics: Vec<(String, CapMetric)> = c
        .tasks
        .iter()
        .map(|t| {
            if t.eq_ignore_ascii_case("otoc") {
                Ok(("otoc".to_string(), CapMetric::Otoc))
            } else {
                let task: CapacityTask = t.parse()?;
                Ok((task.name(), CapMetric::Task(task)))
            }
        })
        .collect::<Result<_>>()?;
    let tasks: Vec<CapacityTask> =
        metrics.iter().filter_map(|(_, m)| if let CapMetric::Task(t) = m { Some(*t) } else { None }).collect();
    let settings = c.settings();
    let seed = cfg.run.seed;
    let jobs: Vec<(usize, usize)> = (0..c.g_grid.len()).flat_map(|gi| (0..c.seeds).map(move |s| (gi, s))).collect();
    let results: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(gi, s)| {
            let s = s as u64;
            let params = sample_params(c.n, c.g_grid[gi], derive_seed(seed, &[0xd150, s]))?;
            let caps = if tasks.is_empty() {
                Vec::new()
            } else {
                run_capacity_tasks(&tasks, &params, &settings, derive_seed(seed, &[0x1a9, s]))?
            };
            let mut caps = caps.into_iter();
            metrics
                .iter()
                .map(|(_, m)| match m {
                    CapMetric::Task(_) => Ok(caps.next().expect("one value per task")),
                    CapMetric::Otoc => {
                        let probes = random_basis_probes(c.n, c.otoc_probes, derive_seed(seed, &[0x07c, s]))?;
                        otoc_plateau(&params, c.otoc_from, c.otoc_to, &probes)
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut csv = String::from(MetricRow::CSV_HEADER);
    csv.push('\n');
    for (&(gi, s), vals) in jobs.iter().zip(&results) {
        for ((name, _), v) in metrics.iter().zip(vals) {
            let row = MetricRow { g: c.g_grid[gi], l: c.n, seed: s as u64, metric: name.clone(), value: *v };
            writeln!(csv, "{}", row.to_csv()).expect("string write");
        }
    }
    let mut summary_csv = String::from("g,metric,mean,stderr\n");
    let mut summary = format!("{:>6}", "g");
    for (name, _) in &metrics {
        write!(summary, " {name:>10}").expect("string write");
    }
    summary.push('\n');
    for (gi, &g) in c.g_grid.iter().enumerate() {
        write!(summary, "{g:>6.2}").expect("string write");
        for (mi, (name, _)) in metrics.iter().enumerate() {
            let vals: Vec<f64> = jobs.iter().zip(&results).filter(|((j, _), _)| *j == gi).map(|(_, r)| r[mi]).collect();
            let (m, se) = mean_stderr(&vals);
            writeln!(summary_csv, "{},{name},{},{}", f4(g), f4(m), f4(se)).expect("string write");
            write!(summary, " {:>10}", f4(m)).expect("string write");
        }
        summary.push('\n');
    }
    Ok(Report {
        files: vec![("capacities.csv".into(), csv), ("capacities_summary.csv".into(), summary_csv)],
        summary,
        warnings: Vec::new(),
    })
}

fn cache_for(cfg: &Config) -> FeatureCache {
    if cfg.run.cache {
        FeatureCache::at(cfg.run.out.join("cache"))
    } else {
        FeatureCache::disabled()
    }
}

/// Row of the classification report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassifyRow {
    pub g: f64,
    pub n: usize,
    pub encoding: String,
    pub noise: String,
    pub seed: u64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

impl ClassifyRow {
    pub const CSV_HEADER: &'static str = "g,n,encoding,noise,seed,train_acc,test_acc";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            f4(self.g),
            self.n,
            self.encoding,
            self.noise,
            self.seed,
            f4(self.train_accuracy),
            f4(self.test_accuracy)
        )
    }
}

/// One (size, seed) block: data prepared once, disorder shared across g.
fn classify_block(
    cfg: &Config,
    cc: &ClassifyConfig,
    sim: &Simulator,
    mnist: &Mnist,
    cache: &FeatureCache,
    n: usize,
    s: u64,
) -> Result<Vec<ClassifyRow>> {
    let seed = cfg.run.seed;
    let scheme = cfg.reservoir.scheme();
    let data = mnist.prepare(&cc.classes, cc.train, cc.test, scheme.input_dim(n), derive_seed(seed, &[0xda7a, s]))?;
    let disorder_seed = derive_seed(seed, &[0xd150, n as u64, s]);
    let (cycles, snapshots) = (cfg.reservoir.cycles, cfg.reservoir.snapshots);
    cc.g_grid
        .iter()
        .map(|&g| {
            let params = sample_params(n, g, disorder_seed)?;
            let sim_seed = derive_seed(seed, &[0x5e7, s]);
            let ftr = cache.features(sim, &data.train_x, &scheme, &params, cycles, snapshots, sim_seed)?;
            let fte =
                cache.features(sim, &data.test_x, &scheme, &params, cycles, snapshots, derive_seed(sim_seed, &[1]))?;
            let (tr, te) = readout_accuracy(
                cfg.readout.kind,
                &cfg.readout,
                &ftr,
                &data.train_y,
                &fte,
                &data.test_y,
                data.n_classes,
                derive_seed(seed, &[0x5ead, s]),
            )?;
            Ok(ClassifyRow {
                g,
                n,
                encoding: format!("{:?}", scheme.kind).to_lowercase(),
                noise: sim.noise_label(),
                seed: s,
                train_accuracy: tr,
                test_accuracy: te,
            })
        })
        .collect()
}

/// Image classification: PCA, encoding, reservoir, readout; one row per
/// (size, g, seed).
pub fn cmd_classify(cfg: &Config) -> Result<Report> {
    let cc = &cfg.classify;
    check_seeds(cc.seeds)?;
    check_grid("classify.g_grid", &cc.g_grid)?;
    if cc.sizes.is_empty() {
        return Err(invalid("classify.sizes is empty"));
    }
    let sim = Simulator::from_config(cfg);
    sim.validate()?;
    let mnist = Mnist::load(&cfg.data.mnist_dir)?;
    let cache = cache_for(cfg);
    let mut rows = Vec::new();
    for &n in &cc.sizes {
        for s in 0..cc.seeds as u64 {
            rows.extend(classify_block(cfg, cc, &sim, &mnist, &cache, n, s)?);
        }
    }
    let mut csv = format!("{}\n", ClassifyRow::CSV_HEADER);
    rows.iter().for_each(|r| writeln!(csv, "{}", r.to_csv()).expect("string write"));
    let mut summary_csv = String::from("g,n,noise,mean_test_acc,stderr\n");
    let mut summary = String::from("     n      g   test acc (mean over seeds)\n");
    for &n in &cc.sizes {
        for &g in &cc.g_grid {
            let v: Vec<f64> = rows.iter().filter(|r| r.n == n && r.g == g).map(|r| r.test_accuracy).collect();
            let (m, se) = mean_stderr(&v);
            writeln!(summary_csv, "{},{n},{},{},{}", f4(g), sim.noise_label(), f4(m), f4(se)).expect("string write");
            writeln!(summary, "{n:>6} {g:>6.2}   {}", f4(m)).expect("string write");
        }
    }
    let warnings = std::mem::take(&mut *cache.warnings.lock().expect("warning lock"));
    Ok(Report {
        files: vec![("classify.csv".into(), csv), ("classify_summary.csv".into(), summary_csv)],
        summary,
        warnings,
    })
}

/// Kernel-advantage row for one (g, seed).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelRow {
    pub g: f64,
    pub n: usize,
    pub seed: u64,
    pub result: KernelAdvantage,
}

impl KernelRow {
    pub const CSV_HEADER: &'static str =
        "g,n,seed,orig_q,orig_c,orig_gap,relabel_gamma,relabeled_q,relabeled_c,relabeled_gap,g_cq,g_qc";

    pub fn to_csv(&self) -> String {
        let r = &self.result;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            f4(self.g),
            self.n,
            self.seed,
            f4(r.original_quantum),
            f4(r.original_classical),
            f4(r.original_gap()),
            f4(r.relabel_gamma),
            f4(r.relabeled_quantum),
            f4(r.relabeled_classical),
            f4(r.relabeled_gap()),
            f4(r.g_cq),
            f4(r.g_qc)
        )
    }
}

/// Kernel study on precomputed inputs and features for one (g, seed).
pub fn kernel_study(
    kc: &KernelConfig,
    inputs: &DMatrix<f64>,
    features: &DMatrix<f64>,
    labels: &[usize],
    n_train: usize,
    seed: u64,
) -> Result<KernelAdvantage> {
    let split = Split::head(n_train, labels.len())?;
    let k_q = quantum_gram(features, kc.mode)?;
    let classical: Vec<(f64, GramMatrix)> = if kc.force_equal {
        vec![(f64::NAN, k_q.clone())]
    } else {
        kc.grid.gammas.iter().map(|&g| Ok((g, rbf_gram(inputs, g)?))).collect::<Result<_>>()?
    };
    kernel_advantage_grams(&k_q, &classical, labels, &split, kc.rule, &kc.grid, seed)
}

/// Quantum-minus-classical kernel accuracy before and after adversarial
/// relabeling on a binary image task.
pub fn cmd_kernel_adv(cfg: &Config) -> Result<Report> {
    let kc = &cfg.kernel;
    check_seeds(kc.seeds)?;
    check_grid("kernel.g_grid", &kc.g_grid)?;
    if kc.classes.len() != 2 || kc.classes[0] == kc.classes[1] {
        return Err(invalid(format!("kernel study needs exactly two distinct classes, got {:?}", kc.classes)));
    }
    let sim = Simulator::from_config(cfg);
    sim.validate()?;
    let mnist = Mnist::load(&cfg.data.mnist_dir)?;
    let cache = cache_for(cfg);
    let scheme = cfg.reservoir.scheme();
    let seed = cfg.run.seed;
    let mut rows = Vec::new();
    for s in 0..kc.seeds as u64 {
        let data =
            mnist.prepare(&kc.classes, kc.train, kc.test, scheme.input_dim(kc.n), derive_seed(seed, &[0xda7a, s]))?;
        let inputs = stack(&data.train_x, &data.test_x);
        let labels: Vec<usize> = data.train_y.iter().chain(&data.test_y).copied().collect();
        for &g in &kc.g_grid {
            let params = sample_params(kc.n, g, derive_seed(seed, &[0xd150, kc.n as u64, s]))?;
            let feats = cache.features(
                &sim,
                &inputs,
                &scheme,
                &params,
                cfg.reservoir.cycles,
                cfg.reservoir.snapshots,
                derive_seed(seed, &[0x5e7, s]),
            )?;
            let result = kernel_study(kc, &inputs, &feats, &labels, kc.train, derive_seed(seed, &[0x4e5, s]))?;
            rows.push(KernelRow { g, n: kc.n, seed: s, result });
        }
    }
    let mut csv = format!("{}\n", KernelRow::CSV_HEADER);
    rows.iter().for_each(|r| writeln!(csv, "{}", r.to_csv()).expect("string write"));
    let mut summary = String::from("     g   original gap   relabeled gap   g_CQ\n");
    for &g in &kc.g_grid {
        let sel: Vec<&KernelRow> = rows.iter().filter(|r| r.g == g).collect();
        let orig: Vec<f64> = sel.iter().map(|r| r.result.original_gap()).collect();
        let rel: Vec<f64> = sel.iter().map(|r| r.result.relabeled_gap()).collect();
        let gcq: Vec<f64> = sel.iter().map(|r| r.result.g_cq).collect();
        writeln!(
            summary,
            "{g:>6.2}   {:>12}   {:>13}   {}",
            f4(mean_stderr(&orig).0),
            f4(mean_stderr(&rel).0),
            f4(mean_stderr(&gcq).0)
        )
        .expect("string write");
    }
    let warnings = std::mem::take(&mut *cache.warnings.lock().expect("warning lock"));
    Ok(Report { files: vec![("kernel_adv.csv".into(), csv)], summary, warnings })
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(
        a.nrows() + b.nrows(),
        a.ncols(),
        |r, c| if r < a.nrows() { a[(r, c)] } else { b[(r - a.nrows(), c)] },
    )
}

/// Spin-glass order parameter table and finite-size crossings.
pub fn cmd_phase_scan(cfg: &Config) -> Result<Report> {
    let mut settings = cfg.phase.clone();
    settings.seed = cfg.run.seed;
    let table: PhaseTable = phase_scan(&settings)?;
    let mut csv = format!("{},stderr\n", MetricRow::CSV_HEADER);
    for r in &table.rows {
        let row = MetricRow { g: r.g, l: r.l, seed: settings.seed, metric: "chi_sg".into(), value: r.mean_chi };
        writeln!(csv, "{},{}", row.to_csv(), f4(r.stderr)).expect("string write");
    }
    let mut crossings = String::from("L_small,L_large,g\n");
    let mut summary = String::from("crossings of chi_SG curves:\n");
    for c in &table.crossings {
        writeln!(crossings, "{},{},{}", c.l_small, c.l_large, f4(c.g)).expect("string write");
        writeln!(summary, "  L={} / L={}: g = {}", c.l_small, c.l_large, f4(c.g)).expect("string write");
    }
    Ok(Report {
        files: vec![("phase_scan.csv".into(), csv), ("phase_crossings.csv".into(), crossings)],
        summary,
        warnings: Vec::new(),
    })
}

/// Test accuracy against two-qubit depolarizing strength with
/// `p1 = p1_ratio · p2`.
pub fn cmd_noise_sweep(cfg: &Config) -> Result<Report> {
    let ns = &cfg.noise_sweep;
    check_seeds(ns.seeds)?;
    check_grid("noise_sweep.g", &[ns.g])?;
    if ns.p2_grid.is_empty() {
        return Err(invalid("noise_sweep.p2_grid is empty"));
    }
    let backend = match cfg.run.backend {
        Backend::Exact => Backend::Channel,
        Backend::Shots => return Err(invalid("noise sweep needs the channel or traj backend")),
        b => b,
    };
    if backend == Backend::Channel && ns.n > crate::noise::CHANNEL_MAX_QUBITS {
        return Err(Error::TooManyQubits { what: "channel backend", n: ns.n, max: crate::noise::CHANNEL_MAX_QUBITS });
    }
    let mnist = Mnist::load(&cfg.data.mnist_dir)?;
    let cache = cache_for(cfg);
    let scheme = cfg.reservoir.scheme();
    let seed = cfg.run.seed;
    let mut csv = String::from("p2,p1,seed,train_acc,test_acc\n");
    let mut acc: Vec<Vec<f64>> = vec![Vec::new(); ns.p2_grid.len()];
    for s in 0..ns.seeds as u64 {
        let data =
            mnist.prepare(&ns.classes, ns.train, ns.test, scheme.input_dim(ns.n), derive_seed(seed, &[0xda7a, s]))?;
        let params = sample_params(ns.n, ns.g, derive_seed(seed, &[0xd150, ns.n as u64, s]))?;
        for (pi, &p2) in ns.p2_grid.iter().enumerate() {
            let noise = NoiseSpec { depol_1q_p: p2 * ns.p1_ratio, depol_2q_p: p2, ..cfg.noise.clone() };
            let sim = Simulator { backend, shots: cfg.run.shots, trajectories: cfg.run.trajectories, noise };
            let sim_seed = derive_seed(seed, &[0x5e7, s]);
            let (c, sn) = (cfg.reservoir.cycles, cfg.reservoir.snapshots);
            let ftr = cache.features(&sim, &data.train_x, &scheme, &params, c, sn, sim_seed)?;
            let fte = cache.features(&sim, &data.test_x, &scheme, &params, c, sn, derive_seed(sim_seed, &[1]))?;
            let (tr, te) = readout_accuracy(
                cfg.readout.kind,
                &cfg.readout,
                &ftr,
                &data.train_y,
                &fte,
                &data.test_y,
                data.n_classes,
                derive_seed(seed, &[0x5ead, s]),
            )?;
            writeln!(csv, "{},{},{s},{},{}", f4(p2), f4(p2 * ns.p1_ratio), f4(tr), f4(te)).expect("string write");
            acc[pi].push(te);
        }
    }
    let mut summary_csv = String::from("p2,mean_test_acc,stderr\n");
    let mut summary = String::from("    p2   test acc\n");
    for (p2, v) in ns.p2_grid.iter().zip(&acc) {
        let (m, se) = mean_stderr(v);
        writeln!(summary_csv, "{},{},{}", f4(*p2), f4(m), f4(se)).expect("string write");
        writeln!(summary, "{p2:>6.3}   {}", f4(m)).expect("string write");
    }
    let warnings = std::mem::take(&mut *cache.warnings.lock().expect("warning lock"));
    Ok(Report {
        files: vec![("noise_sweep.csv".into(), csv), ("noise_sweep_summary.csv".into(), summary_csv)],
        summary,
        warnings,
    })
}
