//! Kernel Gram matrices, the geometric quantum-classical difference,
//! adversarial relabeling and kernel-ridge evaluation.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::learn::stratified_indices;

/// Symmetric kernel matrix over one sample set.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix(pub DMatrix<f64>);

impl GramMatrix {
    pub const SYMMETRY_TOL: f64 = 1e-10;
    pub const PSD_TOL: f64 = 1e-8;

    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let g = Self(m);
        let asym = g.asymmetry();
        if asym > Self::SYMMETRY_TOL {
            return Err(invalid(format!("Gram matrix asymmetric by {asym:e}")));
        }
        Ok(g)
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn asymmetry(&self) -> f64 {
        let m = &self.0;
        (&m.transpose() - m).amax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.0.clone()).eigenvalues.min()
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -Self::PSD_TOL
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Rows `rows`, columns `cols`; used to cut train and cross blocks.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| self.0[(rows[r], cols[c])])
    }

    pub fn sub(&self, idx: &[usize]) -> GramMatrix {
        GramMatrix(self.block(idx, idx))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Fills the upper triangle row by row in parallel and mirrors it.
fn symmetric_from(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> DMatrix<f64> {
    let upper: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| (i..n).map(|j| f(i, j)).collect()).collect();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            m[(i, i + k)] = *v;
            m[(i + k, i)] = *v;
        }
    }
    m
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid(format!("RBF gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// `K_ij = exp(-γ‖x_i - x_j‖²)`.
pub fn rbf_gram(x: &DMatrix<f64>, gamma: f64) -> Result<GramMatrix> {
    check_gamma(gamma)?;
    let rows = rows_of(x);
    let m = symmetric_from(rows.len(), |i, j| if i == j { 1.0 } else { (-gamma * sq_dist(&rows[i], &rows[j])).exp() });
    Ok(GramMatrix(m))
}

/// `K_ij = exp(-γ‖a_i - b_j‖²)` between two sample sets.
pub fn rbf_cross(a: &DMatrix<f64>, b: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    check_gamma(gamma)?;
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), got: b.ncols() });
    }
    let (ra, rb) = (rows_of(a), rows_of(b));
    let rows: Vec<Vec<f64>> =
        ra.par_iter().map(|x| rb.iter().map(|y| (-gamma * sq_dist(x, y)).exp()).collect()).collect();
    Ok(DMatrix::from_fn(ra.len(), rb.len(), |i, j| rows[i][j]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum QuantumKernelMode {
    /// Cosine similarity of feature rows.
    Linear,
    Rbf {
        gamma: f64,
    },
}

/// Kernel on reservoir feature rows.
pub fn quantum_gram(features: &DMatrix<f64>, mode: QuantumKernelMode) -> Result<GramMatrix> {
    if features.nrows() == 0 || features.ncols() == 0 {
        return Err(invalid("quantum_gram needs a nonempty feature matrix"));
    }
    match mode {
        QuantumKernelMode::Rbf { gamma } => rbf_gram(features, gamma),
        QuantumKernelMode::Linear => {
            let rows = rows_of(features);
            let norms: Vec<f64> = rows.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
            if let Some(i) = norms.iter().position(|&v| v == 0.0) {
                return Err(invalid(format!("feature row {i} has zero norm")));
            }
            let m = symmetric_from(rows.len(), |i, j| {
                if i == j {
                    1.0
                } else {
                    let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                    (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
                }
            });
            Ok(GramMatrix(m))
        }
    }
}

/// `V max(Λ, 0)^{1/2} Vᵀ`.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// `ε = 1e-10 · tr(K)/N`.
pub fn default_epsilon(k: &GramMatrix) -> f64 {
    1e-10 * k.trace() / k.size().max(1) as f64
}

/// `(K + εI)⁻¹` through a Cholesky factorization.
fn regularized_inverse(k: &GramMatrix, eps: f64) -> Result<DMatrix<f64>> {
    if eps < 0.0 {
        return Err(invalid("epsilon must be non-negative"));
    }
    let n = k.size();
    let m = &k.0 + DMatrix::identity(n, n) * eps;
    let chol = m.cholesky().ok_or_else(|| Error::Singular("kernel matrix is not positive definite".into()))?;
    let inv = chol.inverse();
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("kernel inverse is not finite".into()));
    }
    Ok(inv)
}

fn check_pair(a: &GramMatrix, b: &GramMatrix) -> Result<()> {
    if a.size() != b.size() {
        return Err(Error::DimensionMismatch { expected: a.size(), got: b.size() });
    }
    if a.size() == 0 {
        return Err(invalid("empty Gram matrix"));
    }
    Ok(())
}

/// `√A (B + εI)⁻¹ √A`, symmetrized.
fn whitened(a: &GramMatrix, b: &GramMatrix, eps: f64) -> Result<DMatrix<f64>> {
    check_pair(a, b)?;
    let sa = psd_sqrt(&a.0);
    let m = &sa * regularized_inverse(b, eps)? * &sa;
    Ok((&m + m.transpose()) * 0.5)
}

/// `g_CQ = sqrt(λ_max(√K_C (K_Q + εI)⁻¹ √K_C))`.
pub fn geometric_difference(k_c: &GramMatrix, k_q: &GramMatrix, eps: f64) -> Result<f64> {
    let m = whitened(k_c, k_q, eps)?;
    let top = SymmetricEigen::new(m).eigenvalues.max();
    Ok(top.max(0.0).sqrt())
}

/// How the continuous adversarial target `y*` is built before the median split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelabelRule {
    /// `v` = top eigenvector of `√K_Q (K_C + εI)⁻¹ √K_Q`, `y* = √K_Q v`.
    /// These labels are easy for the quantum kernel and hard for the
    /// classical one.
    #[default]
    QuantumFavoring,
    /// `v` = top eigenvector of `√K_C (K_Q + εI)⁻¹ √K_C`, `y* = √K_Q v`.
    CrossEigenvector,
    /// `y* = ‖√K_C (K_Q + εI)⁻¹ √K_C‖ · √K_Q 1`, a scalar rescale of the
    /// row sums of `√K_Q`.
    ScalarNorm,
}

/// Top eigenvector with its first component above `1e-12` in magnitude made positive.
fn top_eigenvector(m: DMatrix<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(m);
    let k = eig.eigenvalues.imax();
    let mut v = eig.eigenvectors.column(k).into_owned();
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// The continuous target before binarization.
pub fn adversarial_target(k_c: &GramMatrix, k_q: &GramMatrix, eps: f64, rule: RelabelRule) -> Result<DVector<f64>> {
    check_pair(k_c, k_q)?;
    let sq = psd_sqrt(&k_q.0);
    Ok(match rule {
        RelabelRule::QuantumFavoring => &sq * top_eigenvector(whitened(k_q, k_c, eps)?),
        RelabelRule::CrossEigenvector => &sq * top_eigenvector(whitened(k_c, k_q, eps)?),
        RelabelRule::ScalarNorm => {
            let norm = SymmetricEigen::new(whitened(k_c, k_q, eps)?).eigenvalues.max();
            &sq * DVector::from_element(k_q.size(), norm)
        }
    })
}

/// Label 1 for the `⌊N/2⌋` largest entries, 0 otherwise. Equal values are
/// ranked by index so the split is always balanced.
pub fn median_binarize(y: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));
    let mut labels = vec![0; y.len()];
    for &i in &order[..y.len() / 2] {
        labels[i] = 1;
    }
    labels
}

pub fn adversarial_relabel(k_c: &GramMatrix, k_q: &GramMatrix, eps: f64, rule: RelabelRule) -> Result<Vec<usize>> {
    let y = adversarial_target(k_c, k_q, eps, rule)?;
    Ok(median_binarize(y.as_slice()))
}

fn to_pm(labels: &[usize]) -> Result<DVector<f64>> {
    if labels.iter().any(|&l| l > 1) {
        return Err(invalid("kernel machine expects 0/1 labels"));
    }
    Ok(DVector::from_iterator(labels.len(), labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 })))
}

/// Dual coefficients `α = (K + λI)⁻¹ ỹ` with `ỹ ∈ {-1, +1}`.
pub fn kernel_ridge_fit(k_train: &DMatrix<f64>, y_train: &[usize], lambda: f64) -> Result<DVector<f64>> {
    if lambda < 0.0 {
        return Err(invalid("lambda must be non-negative"));
    }
    let n = k_train.nrows();
    if k_train.ncols() != n || y_train.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y_train.len() });
    }
    let y = to_pm(y_train)?;
    let a = k_train + DMatrix::identity(n, n) * lambda;
    let alpha = match a.clone().cholesky() {
        Some(ch) => ch.solve(&y),
        None => a.lu().solve(&y).ok_or_else(|| Error::Singular("kernel ridge system is singular".into()))?,
    };
    if alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("kernel ridge solution is not finite".into()));
    }
    Ok(alpha)
}

/// Label 1 where `K_cross α > 0`.
pub fn kernel_ridge_predict(k_cross: &DMatrix<f64>, alpha: &DVector<f64>) -> Result<Vec<usize>> {
    if k_cross.ncols() != alpha.len() {
        return Err(Error::DimensionMismatch { expected: alpha.len(), got: k_cross.ncols() });
    }
    Ok((k_cross * alpha).iter().map(|&v| usize::from(v > 0.0)).collect())
}

/// Test accuracy of kernel ridge classification.
pub fn kernel_machine_eval(
    k_train: &DMatrix<f64>,
    k_cross: &DMatrix<f64>,
    y_train: &[usize],
    y_test: &[usize],
    lambda: f64,
) -> Result<f64> {
    if k_cross.nrows() != y_test.len() {
        return Err(Error::DimensionMismatch { expected: k_cross.nrows(), got: y_test.len() });
    }
    if y_test.is_empty() {
        return Err(invalid("empty test set"));
    }
    to_pm(y_test)?;
    let alpha = kernel_ridge_fit(k_train, y_train, lambda)?;
    let pred = kernel_ridge_predict(k_cross, &alpha)?;
    Ok(pred.iter().zip(y_test).filter(|(a, b)| a == b).count() as f64 / y_test.len() as f64)
}

/// Hyperparameter grids searched on a validation split of the training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelGrid {
    pub gammas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub validation_fraction: f64,
}

impl Default for KernelGrid {
    /// `γ ∈ {2^-7, …, 2^3}`, `λ ∈ {1e-6, …, 1}`.
    fn default() -> Self {
        Self {
            gammas: (-7..=3).map(|e| 2f64.powi(e)).collect(),
            lambdas: (-6..=0).map(|e| 10f64.powi(e)).collect(),
            validation_fraction: 0.2,
        }
    }
}

impl KernelGrid {
    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.lambdas.is_empty() {
            return Err(invalid("kernel grids must be nonempty"));
        }
        self.gammas.iter().try_for_each(|&g| check_gamma(g))?;
        if self.lambdas.iter().any(|&l| !(l > 0.0)) {
            return Err(invalid("grid lambdas must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(invalid("validation_fraction must be in (0, 1)"));
        }
        Ok(())
    }
}

/// Train and test positions within one sample set.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// First `n_train` samples train, the rest test.
    pub fn head(n_train: usize, total: usize) -> Result<Self> {
        if n_train == 0 || n_train >= total {
            return Err(invalid("split needs at least one train and one test sample"));
        }
        Ok(Self { train: (0..n_train).collect(), test: (n_train..total).collect() })
    }
}

/// Selects `λ` (and the Gram among `candidates`) on a stratified validation
/// split of the training rows, then refits on all training rows and returns
/// the test accuracy.
pub fn select_and_test(
    candidates: &[GramMatrix],
    labels: &[usize],
    split: &Split,
    grid: &KernelGrid,
    seed: u64,
) -> Result<f64> {
    grid.validate()?;
    if candidates.is_empty() {
        return Err(invalid("no kernel candidates"));
    }
    let y_tr: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
    let y_te: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();
    let n_val =
        ((split.train.len() as f64 * grid.validation_fraction).round() as usize).clamp(1, split.train.len() - 1);
    let val_local = stratified_indices(&y_tr, 2, n_val, seed)?;
    let mut is_val = vec![false; y_tr.len()];
    val_local.iter().for_each(|&i| is_val[i] = true);
    let fit: Vec<usize> = (0..y_tr.len()).filter(|&i| !is_val[i]).map(|i| split.train[i]).collect();
    let val: Vec<usize> = val_local.iter().map(|&i| split.train[i]).collect();
    let y_fit: Vec<usize> = fit.iter().map(|&i| labels[i]).collect();
    let y_val: Vec<usize> = val.iter().map(|&i| labels[i]).collect();

    let mut best = (f64::NEG_INFINITY, 0, 0.0);
    for (ci, k) in candidates.iter().enumerate() {
        for &lambda in &grid.lambdas {
            let acc = match kernel_machine_eval(&k.block(&fit, &fit), &k.block(&val, &fit), &y_fit, &y_val, lambda) {
                Ok(a) => a,
                Err(Error::Singular(_)) => continue,
                Err(e) => return Err(e),
            };
            // Strict improvement keeps the earliest (smoothest, most regularized last) choice.
            if acc > best.0 {
                best = (acc, ci, lambda);
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Singular("every kernel ridge fit was singular".into()));
    }
    let k = &candidates[best.1];
    kernel_machine_eval(&k.block(&split.train, &split.train), &k.block(&split.test, &split.train), &y_tr, &y_te, best.2)
}

/// Outcome of one kernel-advantage study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelAdvantage {
    /// Test accuracies on the true labels.
    pub original_quantum: f64,
    pub original_classical: f64,
    /// `γ` of the classical kernel used for relabeling that maximizes the gap.
    pub relabel_gamma: f64,
    pub relabeled_quantum: f64,
    pub relabeled_classical: f64,
    /// `g_CQ` with the relabeling `γ`, classical kernel whitened by the quantum one.
    pub g_cq: f64,
    /// `g_QC`, the quantity the default relabeling rule maximizes.
    pub g_qc: f64,
}

impl KernelAdvantage {
    pub fn original_gap(&self) -> f64 {
        self.original_quantum - self.original_classical
    }
    pub fn relabeled_gap(&self) -> f64 {
        self.relabeled_quantum - self.relabeled_classical
    }
}

/// Compares the quantum kernel on `features` with RBF kernels on `inputs`
/// over `grid.gammas`.
#[allow(clippy::too_many_arguments)]
pub fn kernel_advantage(
    inputs: &DMatrix<f64>,
    features: &DMatrix<f64>,
    labels: &[usize],
    split: &Split,
    mode: QuantumKernelMode,
    rule: RelabelRule,
    grid: &KernelGrid,
    seed: u64,
) -> Result<KernelAdvantage> {
    grid.validate()?;
    if features.nrows() != inputs.nrows() {
        return Err(Error::DimensionMismatch { expected: inputs.nrows(), got: features.nrows() });
    }
    let k_q = quantum_gram(features, mode)?;
    let classical: Vec<(f64, GramMatrix)> =
        grid.gammas.iter().map(|&g| Ok((g, rbf_gram(inputs, g)?))).collect::<Result<_>>()?;
    kernel_advantage_grams(&k_q, &classical, labels, split, rule, grid, seed)
}

/// For every classical kernel `(γ, K_C)` the labels are rebuilt from that
/// kernel; the reported relabeled gap is the largest over `γ`. Each machine
/// picks its own hyperparameters (the classical one among all `K_C`) on
/// validation data.
pub fn kernel_advantage_grams(
    k_q: &GramMatrix,
    classical: &[(f64, GramMatrix)],
    labels: &[usize],
    split: &Split,
    rule: RelabelRule,
    grid: &KernelGrid,
    seed: u64,
) -> Result<KernelAdvantage> {
    grid.validate()?;
    let n = k_q.size();
    if labels.len() != n || classical.iter().any(|(_, k)| k.size() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if classical.is_empty() {
        return Err(invalid("no classical kernels"));
    }
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct != [0, 1] {
        return Err(invalid("kernel advantage needs binary 0/1 labels"));
    }
    let c_grams: Vec<GramMatrix> = classical.iter().map(|(_, k)| k.clone()).collect();
    let quantum = std::slice::from_ref(k_q);
    let original_quantum = select_and_test(quantum, labels, split, grid, seed)?;
    let original_classical = select_and_test(&c_grams, labels, split, grid, seed)?;

    let eps_q = default_epsilon(k_q);
    let mut best: Option<KernelAdvantage> = None;
    for (gamma, k_c) in classical {
        let eps_c = default_epsilon(k_c);
        let eps = if rule == RelabelRule::QuantumFavoring { eps_c } else { eps_q };
        let relabeled = match adversarial_relabel(k_c, k_q, eps, rule) {
            Ok(r) => r,
            Err(Error::Singular(_)) => continue,
            Err(e) => return Err(e),
        };
        let q = select_and_test(quantum, &relabeled, split, grid, seed)?;
        let c = select_and_test(&c_grams, &relabeled, split, grid, seed)?;
        if best.as_ref().is_none_or(|b| q - c > b.relabeled_gap()) {
            best = Some(KernelAdvantage {
                original_quantum,
                original_classical,
                relabel_gamma: *gamma,
                relabeled_quantum: q,
                relabeled_classical: c,
                g_cq: geometric_difference(k_c, k_q, eps_q).unwrap_or(f64::NAN),
                g_qc: geometric_difference(k_q, k_c, eps_c).unwrap_or(f64::NAN),
            });
        }
    }
    best.ok_or_else(|| Error::Singular("no classical kernel admitted a relabeling".into()))
}

const GRAM_MAGIC: &[u8; 8] = b"DTCGRAM\0";
const GRAM_VERSION: u32 = 1;

/// Layout: 8-byte magic, u32 version, u64 rows, u64 cols, then row-major
/// little-endian f64 entries.
pub fn write_gram(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut buf = Vec::with_capacity(28 + 8 * m.len());
    buf.extend_from_slice(GRAM_MAGIC);
    buf.extend_from_slice(&GRAM_VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            buf.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_gram(path: &Path) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let fmt = |m: &str| Error::Format(format!("{}: {m}", path.display()));
    if bytes.len() < 28 || &bytes[..8] != GRAM_MAGIC {
        return Err(fmt("not a Gram matrix file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != GRAM_VERSION {
        return Err(fmt(&format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[20..28].try_into().expect("8 bytes")) as usize;
    let body = &bytes[28..];
    if rows.checked_mul(cols).and_then(|v| v.checked_mul(8)) != Some(body.len()) {
        return Err(fmt("size does not match the shape header"));
    }
    let vals: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(DMatrix::from_row_slice(rows, cols, &vals))
}
