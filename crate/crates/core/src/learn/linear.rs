use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::rng_for;

use super::dataset::stratified_indices;

/// Anything producing one score per class for each input row.
pub trait Classifier {
    fn scores(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>>;

    /// Row-wise argmax; ties go to the lowest class index.
    fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.scores(x)?))
    }
}

pub fn argmax_rows(scores: &DMatrix<f64>) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn accuracy_of(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(invalid("accuracy of an empty set"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: predictions.len() });
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

pub fn accuracy(model: &impl Classifier, x: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(invalid("accuracy of an empty set"));
    }
    accuracy_of(&model.predict(x)?, labels)
}

/// Affine map `x -> x W + b` with `W: features x outputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl LinearModel {
    pub fn zeros(features: usize, outputs: usize) -> Self {
        Self { weights: DMatrix::zeros(features, outputs), bias: DVector::zeros(outputs) }
    }

    pub fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }

    pub fn predict_values(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got: x.ncols() });
        }
        let mut out = x * &self.weights;
        for mut row in out.row_iter_mut() {
            row += self.bias.transpose();
        }
        Ok(out)
    }

    /// Parameters flattened as `[W column-major, b]`.
    pub fn params(&self) -> Vec<f64> {
        self.weights.iter().chain(self.bias.iter()).copied().collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let nw = self.weights.len();
        self.weights.as_mut_slice().copy_from_slice(&p[..nw]);
        self.bias.as_mut_slice().copy_from_slice(&p[nw..]);
    }
}

impl Classifier for LinearModel {
    fn scores(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.predict_values(x)
    }
}

/// Ridge regression with an unpenalized intercept, solved through the
/// eigendecomposition of the smaller Gram matrix of the centered design.
/// Directions with eigenvalue below `max · max(n, d) · ε` are dropped, so
/// `lambda = 0` gives the minimum-norm least-squares solution.
pub fn ridge_fit(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<LinearModel> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Err(invalid("ridge_fit needs a non-empty design"));
    }
    if y.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.nrows() });
    }
    if !(lambda >= 0.0) {
        return Err(invalid("ridge penalty must be non-negative"));
    }
    let xm = x.row_mean();
    let ym = y.row_mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &xm;
    }
    let mut yc = y.clone();
    for mut row in yc.row_iter_mut() {
        row -= &ym;
    }
    // nalgebra's SVD with singular vectors misreports rank-deficient
    // spectra, so the symmetric eigensolver is used instead.
    let gram = if d <= n { xc.tr_mul(&xc) } else { &xc * xc.transpose() };
    let eig = SymmetricEigen::new(gram);
    let emax = eig.eigenvalues.max().max(0.0);
    let cutoff = emax * (n.max(d) as f64) * f64::EPSILON;
    let inv = eig.eigenvalues.map(|e| if e <= cutoff { 0.0 } else { 1.0 / (e + lambda) });
    let v = &eig.eigenvectors;
    let weights = if d <= n {
        let proj = v.tr_mul(&xc.tr_mul(&yc));
        v * DMatrix::from_fn(proj.nrows(), proj.ncols(), |r, c| proj[(r, c)] * inv[r])
    } else {
        let proj = v.tr_mul(&yc);
        xc.tr_mul(&(v * DMatrix::from_fn(proj.nrows(), proj.ncols(), |r, c| proj[(r, c)] * inv[r])))
    };
    let bias = (ym - xm * &weights).transpose();
    let model = LinearModel { weights, bias };
    if !model.is_finite() {
        return Err(Error::Singular("ridge solution is not finite".into()));
    }
    Ok(model)
}

pub fn ridge_fit_vec(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<LinearModel> {
    ridge_fit(x, &DMatrix::from_column_slice(y.len(), 1, y), lambda)
}

fn softmax_rows(z: &mut DMatrix<f64>) {
    for mut row in z.row_iter_mut() {
        let m = row.max();
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row /= s;
    }
}

/// Mean cross-entropy of `softmax(xW + b)` and its gradient in the same
/// layout as the model.
pub fn softmax_loss_and_grad(model: &LinearModel, x: &DMatrix<f64>, labels: &[usize]) -> Result<(f64, LinearModel)> {
    let n = x.nrows();
    if n == 0 || labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    let mut p = model.predict_values(x)?;
    softmax_rows(&mut p);
    let mut loss = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        loss -= p[(i, l)].max(1e-300).ln();
        p[(i, l)] -= 1.0;
    }
    p /= n as f64;
    let weights = x.tr_mul(&p);
    let bias = p.row_sum().transpose();
    Ok((loss / n as f64, LinearModel { weights, bias }))
}

pub fn softmax_loss(model: &LinearModel, x: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    let mut p = model.predict_values(x)?;
    softmax_rows(&mut p);
    Ok(-labels.iter().enumerate().map(|(i, &l)| p[(i, l)].max(1e-300).ln()).sum::<f64>() / x.nrows() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoftmaxConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Heavy-ball momentum; 0 gives plain gradient descent.
    pub momentum: f64,
    pub l2: f64,
    pub seed: u64,
    /// Fraction of training rows held out for epoch selection; 0 disables.
    pub validation_fraction: f64,
    /// Epoch counts compared on the validation split (all within one run).
    pub checkpoints: Vec<usize>,
    /// After selection, retrain on all rows for the selected epoch count.
    pub refit_full: bool,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            learning_rate: 0.1,
            momentum: 0.9,
            l2: 0.0,
            seed: 0,
            validation_fraction: 0.0,
            checkpoints: vec![100, 300, 1000],
            refit_full: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SoftmaxFit {
    pub model: LinearModel,
    pub epochs_used: usize,
    pub validation_accuracy: Option<f64>,
    /// Training loss before each epoch of the final run, plus the final loss.
    pub losses: Vec<f64>,
}

fn check_classification(x: &DMatrix<f64>, labels: &[usize], n_classes: usize) -> Result<()> {
    if x.nrows() != labels.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: labels.len() });
    }
    if x.nrows() == 0 {
        return Err(invalid("no training samples"));
    }
    if n_classes < 2 {
        return Err(invalid("classification needs at least two classes"));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(invalid(format!("label {l} outside [0, {n_classes})")));
    }
    let first = labels[0];
    if labels.iter().all(|&l| l == first) {
        return Err(invalid("training labels contain a single class"));
    }
    Ok(())
}

fn softmax_init(d: usize, c: usize, seed: u64) -> LinearModel {
    let mut rng = rng_for(seed, &[0x50f7]);
    let normal = Normal::new(0.0, 0.01).expect("valid normal");
    let mut m = LinearModel::zeros(d, c);
    m.weights.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
    m
}

/// Runs gradient descent, calling `visit(epoch, model)` after epochs
/// `1..=epochs` (and for epoch 0 before training).
fn softmax_descent(
    x: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    cfg: &SoftmaxConfig,
    epochs: usize,
    mut visit: impl FnMut(usize, &LinearModel),
) -> Result<(LinearModel, Vec<f64>)> {
    let mut model = softmax_init(x.ncols(), n_classes, cfg.seed);
    let mut vel = LinearModel::zeros(x.ncols(), n_classes);
    let mut losses = Vec::with_capacity(epochs + 1);
    visit(0, &model);
    for epoch in 1..=epochs {
        let (loss, mut grad) = softmax_loss_and_grad(&model, x, labels)?;
        losses.push(loss);
        if cfg.l2 > 0.0 {
            grad.weights += &model.weights * cfg.l2;
        }
        vel.weights = &vel.weights * cfg.momentum - grad.weights * cfg.learning_rate;
        vel.bias = &vel.bias * cfg.momentum - grad.bias * cfg.learning_rate;
        model.weights += &vel.weights;
        model.bias += &vel.bias;
        if !model.is_finite() {
            return Err(Error::Singular(format!("softmax training diverged at epoch {epoch}")));
        }
        visit(epoch, &model);
    }
    losses.push(softmax_loss(&model, x, labels)?);
    Ok((model, losses))
}

pub fn softmax_fit(x: &DMatrix<f64>, labels: &[usize], n_classes: usize, cfg: &SoftmaxConfig) -> Result<SoftmaxFit> {
    check_classification(x, labels, n_classes)?;
    if !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(invalid("validation_fraction must be in [0, 1)"));
    }
    let n_val = (cfg.validation_fraction * x.nrows() as f64).round() as usize;
    if n_val == 0 {
        let (model, losses) = softmax_descent(x, labels, n_classes, cfg, cfg.epochs, |_, _| {})?;
        return Ok(SoftmaxFit { model, epochs_used: cfg.epochs, validation_accuracy: None, losses });
    }

    let order = stratified_indices(labels, n_classes, x.nrows(), cfg.seed ^ 0x7a1d)?;
    let (val_idx, fit_idx) = order.split_at(n_val);
    let x_fit = x.select_rows(fit_idx);
    let y_fit: Vec<usize> = fit_idx.iter().map(|&i| labels[i]).collect();
    let x_val = x.select_rows(val_idx);
    let y_val: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();

    let mut points: Vec<usize> = cfg.checkpoints.iter().copied().filter(|&e| e <= cfg.epochs).collect();
    points.push(cfg.epochs);
    points.sort_unstable();
    points.dedup();
    let mut best: Option<(f64, usize, LinearModel)> = None;
    let mut err = None;
    let (_, losses) = softmax_descent(&x_fit, &y_fit, n_classes, cfg, cfg.epochs, |epoch, m| {
        if points.binary_search(&epoch).is_ok() {
            match accuracy(m, &x_val, &y_val) {
                Ok(acc) if best.as_ref().is_none_or(|b| acc > b.0) => best = Some((acc, epoch, m.clone())),
                Ok(_) => {}
                Err(e) => err = Some(e),
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let (acc, epochs_used, model) = best.expect("at least one checkpoint");
    if cfg.refit_full {
        let (model, losses) = softmax_descent(x, labels, n_classes, cfg, epochs_used, |_, _| {})?;
        return Ok(SoftmaxFit { model, epochs_used, validation_accuracy: Some(acc), losses });
    }
    Ok(SoftmaxFit { model, epochs_used, validation_accuracy: Some(acc), losses })
}

pub fn softmax_train(x: &DMatrix<f64>, labels: &[usize], n_classes: usize, cfg: &SoftmaxConfig) -> Result<LinearModel> {
    Ok(softmax_fit(x, labels, n_classes, cfg)?.model)
}
