use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::rng_for;

use super::linear::Classifier;

/// Hidden widths and per-hidden-layer dropout rates. The output layer has
/// one unit per class and is followed by softmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub hidden: Vec<usize>,
    pub dropout: Vec<f64>,
}

impl MlpArchitecture {
    /// 64-32-16 ReLU, dropout 0.2 after every hidden layer.
    pub fn mlp1() -> Self {
        Self { hidden: vec![64, 32, 16], dropout: vec![0.2; 3] }
    }

    /// 128-64-32 ReLU, dropout 0.3/0.2/0.2.
    pub fn mlp2() -> Self {
        Self { hidden: vec![128, 64, 32], dropout: vec![0.3, 0.2, 0.2] }
    }

    pub fn linear() -> Self {
        Self { hidden: vec![], dropout: vec![] }
    }

    fn validate(&self) -> Result<()> {
        if self.dropout.len() != self.hidden.len() {
            return Err(invalid("one dropout rate per hidden layer is required"));
        }
        if self.hidden.contains(&0) {
            return Err(invalid("hidden layers must be non-empty"));
        }
        if self.dropout.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(invalid("dropout rates must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Mini-batch Adam settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 32, learning_rate: 1e-3, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs x outputs`.
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub architecture: MlpArchitecture,
    pub layers: Vec<Dense>,
}

fn affine(x: &DMatrix<f64>, layer: &Dense) -> DMatrix<f64> {
    let mut z = x * &layer.w;
    for mut row in z.row_iter_mut() {
        row += layer.b.transpose();
    }
    z
}

fn softmax_rows(z: &mut DMatrix<f64>) {
    for mut row in z.row_iter_mut() {
        let m = row.max();
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row /= s;
    }
}

impl Mlp {
    /// He-uniform initialization, zero biases.
    pub fn new(inputs: usize, classes: usize, architecture: MlpArchitecture, seed: u64) -> Result<Self> {
        architecture.validate()?;
        let mut rng = rng_for(seed, &[0x31f0]);
        let mut widths = vec![inputs];
        widths.extend(&architecture.hidden);
        widths.push(classes);
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                Dense {
                    w: DMatrix::from_fn(w[0], w[1], |_, _| rng.random_range(-bound..bound)),
                    b: DVector::zeros(w[1]),
                }
            })
            .collect();
        Ok(Self { architecture, layers })
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.as_mut_slice().copy_from_slice(&p[at..at + nw]);
            at += nw;
            let nb = l.b.len();
            l.b.as_mut_slice().copy_from_slice(&p[at..at + nb]);
            at += nb;
        }
    }

    /// Class probabilities with dropout disabled.
    pub fn probabilities(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_inputs() {
            return Err(Error::DimensionMismatch { expected: self.n_inputs(), got: x.ncols() });
        }
        let mut a = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            a = affine(&a, layer);
            if i < last {
                a.apply(|v| *v = v.max(0.0));
            }
        }
        softmax_rows(&mut a);
        Ok(a)
    }

    /// Mean cross-entropy and its flattened gradient. With `rng`, inverted
    /// dropout masks are drawn for the hidden layers.
    pub fn loss_and_grad(
        &self,
        x: &DMatrix<f64>,
        labels: &[usize],
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<f64>)> {
        let n = x.nrows();
        if n == 0 || labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        if x.ncols() != self.n_inputs() {
            return Err(Error::DimensionMismatch { expected: self.n_inputs(), got: x.ncols() });
        }
        let last = self.layers.len() - 1;
        let mut rng = rng;
        // inputs[i] feeds layer i; masks[i] is the post-ReLU mask of hidden layer i.
        let mut inputs = vec![x.clone()];
        let mut masks: Vec<DMatrix<f64>> = Vec::with_capacity(last);
        let mut a = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = affine(&a, layer);
            if i < last {
                let p = self.architecture.dropout[i];
                let keep = 1.0 / (1.0 - p);
                let mask = DMatrix::from_fn(z.nrows(), z.ncols(), |r, c| {
                    let active = if z[(r, c)] > 0.0 { 1.0 } else { 0.0 };
                    let dropped = match rng.as_deref_mut() {
                        Some(g) if p > 0.0 => g.random::<f64>() < p,
                        _ => false,
                    };
                    if dropped {
                        0.0
                    } else if rng.is_some() {
                        active * keep
                    } else {
                        active
                    }
                });
                a = z.component_mul(&mask);
                masks.push(mask);
                inputs.push(a.clone());
            } else {
                a = z;
            }
        }
        softmax_rows(&mut a);
        let mut loss = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            loss -= a[(i, l)].max(1e-300).ln();
            a[(i, l)] -= 1.0;
        }
        let mut delta = a / n as f64;
        let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let gw = inputs[i].tr_mul(&delta);
            let gb = delta.row_sum().transpose();
            if i > 0 {
                delta = (&delta * self.layers[i].w.transpose()).component_mul(&masks[i - 1]);
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        let flat = grads.iter().flat_map(|(w, b)| w.iter().chain(b.iter()).copied()).collect();
        Ok((loss / n as f64, flat))
    }
}

impl Classifier for Mlp {
    fn scores(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.probabilities(x)
    }
}

pub fn mlp_train(
    x: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    architecture: MlpArchitecture,
    cfg: &MlpConfig,
) -> Result<Mlp> {
    if x.nrows() != labels.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: labels.len() });
    }
    if n_classes < 2 || labels.is_empty() || labels.iter().all(|&l| l == labels[0]) {
        return Err(invalid("classification needs at least two classes"));
    }
    if labels.iter().any(|&l| l >= n_classes) {
        return Err(invalid("label outside class range"));
    }
    if cfg.batch_size == 0 {
        return Err(invalid("batch_size must be positive"));
    }
    let mut model = Mlp::new(x.ncols(), n_classes, architecture, cfg.seed)?;
    let mut rng = rng_for(cfg.seed, &[0x31f1]);
    let np = model.param_count();
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m1 = vec![0.0; np];
    let mut m2 = vec![0.0; np];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut params = model.params();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select_rows(batch);
            let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (_, g) = model.loss_and_grad(&xb, &yb, Some(&mut rng))?;
            step += 1;
            let c1 = 1.0 - b1.powi(step);
            let c2 = 1.0 - b2.powi(step);
            for k in 0..np {
                m1[k] = b1 * m1[k] + (1.0 - b1) * g[k];
                m2[k] = b2 * m2[k] + (1.0 - b2) * g[k] * g[k];
                params[k] -= cfg.learning_rate * (m1[k] / c1) / ((m2[k] / c2).sqrt() + eps);
            }
            model.set_params(&params);
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("MLP training diverged".into()));
        }
    }
    Ok(model)
}
