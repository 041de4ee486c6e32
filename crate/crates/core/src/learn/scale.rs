use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Column-wise affine map of training ranges onto `[lo, hi]`; values
/// outside the training range are clipped, constant columns map to the
/// midpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AngleScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl AngleScaler {
    pub fn fit(train: &DMatrix<f64>, lo: f64, hi: f64) -> Result<Self> {
        if train.nrows() == 0 {
            return Err(invalid("cannot fit a scaler on zero rows"));
        }
        if hi <= lo {
            return Err(invalid("target range must satisfy lo < hi"));
        }
        let mins = train.column_iter().map(|c| c.min()).collect();
        let maxs = train.column_iter().map(|c| c.max()).collect();
        Ok(Self { mins, maxs, lo, hi })
    }

    /// Default target range `[0, π]`.
    pub fn fit_angles(train: &DMatrix<f64>) -> Result<Self> {
        Self::fit(train, 0.0, PI)
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.mins.len() {
            return Err(Error::DimensionMismatch { expected: self.mins.len(), got: x.ncols() });
        }
        let mid = 0.5 * (self.lo + self.hi);
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            let (a, b) = (self.mins[c], self.maxs[c]);
            if b - a <= f64::EPSILON * a.abs().max(1.0) {
                mid
            } else {
                let t = ((x[(r, c)] - a) / (b - a)).clamp(0.0, 1.0);
                self.lo + t * (self.hi - self.lo)
            }
        }))
    }
}

pub fn scale_to_angles(train: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    AngleScaler::fit_angles(train)?.transform(x)
}

/// Zero-mean, unit-variance columns (constant columns are only centered).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &DMatrix<f64>) -> Result<Self> {
        let n = train.nrows();
        if n == 0 {
            return Err(invalid("cannot fit a standardizer on zero rows"));
        }
        let mean: Vec<f64> = train.column_iter().map(|c| c.mean()).collect();
        let scale = train
            .column_iter()
            .zip(&mean)
            .map(|(c, m)| {
                let var = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), got: x.ncols() });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| (x[(r, c)] - self.mean[c]) / self.scale[c]))
    }
}
