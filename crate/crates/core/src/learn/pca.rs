use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Principal-component projection fitted on training rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `dims x k`, orthonormal columns in decreasing-variance order.
    pub components: DMatrix<f64>,
    pub explained_variance: Vec<f64>,
    /// Per-component `(min, max)` of the projected training data.
    pub bounds: Vec<(f64, f64)>,
}

pub fn pca_fit(train: &DMatrix<f64>, k: usize) -> Result<PcaModel> {
    let (n, d) = train.shape();
    if n < 2 {
        return Err(invalid("PCA needs at least two samples"));
    }
    if k == 0 || k > d.min(n) {
        return Err(invalid(format!("k = {k} must be in 1..={}", d.min(n))));
    }
    let mean = train.row_mean().transpose();
    let mut centered = train.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = DMatrix::zeros(d, k);
    for (j, &src) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(src).clone_owned();
        // Deterministic sign: largest-magnitude entry positive.
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        components.set_column(j, &v);
    }
    let explained_variance = order.iter().take(k).map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let projected = &centered * &components;
    let bounds = (0..k)
        .map(|j| {
            let col = projected.column(j);
            (col.min(), col.max())
        })
        .collect();
    Ok(PcaModel { mean, components, explained_variance, bounds })
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.ncols()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), got: x.ncols() });
        }
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * &self.components)
    }

    pub fn inverse_transform(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = z * self.components.transpose();
        for mut row in x.row_iter_mut() {
            row += self.mean.transpose();
        }
        x
    }
}

pub fn pca_transform(model: &PcaModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    model.transform(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_data(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::rng::rng_for(seed, &[]);
        DMatrix::from_fn(n, d, |_, c| rng.random::<f64>() * (c + 1) as f64)
    }

    #[test]
    fn full_basis_reconstructs() {
        let x = random_data(30, 5, 1);
        let m = pca_fit(&x, 5).unwrap();
        let back = m.inverse_transform(&m.transform(&x).unwrap());
        assert!((back - &x).abs().max() < 1e-8);
        let gram = m.components.tr_mul(&m.components);
        assert!((gram - DMatrix::identity(5, 5)).abs().max() < 1e-8);
    }

    #[test]
    fn first_component_follows_max_variance_axis() {
        let mut rng = crate::rng::rng_for(3, &[]);
        let x = DMatrix::from_fn(200, 2, |_, c| {
            if c == 0 {
                rng.random::<f64>() - 0.5
            } else {
                10.0 * (rng.random::<f64>() - 0.5)
            }
        });
        let m = pca_fit(&x, 1).unwrap();
        assert!((m.components[(1, 0)].abs() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn projections_are_decorrelated() {
        let x = random_data(80, 6, 7);
        let m = pca_fit(&x, 4).unwrap();
        let z = m.transform(&x).unwrap();
        let cov = z.tr_mul(&z) / 79.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(cov[(i, j)].abs() < 1e-8);
                }
            }
        }
        let mean_row = DMatrix::from_row_slice(1, 6, m.mean.as_slice());
        assert!(m.transform(&mean_row).unwrap().abs().max() < 1e-10);
    }

    #[test]
    fn k_bounds() {
        let x = random_data(4, 6, 1);
        assert!(pca_fit(&x, 5).is_err());
        assert!(pca_fit(&x, 0).is_err());
    }
}
