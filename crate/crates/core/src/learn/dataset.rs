use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{invalid, Error, Result};
use crate::rng::rng_for;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Labelled samples. `labels[i]` indexes into `classes`, which records the
/// original label value (e.g. the digit) of each class.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub classes: Vec<usize>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.nrows(), got: labels.len() });
        }
        if let Some(l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(invalid(format!("label {l} outside [0, {n_classes})")));
        }
        Ok(Self { features, labels, classes: (0..n_classes).collect() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dims(&self) -> usize {
        self.features.ncols()
    }

    pub fn original_label(&self, i: usize) -> usize {
        self.classes[self.labels[i]]
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        let features = self.features.select_rows(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset { features, labels, classes: self.classes.clone() }
    }

    /// Keeps only samples whose original label is in `keep`; labels are
    /// re-indexed in the order given.
    pub fn filter_classes(&self, keep: &[usize]) -> Result<Dataset> {
        let mut map = BTreeMap::new();
        for (new, &orig) in keep.iter().enumerate() {
            let idx = self
                .classes
                .iter()
                .position(|&c| c == orig)
                .ok_or_else(|| invalid(format!("class {orig} not present")))?;
            map.insert(idx, new);
        }
        let indices: Vec<usize> = (0..self.len()).filter(|&i| map.contains_key(&self.labels[i])).collect();
        let features = self.features.select_rows(&indices);
        let labels = indices.iter().map(|&i| map[&self.labels[i]]).collect();
        Ok(Dataset { features, labels, classes: keep.to_vec() })
    }

    /// Indices of a class-stratified random subsample of `total` rows.
    /// Classes receive `total / C` rows each, with the remainder going to the
    /// lowest class indices.
    pub fn stratified_indices(&self, total: usize, seed: u64) -> Result<Vec<usize>> {
        stratified_indices(&self.labels, self.n_classes(), total, seed)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }
}

pub fn stratified_indices(labels: &[usize], n_classes: usize, total: usize, seed: u64) -> Result<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = rng_for(seed, &[0x57a7]);
    let mut out = Vec::with_capacity(total);
    for (c, pool) in by_class.iter_mut().enumerate() {
        let want = total / n_classes + usize::from(c < total % n_classes);
        if pool.len() < want {
            return Err(invalid(format!("class {c} has {} samples, {want} requested", pool.len())));
        }
        pool.shuffle(&mut rng);
        out.extend_from_slice(&pool[..want]);
    }
    out.shuffle(&mut rng);
    Ok(out)
}

/// Raw IDX image file contents.
#[derive(Clone, Debug)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn pixel_dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let d = self.pixel_dim();
        &self.pixels[i * d..(i + 1) * d]
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("{what}: truncated header")))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0, "images")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!("images: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")));
    }
    let count = be_u32(bytes, 4, "images")? as usize;
    let rows = be_u32(bytes, 8, "images")? as usize;
    let cols = be_u32(bytes, 12, "images")? as usize;
    let need = 16 + count * rows * cols;
    if bytes.len() < need {
        return Err(Error::Format(format!("images: truncated, {} bytes of {need}", bytes.len())));
    }
    Ok(IdxImages { count, rows, cols, pixels: bytes[16..need].to_vec() })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "labels")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!("labels: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")));
    }
    let count = be_u32(bytes, 4, "labels")? as usize;
    if bytes.len() < 8 + count {
        return Err(Error::Format(format!("labels: truncated, {} bytes of {}", bytes.len(), 8 + count)));
    }
    Ok(bytes[8..8 + count].to_vec())
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    parse_idx_images(&fs::read(path)?)
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    parse_idx_labels(&fs::read(path)?)
}

/// Builds a dataset from raw IDX data, optionally restricted to `indices`.
/// Pixels are scaled to `[0, 1]`.
pub fn dataset_from_idx(images: &IdxImages, labels: &[u8], indices: Option<&[usize]>) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(Error::Format(format!("{} images but {} labels", images.count, labels.len())));
    }
    let all: Vec<usize>;
    let idx = match indices {
        Some(i) => i,
        None => {
            all = (0..images.count).collect();
            &all
        }
    };
    let d = images.pixel_dim();
    let features = DMatrix::from_fn(idx.len(), d, |r, c| f64::from(images.image(idx[r])[c]) / 255.0);
    let labs: Vec<usize> = idx.iter().map(|&i| usize::from(labels[i])).collect();
    if let Some(l) = labs.iter().find(|&&l| l >= 10) {
        return Err(Error::Format(format!("label {l} is not a digit")));
    }
    Dataset::new(features, labs, 10)
}

/// Full MNIST split from an image file and a label file.
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    dataset_from_idx(&images, &labels, None)
}

/// Standard file names inside an MNIST directory.
#[derive(Clone, Debug)]
pub struct MnistFiles {
    pub train_images: std::path::PathBuf,
    pub train_labels: std::path::PathBuf,
    pub test_images: std::path::PathBuf,
    pub test_labels: std::path::PathBuf,
}

impl MnistFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
        }
    }

    pub fn missing(&self) -> Vec<&Path> {
        [&self.train_images, &self.train_labels, &self.test_images, &self.test_labels]
            .into_iter()
            .filter(|p| !p.exists())
            .map(|p| p.as_path())
            .collect()
    }
}
