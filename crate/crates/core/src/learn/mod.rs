//! Classical pre- and post-processing around the reservoir.

mod dataset;
mod linear;
mod mlp;
mod pca;
mod persist;
mod scale;

pub use dataset::{
    dataset_from_idx, load_mnist, parse_idx_images, parse_idx_labels, read_idx_images, read_idx_labels,
    stratified_indices, Dataset, IdxImages, MnistFiles, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use linear::{
    accuracy, accuracy_of, argmax_rows, ridge_fit, ridge_fit_vec, softmax_fit, softmax_loss, softmax_loss_and_grad,
    softmax_train, Classifier, LinearModel, SoftmaxConfig, SoftmaxFit,
};
pub use mlp::{mlp_train, Dense, Mlp, MlpArchitecture, MlpConfig};
pub use pca::{pca_fit, pca_transform, PcaModel};
pub use persist::{load_model, save_model, SavedModel, MODEL_FORMAT, MODEL_VERSION};
pub use scale::{scale_to_angles, AngleScaler, Standardizer};
