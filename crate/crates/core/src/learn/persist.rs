use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::linear::LinearModel;
use super::mlp::Mlp;
use super::pca::PcaModel;
use super::scale::{AngleScaler, Standardizer};

pub const MODEL_FORMAT: &str = "dtcqrc-model";
pub const MODEL_VERSION: u32 = 1;

/// Trained readout plus the preprocessing needed to apply it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Linear { model: LinearModel, standardizer: Option<Standardizer> },
    Mlp { model: Mlp, standardizer: Option<Standardizer> },
    Preprocess { pca: PcaModel, scaler: AngleScaler },
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    model: SavedModel,
}

pub fn save_model(path: &Path, model: &SavedModel) -> Result<()> {
    let env = Envelope { format: MODEL_FORMAT.into(), version: MODEL_VERSION, model: model.clone() };
    let text = serde_json::to_string(&env).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let text = fs::read_to_string(path)?;
    let env: Envelope = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if env.format != MODEL_FORMAT {
        return Err(Error::Format(format!("unexpected format tag {:?}", env.format)));
    }
    if env.version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {}", env.version)));
    }
    Ok(env.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let lm =
            LinearModel { weights: DMatrix::from_row_slice(2, 1, &[0.25, -1.5]), bias: DVector::from_vec(vec![0.1]) };
        save_model(&p, &SavedModel::Linear { model: lm.clone(), standardizer: None }).unwrap();
        match load_model(&p).unwrap() {
            SavedModel::Linear { model, .. } => assert_eq!(model, lm),
            other => panic!("wrong kind {other:?}"),
        }
        let text = fs::read_to_string(&p).unwrap().replace("\"version\":1", "\"version\":99");
        fs::write(&p, text).unwrap();
        assert!(matches!(load_model(&p), Err(Error::Format(_))));
    }
}
