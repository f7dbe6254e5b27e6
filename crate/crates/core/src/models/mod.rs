//! Autoencoder, classifiers, and the training loops they share.

mod autoencoder;
mod classifier;
mod dense;
mod gbdt;
mod linear;
mod mlp;
pub mod scalar;
mod sgd;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use autoencoder::{ae_train_local, AeConfig, AeTrainer, Autoencoder};
pub use classifier::{classifier_train, Classifier, ClassifierConfig, ClassifierKind};
pub use dense::{Activation, DenseParams, Layer};
pub use gbdt::{train_gbdt, Gbdt, GbdtConfig, Tree, TreeNode};
pub use linear::{LinearLoss, LinearModel};
pub use mlp::Mlp;
pub use sgd::TrainSpec;


use crate::error::{Error, Result};

const FORMAT: &str = "hyfl-model";
const VERSION: u32 = 1;

/// Anything that can be written to a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "model", rename_all = "snake_case")]
pub enum SavedModel {
    Autoencoder(Autoencoder),
    Classifier(Classifier),
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    #[serde(flatten)]
    body: SavedModel,
}

impl SavedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Envelope {
            format: FORMAT.into(),
            version: VERSION,
            body: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: Envelope = serde_json::from_str(s)?;
        if env.format != FORMAT {
            return Err(Error::invalid(format!("not a model file: {:?}", env.format)));
        }
        if env.version != VERSION {
            return Err(Error::invalid(format!("unsupported model version {}", env.version)));
        }
        match &env.body {
            SavedModel::Autoencoder(ae) => ae.validate()?,
            SavedModel::Classifier(_) => {}
        }
        Ok(env.body)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_round_trip() {
        let ae = SavedModel::Autoencoder(Autoencoder::new(13, 8, 4, 3));
        let s = ae.to_json().unwrap();
        assert!(s.contains("\"format\":\"hyfl-model\""));
        assert_eq!(SavedModel::from_json(&s).unwrap(), ae);

        let lr = SavedModel::Classifier(Classifier::LogReg(LinearModel::zeros(3, LinearLoss::Logistic)));
        assert_eq!(SavedModel::from_json(&lr.to_json().unwrap()).unwrap(), lr);
    }

    #[test]
    fn rejects_other_versions() {
        let s = SavedModel::Autoencoder(Autoencoder::new(13, 8, 4, 3))
            .to_json()
            .unwrap()
            .replace("\"version\":1", "\"version\":9");
        assert!(SavedModel::from_json(&s).is_err());
    }
}
