//! Versioned JSON container for the three trained models and the
//! aggregation weights.
//!
//! ```json
//! {
//!   "format_version": "1",
//!   "speech": { GbdtModel } | null,
//!   "face": { SvmEnsemble } | null,
//!   "motor": { GbdtModel } | null,
//!   "weights": { "w_speech": .., "w_face": .., "w_motor": .., "motor_to_prob": [[x, y], ..] }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gbdt::{GbdtModel, Objective};
use super::svm::SvmEnsemble;
use super::LearnError;
use crate::screening::AggregatorWeights;

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: String,
    pub speech: Option<GbdtModel>,
    pub face: Option<SvmEnsemble>,
    pub motor: Option<GbdtModel>,
    pub weights: AggregatorWeights,
}

impl Default for ModelBundle {
    fn default() -> Self {
        ModelBundle {
            format_version: FORMAT_VERSION.into(),
            speech: None,
            face: None,
            motor: None,
            weights: AggregatorWeights::default(),
        }
    }
}

impl ModelBundle {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.format_version != FORMAT_VERSION {
            return Err(LearnError::UnknownVersion(self.format_version.clone()));
        }
        if let Some(m) = &self.speech {
            m.validate()?;
            if m.objective != Objective::Logistic {
                return Err(LearnError::CorruptModel("speech model must be logistic".into()));
            }
        }
        if let Some(m) = &self.motor {
            m.validate()?;
            if m.objective != Objective::SquaredError {
                return Err(LearnError::CorruptModel("motor model must be a regressor".into()));
            }
        }
        if let Some(e) = &self.face {
            e.validate()?;
        }
        self.weights.validate().map_err(|e| LearnError::CorruptModel(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<ModelBundle, LearnError> {
        let value: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| LearnError::CorruptModel(e.to_string()))?;
        match value.get("format_version").and_then(|v| v.as_str()) {
            Some(FORMAT_VERSION) => {}
            Some(other) => return Err(LearnError::UnknownVersion(other.to_string())),
            None => return Err(LearnError::CorruptModel("missing format_version".into())),
        }
        let bundle: ModelBundle =
            serde_json::from_value(value).map_err(|e| LearnError::CorruptModel(e.to_string()))?;
        bundle.validate()?;
        Ok(bundle)
    }
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<(), LearnError> {
    std::fs::write(path, bundle.to_json())?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle, LearnError> {
    ModelBundle::from_json(&std::fs::read(path)?)
}
