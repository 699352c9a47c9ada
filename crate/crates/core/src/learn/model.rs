use serde::{Deserialize, Serialize};

use super::tree::DecisionTree;
use super::LearnError;
use crate::instrument::Signal;

pub const MODEL_FORMAT: &str = "sigdetect-tree";
pub const MODEL_VERSION: u32 = 1;

/// Serialized tree with the metadata needed to reuse it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format: String,
    pub version: u32,
    /// Feature names in index order.
    pub features: Vec<String>,
    pub trained_on: String,
    pub seed: u64,
    pub tree: DecisionTree,
}

impl SavedModel {
    pub fn new(tree: DecisionTree, trained_on: impl Into<String>, seed: u64) -> Self {
        SavedModel {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            features: Signal::names().map(str::to_string).collect(),
            trained_on: trained_on.into(),
            seed,
            tree,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let model: SavedModel =
            serde_json::from_str(text).map_err(|e| LearnError::Model(e.to_string()))?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(LearnError::Model(format!(
                "unsupported model format {} v{}",
                model.format, model.version
            )));
        }
        let expected: Vec<&str> = Signal::names().collect();
        if model.features != expected {
            return Err(LearnError::Model("feature list does not match".into()));
        }
        Ok(model)
    }
}
