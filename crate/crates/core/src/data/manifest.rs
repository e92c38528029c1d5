use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, SplitIndices};
use crate::error::{Error, Result};

/// Reproducibility record for a dataset snapshot: where it came from, how
/// labels were indexed and how it was split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: String,
    pub label_map: Vec<String>,
    pub n: usize,
    pub n_classes: usize,
    pub n_mislabeled: Option<usize>,
    pub seed: Option<u64>,
    pub split: Option<SplitIndices>,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl DatasetManifest {
    pub fn describe(dataset: &Dataset, source: impl Into<String>, seed: Option<u64>) -> Self {
        Self {
            source: source.into(),
            label_map: dataset.label_names().to_vec(),
            n: dataset.n(),
            n_classes: dataset.n_classes(),
            n_mislabeled: dataset.n_mislabeled(),
            seed,
            split: None,
            params: serde_json::Value::Null,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
