use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::loglinear::{FeatureConfig, LogLinearPolicy};
use super::vocab::{VocabError, Vocabulary};
use super::PolicyModel;

pub const CHECKPOINT_MAGIC: &str = "simdsl-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a policy checkpoint (bad magic header)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {CHECKPOINT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("unknown model kind `{0}`")]
    UnknownModel(String),
    #[error("invalid vocabulary: {0}")]
    Vocab(#[from] VocabError),
    #[error("weight index {0} outside the table")]
    WeightIndex(usize),
}

#[derive(Deserialize)]
struct Header {
    magic: Option<String>,
    version: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct File {
    magic: String,
    version: u32,
    model: String,
    features: FeatureConfig,
    copy_slots: usize,
    vocabulary: Vec<String>,
    /// Nonzero weights as `[index, value]` pairs.
    weights: Vec<(usize, f64)>,
}

const MODEL_KIND: &str = "loglinear";

impl LogLinearPolicy {
    pub fn to_json(&self) -> String {
        let file = File {
            magic: CHECKPOINT_MAGIC.to_owned(),
            version: CHECKPOINT_VERSION,
            model: MODEL_KIND.to_owned(),
            features: self.feature_config(),
            copy_slots: self.vocab().copy_slots(),
            vocabulary: self.vocab().tokens().to_vec(),
            weights: self.weights().iter().enumerate().filter(|(_, &w)| w != 0.0).map(|(i, &w)| (i, w)).collect(),
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let header: Header = serde_json::from_str(text)?;
        if header.magic.as_deref() != Some(CHECKPOINT_MAGIC) {
            return Err(CheckpointError::BadMagic);
        }
        match header.version {
            Some(CHECKPOINT_VERSION) => {}
            other => return Err(CheckpointError::UnsupportedVersion(other.unwrap_or(0))),
        }
        let file: File = serde_json::from_str(text)?;
        if file.model != MODEL_KIND {
            return Err(CheckpointError::UnknownModel(file.model));
        }
        let vocab = Vocabulary::from_tokens(file.vocabulary, file.copy_slots)?;
        let mut model = LogLinearPolicy::new(vocab, file.features);
        let weights = model.weights_mut();
        for (i, w) in file.weights {
            *weights.get_mut(i).ok_or(CheckpointError::WeightIndex(i))? = w;
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        Ok(std::fs::write(path, self.to_json())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
