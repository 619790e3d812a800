//! Parameter checkpoints.
//!
//! A checkpoint is a single JSON document:
//!
//! ```json
//! {
//!   "format": "deepstate-checkpoint",
//!   "version": 1,
//!   "config": { "observed_dim": 1, "exogenous_dim": 3, ... },
//!   "target_names": ["x:load"],
//!   "exogenous_names": ["u:temp", ...],
//!   "target_scaling": { "mean": [...], "std": [...] },
//!   "exogenous_scaling": { "mean": [...], "std": [...] },
//!   "tensors": [ { "name": "gru.reset.weight", "shape": [104, 100], "values": [...] }, ... ]
//! }
//! ```
//!
//! Tensors appear in canonical order (see [`super::Weights::named`]) and
//! values are written in shortest round-trip form, so loading a saved
//! checkpoint reproduces every parameter bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::{init_params, ModelParams};
use crate::error::{Error, Result};
use crate::eval::Standardizer;
use crate::tensor::Tensor;

pub const CHECKPOINT_FORMAT: &str = "deepstate-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredTensor {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    format: String,
    version: u32,
    pub config: ModelConfig,
    #[serde(default)]
    pub target_names: Vec<String>,
    #[serde(default)]
    pub exogenous_names: Vec<String>,
    #[serde(default)]
    pub target_scaling: Option<Standardizer>,
    #[serde(default)]
    pub exogenous_scaling: Option<Standardizer>,
    tensors: Vec<StoredTensor>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: params.config.clone(),
            target_names: Vec::new(),
            exogenous_names: Vec::new(),
            target_scaling: None,
            exogenous_scaling: None,
            tensors: params
                .named_tensors()
                .into_iter()
                .map(|(name, t)| StoredTensor {
                    name,
                    shape: t.shape().to_vec(),
                    values: t.values().to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuilds the parameters, validating names and shapes against the config.
    pub fn params(&self) -> Result<ModelParams> {
        let mut params = init_params(&self.config, 0)?;
        let named = self
            .tensors
            .iter()
            .map(|s| Ok((s.name.clone(), Tensor::new(s.shape.clone(), s.values.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        params.replace_tensors(named)?;
        Ok(params)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Numeric(format!("checkpoint encoding: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)
            .map_err(|e| Error::Usage(format!("malformed checkpoint: {e}")))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Usage(format!("not a checkpoint: format `{}`", ckpt.format)));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Usage(format!(
                "unsupported checkpoint version {} (expected {})",
                ckpt.version, CHECKPOINT_VERSION
            )));
        }
        Ok(ckpt)
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let mut text = checkpoint.to_json()?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_json(&text)
}
