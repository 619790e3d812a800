//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! output_dir = "out"
//!
//! [data]
//! path = "series.csv"
//! time_features = ["hour_of_day", "day_of_week"]
//! train_rows = 1800
//!
//! [model]
//! latent_dim = 4
//! hidden_dim = 16
//!
//! [train]
//! window = 96
//! iterations = 400
//!
//! [forecast]
//! horizon = 48
//! trials = 1000
//!
//! [[forecast.exogenous]]
//! name = "u:temperature"
//! std = 1.0
//! schedule = "linear"
//!
//! [evaluate]
//! horizon = 24
//! windows = 4
//! baseline_period = 24
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::TimeFeature;
use crate::error::{Error, Result};
use crate::forecast::{band_levels, linear_std_schedule, DEFAULT_BANDS};
use crate::model::{ModelConfig, TransformSpec};
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub forecast: ForecastSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    #[serde(default)]
    pub time_features: Vec<TimeFeature>,
    /// Target rows used for training and as the first evaluation origin;
    /// defaults to every observed row.
    #[serde(default)]
    pub train_rows: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub mlp_dim: usize,
    pub mean_transform: TransformSpec,
    pub use_ard: bool,
    pub transition_uses_exogenous: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::new(1, 1);
        Self {
            latent_dim: m.latent_dim,
            hidden_dim: m.hidden_dim,
            mlp_dim: m.mlp_dim,
            mean_transform: m.mean_transform,
            use_ard: m.use_ard,
            transition_uses_exogenous: m.transition_uses_exogenous,
        }
    }
}

impl ModelSection {
    pub fn model_config(&self, observed_dim: usize, exogenous_dim: usize) -> ModelConfig {
        ModelConfig {
            latent_dim: self.latent_dim,
            hidden_dim: self.hidden_dim,
            mlp_dim: self.mlp_dim,
            mean_transform: self.mean_transform,
            use_ard: self.use_ard,
            transition_uses_exogenous: self.transition_uses_exogenous,
            ..ModelConfig::new(observed_dim, exogenous_dim)
        }
    }
}

/// Training options; the seed comes from the top level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub window: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub samples: usize,
    pub checkpoint_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            window: t.window,
            batch_size: t.batch_size,
            iterations: t.iterations,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            samples: t.samples,
            checkpoint_every: t.checkpoint_every,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            window: self.window,
            batch_size: self.batch_size,
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            samples: self.samples,
            seed,
            checkpoint_every: self.checkpoint_every,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StdSchedule {
    /// Grows linearly from 0 at the first step to `std` at the last.
    #[default]
    Linear,
    Constant,
}

/// An exogenous variable that is uncertain over the forecast horizon.
/// Variables not listed are known exactly. `std` is in standardized units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertainExogenous {
    pub name: String,
    pub std: f64,
    #[serde(default)]
    pub schedule: StdSchedule,
}

impl UncertainExogenous {
    pub fn schedule_values(&self, horizon: usize) -> Vec<f64> {
        match self.schedule {
            StdSchedule::Linear => linear_std_schedule(horizon, self.std),
            StdSchedule::Constant => vec![self.std; horizon],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    /// Steps past the last observation; defaults to every row with
    /// exogenous values but no targets.
    pub horizon: Option<usize>,
    pub trials: usize,
    pub levels: Vec<f64>,
    pub chunk_size: usize,
    pub parallel: bool,
    /// Export in standardized units instead of the original ones.
    pub standardized_output: bool,
    pub exogenous: Vec<UncertainExogenous>,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            horizon: None,
            trials: 1000,
            levels: band_levels(&DEFAULT_BANDS),
            chunk_size: 64,
            parallel: true,
            standardized_output: false,
            exogenous: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub horizon: usize,
    pub windows: usize,
    /// Monte Carlo trials per window.
    pub trials: usize,
    /// Season length of the seasonal naive baseline; no baseline when unset.
    pub baseline_period: Option<usize>,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            horizon: 168,
            windows: 4,
            trials: 1000,
            baseline_period: None,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads, validates and resolves relative paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.data.path = base.join(&config.data.path);
        config.output_dir = base.join(&config.output_dir);
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        self.model.model_config(1, 1).validate()?;
        if m.latent_dim == 0 || m.hidden_dim == 0 || m.mlp_dim == 0 {
            return Err(config_err("model dimensions must be at least 1"));
        }
        self.train.train_config(self.seed).validate()?;
        if self.data.train_rows == Some(0) {
            return Err(config_err("data.train_rows must be at least 1"));
        }
        let f = &self.forecast;
        if f.horizon == Some(0) {
            return Err(config_err("forecast.horizon must be at least 1"));
        }
        if f.trials == 0 || f.chunk_size == 0 {
            return Err(config_err("forecast.trials and forecast.chunk_size must be at least 1"));
        }
        if f.levels.is_empty() {
            return Err(config_err("forecast.levels must not be empty"));
        }
        if let Some(l) = f.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(config_err(format!("forecast.levels: {l} is outside (0, 1)")));
        }
        for (i, u) in f.exogenous.iter().enumerate() {
            if !(u.std >= 0.0) || !u.std.is_finite() {
                return Err(config_err(format!("forecast.exogenous[{i}].std must be finite and >= 0")));
            }
            if f.exogenous[..i].iter().any(|v| v.name == u.name) {
                return Err(config_err(format!("forecast.exogenous: `{}` listed twice", u.name)));
            }
        }
        let e = &self.evaluate;
        if e.horizon == 0 || e.windows == 0 || e.trials == 0 {
            return Err(config_err("evaluate.horizon, windows and trials must be at least 1"));
        }
        if e.baseline_period == Some(0) {
            return Err(config_err("evaluate.baseline_period must be at least 1"));
        }
        let mut features = self.data.time_features.clone();
        features.sort_by_key(|f| f.name());
        if features.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err("data.time_features lists a feature twice"));
        }
        Ok(())
    }

    /// SHA-256 of the compact JSON encoding, hex encoded. Field order is
    /// fixed by the type, so equal configs hash equally.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config is always serializable");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
