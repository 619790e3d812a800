use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maps an unconstrained network output onto a parameter's domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    #[default]
    Real,
    Positive,
    /// `(upper - lower) * sigmoid(raw) + lower`
    Bounded { lower: f64, upper: f64 },
}

impl TransformSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TransformSpec::Bounded { lower, upper } if !(lower < upper) => Err(Error::Contract(
                format!("bounded transform needs lower < upper, got [{lower}, {upper}]"),
            )),
            TransformSpec::Bounded { lower, upper } if !lower.is_finite() || !upper.is_finite() => {
                Err(Error::Contract("bounded transform limits must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmissionKind {
    #[default]
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Observed dimension `M`.
    pub observed_dim: usize,
    /// Exogenous dimension `D`.
    pub exogenous_dim: usize,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    /// GRU state size.
    #[serde(default = "default_width")]
    pub hidden_dim: usize,
    /// Hidden width of every two-layer head.
    #[serde(default = "default_width")]
    pub mlp_dim: usize,
    #[serde(default)]
    pub emission: EmissionKind,
    /// Transform of the emission mean; the scale always uses softplus.
    #[serde(default)]
    pub mean_transform: TransformSpec,
    #[serde(default = "default_true")]
    pub use_ard: bool,
    #[serde(default)]
    pub transition_uses_exogenous: bool,
}

fn default_latent_dim() -> usize {
    10
}

fn default_width() -> usize {
    100
}

fn default_true() -> bool {
    true
}

impl ModelConfig {
    pub fn new(observed_dim: usize, exogenous_dim: usize) -> Self {
        Self {
            observed_dim,
            exogenous_dim,
            latent_dim: default_latent_dim(),
            hidden_dim: default_width(),
            mlp_dim: default_width(),
            emission: EmissionKind::Gaussian,
            mean_transform: TransformSpec::Real,
            use_ard: true,
            transition_uses_exogenous: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("observed_dim", self.observed_dim),
            ("exogenous_dim", self.exogenous_dim),
            ("latent_dim", self.latent_dim),
            ("hidden_dim", self.hidden_dim),
            ("mlp_dim", self.mlp_dim),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("model.{name} must be at least 1")));
            }
        }
        self.mean_transform
            .validate()
            .map_err(|e| Error::Config(format!("model.mean_transform: {e}")))
    }

    pub(crate) fn transition_input_dim(&self) -> usize {
        self.latent_dim
            + self.hidden_dim
            + if self.transition_uses_exogenous {
                self.exogenous_dim
            } else {
                0
            }
    }

    pub(crate) fn emission_input_dim(&self) -> usize {
        self.latent_dim + self.hidden_dim + self.exogenous_dim
    }

    pub(crate) fn inference_input_dim(&self) -> usize {
        self.latent_dim + self.observed_dim + self.hidden_dim + self.exogenous_dim
    }
}
