//! The generative and inference networks of the deep state space model.
//!
//! * a GRU carries the deterministic state `h_t` from `(h_{t-1}, x_{t-1})`;
//! * the transition heads give `p(z_t | z_{t-1}, h_t)` as a diagonal Gaussian;
//! * the emission heads give `p(x_t | z_t, h_t, u_t)`;
//! * the inference heads give `q(z_t | z_{t-1}, x_t, h_t, u_t)`;
//! * an optional relevance network produces one global weight per exogenous
//!   variable, applied to `u_t` before it reaches any head.

mod checkpoint;
mod config;
mod layers;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{EmissionKind, ModelConfig, TransformSpec};
pub use layers::{
    apply_relevance, ard_weights, emission_params, gru_step, inference_params, linear, mlp,
    output_transform, transition_params, GaussianParams,
};
pub use params::{init_params, GaussianHeads, Gru, Linear, Mlp, ModelParams, Weights};
