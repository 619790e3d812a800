//! Deep state space models for probabilistic time series forecasting.
//!
//! A GRU summarizes the observed past, a Gaussian latent state evolves
//! through a learned transition, and observations are emitted from both.
//! Training maximizes a sampled evidence lower bound with an amortized
//! inference network. Exogenous inputs pass through learned relevance
//! weights, and forecasts are sample paths that may include draws of
//! uncertain future inputs.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod model;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
