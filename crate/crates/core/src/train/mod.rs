//! Variational training: the SGVB objective, Adam and the shingled
//! training loop.

mod adam;
mod objective;
mod trainer;
mod window;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use objective::{
    elbo_sgvb, gaussian_log_pdf, gaussian_log_pdf_value, kl_diag_gaussian, kl_diag_gaussian_value,
    loss_and_gradients, loss_value, reparameterize, ElboEstimate, FrozenNoise, GaussianNoise,
    NoiseSource,
};
pub use trainer::{loss_history_csv, smoothed, train, train_from, TrainConfig, TrainOutcome};
pub use window::{sample_window, window_at, Window, WindowBatch};
