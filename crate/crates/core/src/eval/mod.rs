//! Probabilistic scoring and backtesting.

mod baseline;
mod crps;
mod rolling;
mod standardize;

pub use baseline::{seasonal_naive_baseline, seasonal_naive_point, seasonal_residual_std};
pub use crps::{crps_gaussian, crps_sample, crps_sorted};
pub use rolling::{crps_by_dim, rolling_window_evaluate, EvalReport, Forecaster, ModelForecaster, SeasonalNaive, SpecBuilder};
pub use standardize::{standardize_series, Standardizer};
