//! Monte Carlo multi-step forecasting.
//!
//! The observed history is first evaluated by [`warm_up`]; every trial
//! then samples its own trajectory, including draws of uncertain exogenous
//! inputs, and [`summarize_quantiles`] reduces the trials to bands.

mod exogenous;
mod monte_carlo;
mod quantiles;

pub use exogenous::{linear_std_schedule, sample_exogenous, ExogenousKind, ExogenousSpec, ExogenousVariable};
pub use monte_carlo::{monte_carlo_forecast, trial_rng, warm_up, ForecastOptions, ForecastResult, WarmState};
pub use quantiles::{band_levels, quantile_sorted, summarize_quantiles, DEFAULT_BANDS};
