//! Configuration, artifacts and the command surface.

mod commands;
mod config;
mod export;

pub use commands::{run_command, Invocation, Verb};
pub use config::{
    DataSection, EvaluateSection, ForecastSection, ModelSection, RunConfig, StdSchedule, TrainSection,
    UncertainExogenous,
};
pub use export::{export_forecast, read_forecast_csv, read_forecast_metadata, ForecastMetadata, ForecastRow, FORECAST_FORMAT};
