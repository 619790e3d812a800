//! Dataset ingestion.

mod dataset;
mod features;

pub use dataset::{load_dataset, parse_dataset, parse_timestamp, TimeSeriesDataset};
pub use features::{time_features, TimeFeature};
