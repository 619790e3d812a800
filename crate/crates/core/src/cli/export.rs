use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Standardizer;
use crate::forecast::ForecastResult;
use crate::tensor::Tensor;

pub const FORECAST_FORMAT: &str = "deepstate-forecast";

/// Companion document of a quantile CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastMetadata {
    pub format: String,
    pub seed: u64,
    pub config_hash: String,
    pub trials: usize,
    pub horizon: usize,
    /// Zero-based row of the first forecast step.
    pub start_index: usize,
    pub timestamps: Vec<String>,
    pub target_names: Vec<String>,
    pub levels: Vec<f64>,
    /// `original` or `standardized`.
    pub units: String,
    /// Per-step sample mean, `[tau][M]`.
    pub sample_mean: Vec<Vec<f64>>,
    /// Per-step sample standard deviation, `[tau][M]`.
    pub sample_std: Vec<Vec<f64>>,
    pub quantile_file: String,
}

/// One row of the quantile CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastRow {
    /// 1-based forecast step.
    pub step: usize,
    pub timestamp: String,
    pub target: String,
    pub level: f64,
    pub value: f64,
}

fn nested(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn sample_std(result: &ForecastResult, mean: &Tensor) -> Tensor {
    let &[s, tau, m] = result.samples.shape() else { unreachable!() };
    let mut acc = vec![0.0; tau * m];
    for trial in result.samples.values().chunks(tau * m) {
        for ((a, v), mu) in acc.iter_mut().zip(trial).zip(mean.values()) {
            *a += (v - mu).powi(2);
        }
    }
    let denom = if s > 1 { (s - 1) as f64 } else { 1.0 };
    Tensor::new(vec![tau, m], acc.into_iter().map(|v| (v / denom).sqrt()).collect()).expect("shape")
}

/// Writes `<stem>.csv` (`step,timestamp,target,level,value`, one row per
/// step, level and target) and `<stem>.json` into `dir`. With a
/// standardizer, quantiles and summaries are mapped back to original units.
/// Values carry 17 significant digits.
#[allow(clippy::too_many_arguments)]
pub fn export_forecast(
    result: &ForecastResult,
    scaler: Option<&Standardizer>,
    target_names: &[String],
    timestamps: &[String],
    config_hash: &str,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<(PathBuf, PathBuf)> {
    let (tau, m) = (result.horizon(), result.samples.shape()[2]);
    if target_names.len() != m || timestamps.len() != tau {
        return Err(Error::Dimension(format!(
            "export needs {m} target names and {tau} timestamps, got {} and {}",
            target_names.len(),
            timestamps.len()
        )));
    }
    let restore = |t: &Tensor| -> Result<Tensor> {
        match scaler {
            Some(s) => s.inverse(t),
            None => Ok(t.clone()),
        }
    };
    let quantiles = result.quantiles.iter().map(restore).collect::<Result<Vec<_>>>()?;
    let mean = result.mean();
    let std = sample_std(result, &mean);
    let std = match scaler {
        Some(s) => Tensor::new(
            std.shape().to_vec(),
            std.values().iter().enumerate().map(|(i, v)| v * s.std[i % m]).collect(),
        )?,
        None => std,
    };

    let mut csv = String::from("step,timestamp,target,level,value\n");
    for t in 0..tau {
        for (level, q) in result.levels.iter().zip(&quantiles) {
            for (d, name) in target_names.iter().enumerate() {
                let _ = writeln!(csv, "{},{},{name},{level},{:.16e}", t + 1, timestamps[t], q.get(t, d));
            }
        }
    }
    let dir = dir.as_ref();
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let meta = ForecastMetadata {
        format: FORECAST_FORMAT.to_string(),
        seed: result.seed,
        config_hash: config_hash.to_string(),
        trials: result.trials(),
        horizon: tau,
        start_index: result.start,
        timestamps: timestamps.to_vec(),
        target_names: target_names.to_vec(),
        levels: result.levels.clone(),
        units: if scaler.is_some() { "original" } else { "standardized" }.to_string(),
        sample_mean: nested(&restore(&mean)?),
        sample_std: nested(&std),
        quantile_file: format!("{stem}.csv"),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Numeric(format!("metadata encoding: {e}")))?;
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    std::fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
    Ok((csv_path, json_path))
}

pub fn read_forecast_csv(path: impl AsRef<Path>) -> Result<Vec<ForecastRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let r = record.map_err(|e| Error::Parse { row, column: 1, message: e.to_string() })?;
        let num = |j: usize| -> Result<f64> {
            r.get(j)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse { row, column: j + 1, message: "expected a number".into() })
        };
        rows.push(ForecastRow {
            step: r.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
                row,
                column: 1,
                message: "expected a step index".into(),
            })?,
            timestamp: r.get(1).unwrap_or_default().to_string(),
            target: r.get(2).unwrap_or_default().to_string(),
            level: num(3)?,
            value: num(4)?,
        });
    }
    Ok(rows)
}

pub fn read_forecast_metadata(path: impl AsRef<Path>) -> Result<ForecastMetadata> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}
