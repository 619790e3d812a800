use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeDelta};

use super::features::{time_features, TimeFeature};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A single multivariate series with aligned exogenous inputs.
///
/// Targets cover rows `0..train_len`; exogenous inputs cover every row, so
/// rows past `train_len` carry the known future covariates.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesDataset {
    pub timestamps: Vec<NaiveDateTime>,
    pub target_names: Vec<String>,
    pub exogenous_names: Vec<String>,
    /// `[T x M]`
    pub x: Tensor,
    /// `[N x D]`
    pub u: Tensor,
}

impl TimeSeriesDataset {
    /// Observed length `T`.
    pub fn train_len(&self) -> usize {
        self.x.rows()
    }

    /// Total rows `N`, including exogenous-only rows.
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Rows available for forecasting past `T`.
    pub fn horizon_capacity(&self) -> usize {
        self.len() - self.train_len()
    }

    pub fn step(&self) -> Option<TimeDelta> {
        (self.len() >= 2).then(|| self.timestamps[1] - self.timestamps[0])
    }

    /// Timestamp of row `index`, extrapolated past the last row.
    pub fn timestamp_at(&self, index: usize) -> Option<NaiveDateTime> {
        if let Some(ts) = self.timestamps.get(index) {
            return Some(*ts);
        }
        let step = self.step()?;
        let extra = i32::try_from(index + 1 - self.len()).ok()?;
        self.timestamps.last().map(|last| *last + step * extra)
    }
}

const FORMATS: [&str; 4] = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"];

pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    let text = text.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(text) {
        return Some(ts.naive_utc());
    }
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(text, f).ok())
        .or_else(|| NaiveDate::parse_from_str(text, "%Y-%m-%d").ok()?.and_hms_opt(0, 0, 0))
}

fn parse_error(row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        row,
        column,
        message: message.into(),
    }
}

/// Reads a dataset CSV.
///
/// The header names a timestamp column first, then target columns
/// prefixed `x:` and exogenous columns prefixed `u:` in any order. Target
/// cells may be blank only in trailing rows; the last row with targets
/// defines `T`. Requested time features are appended as exogenous columns
/// named `u:<feature>`. Rows and columns in errors are 1-based, counting
/// the header as row 1.
pub fn load_dataset(path: impl AsRef<Path>, features: &[TimeFeature]) -> Result<TimeSeriesDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, features)
}

pub fn parse_dataset(text: &str, features: &[TimeFeature]) -> Result<TimeSeriesDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_error(1, 1, e.to_string()))?
        .clone();
    if header.len() < 2 {
        return Err(parse_error(1, 1, "need a timestamp column and at least one target column"));
    }
    let mut target_cols = Vec::new();
    let mut exo_cols = Vec::new();
    for (j, name) in header.iter().enumerate().skip(1) {
        if name.starts_with("x:") && name.len() > 2 {
            target_cols.push(j);
        } else if name.starts_with("u:") && name.len() > 2 {
            exo_cols.push(j);
        } else {
            return Err(parse_error(1, j + 1, format!("column `{name}` must be prefixed `x:` or `u:`")));
        }
    }
    if target_cols.is_empty() {
        return Err(parse_error(1, 1, "no `x:` target columns"));
    }
    let mut names: Vec<String> = header.iter().map(str::to_string).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(parse_error(1, 1, format!("duplicate column `{}`", w[0])));
    }

    let mut timestamps = Vec::new();
    let mut targets: Vec<Option<Vec<f64>>> = Vec::new();
    let mut exo = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| parse_error(row, 1, e.to_string()))?;
        if record.len() != header.len() {
            return Err(parse_error(row, 1, format!("expected {} fields, found {}", header.len(), record.len())));
        }
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| parse_error(row, 1, format!("unrecognized timestamp `{}`", &record[0])))?;
        let cell = |j: usize| -> Result<f64> {
            let v: f64 = record[j]
                .parse()
                .map_err(|_| parse_error(row, j + 1, format!("`{}` is not a number", &record[j])))?;
            if !v.is_finite() {
                return Err(parse_error(row, j + 1, format!("`{}` is not finite", &record[j])));
            }
            Ok(v)
        };
        let blank = target_cols.iter().filter(|&&j| record[j].is_empty()).count();
        targets.push(if blank == target_cols.len() {
            None
        } else {
            Some(target_cols.iter().map(|&j| cell(j)).collect::<Result<_>>()?)
        });
        for &j in &exo_cols {
            exo.push(cell(j)?);
        }
        timestamps.push(ts);
    }
    if timestamps.is_empty() {
        return Err(parse_error(2, 1, "no data rows"));
    }
    for i in 1..timestamps.len() {
        let step = timestamps[1] - timestamps[0];
        let delta = timestamps[i] - timestamps[i - 1];
        if delta == TimeDelta::zero() {
            return Err(Error::Contract(format!("duplicate timestamp {}", timestamps[i])));
        }
        if delta < TimeDelta::zero() {
            return Err(Error::Contract(format!("timestamp {} is earlier than its predecessor", timestamps[i])));
        }
        if delta != step {
            return Err(Error::Contract(format!(
                "irregular spacing at {}: gap of {delta} after {}, expected {step}",
                timestamps[i],
                timestamps[i - 1]
            )));
        }
    }

    let train_len = targets
        .iter()
        .rposition(Option::is_some)
        .map(|i| i + 1)
        .ok_or_else(|| parse_error(2, target_cols[0] + 1, "no target values"))?;
    let mut x = Vec::with_capacity(train_len * target_cols.len());
    for (i, row) in targets[..train_len].iter().enumerate() {
        match row {
            Some(values) => x.extend_from_slice(values),
            None => return Err(parse_error(i + 2, target_cols[0] + 1, "missing target inside the observed period")),
        }
    }

    let n = timestamps.len();
    let d_file = exo_cols.len();
    let generated = time_features(&timestamps, features);
    let d = d_file + features.len();
    let mut u = Vec::with_capacity(n * d);
    for i in 0..n {
        u.extend_from_slice(&exo[i * d_file..(i + 1) * d_file]);
        u.extend_from_slice(&generated[i * features.len()..(i + 1) * features.len()]);
    }
    let mut exogenous_names: Vec<String> = exo_cols.iter().map(|&j| header[j].to_string()).collect();
    for f in features {
        let name = format!("u:{}", f.name());
        if exogenous_names.contains(&name) {
            return Err(Error::Config(format!("time feature `{name}` duplicates a file column")));
        }
        exogenous_names.push(name);
    }
    Ok(TimeSeriesDataset {
        timestamps,
        target_names: target_cols.iter().map(|&j| header[j].to_string()).collect(),
        exogenous_names,
        x: Tensor::matrix(train_len, target_cols.len(), x)?,
        u: Tensor::matrix(n, d, u)?,
    })
}
