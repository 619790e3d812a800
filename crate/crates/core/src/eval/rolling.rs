use std::fmt::Write as _;

use super::baseline::seasonal_naive_baseline;
use super::crps::crps_sorted;
use crate::error::{Error, Result};
use crate::forecast::{monte_carlo_forecast, ExogenousSpec, ForecastOptions};
use crate::model::ModelParams;
use crate::tensor::Tensor;

/// Produces `[S x tau x M]` samples from a history that ends at the
/// forecast origin.
pub trait Forecaster: Sync {
    fn name(&self) -> &str;

    /// `x_history` and `u_history` hold every row before the origin;
    /// `u_future` holds the exogenous rows of the forecast window.
    fn forecast(&self, x_history: &Tensor, u_history: &Tensor, u_future: &Tensor, window: usize) -> Result<Tensor>;
}

/// Builds the exogenous distribution of a window from its `[tau x D]`
/// future inputs.
pub type SpecBuilder<'a> = Box<dyn Fn(&Tensor) -> Result<ExogenousSpec> + Send + Sync + 'a>;

/// The trained model with fixed forecast options. Window `i` uses seed
/// `options.seed + i`.
pub struct ModelForecaster<'a> {
    pub params: &'a ModelParams,
    pub options: ForecastOptions,
    pub exogenous: SpecBuilder<'a>,
}

impl<'a> ModelForecaster<'a> {
    /// Future exogenous inputs known exactly.
    pub fn known(params: &'a ModelParams, options: ForecastOptions) -> Self {
        Self {
            params,
            options,
            exogenous: Box::new(ExogenousSpec::known),
        }
    }

    /// Columns in `uncertain` get a std growing linearly to `max_std`.
    pub fn with_linear_uncertainty(params: &'a ModelParams, options: ForecastOptions, uncertain: Vec<usize>, max_std: f64) -> Self {
        Self {
            params,
            options,
            exogenous: Box::new(move |u| ExogenousSpec::with_linear_uncertainty(u, &uncertain, max_std)),
        }
    }
}

impl Forecaster for ModelForecaster<'_> {
    fn name(&self) -> &str {
        "model"
    }

    fn forecast(&self, x_history: &Tensor, u_history: &Tensor, u_future: &Tensor, window: usize) -> Result<Tensor> {
        let spec = (self.exogenous)(u_future)?;
        let options = ForecastOptions {
            seed: self.options.seed.wrapping_add(window as u64),
            ..self.options.clone()
        };
        Ok(monte_carlo_forecast(self.params, x_history, u_history, &spec, &options)?.samples)
    }
}

pub struct SeasonalNaive {
    pub period: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Forecaster for SeasonalNaive {
    fn name(&self) -> &str {
        "seasonal_naive"
    }

    fn forecast(&self, x_history: &Tensor, _u: &Tensor, u_future: &Tensor, window: usize) -> Result<Tensor> {
        seasonal_naive_baseline(
            x_history,
            self.period,
            u_future.rows(),
            self.trials,
            self.seed.wrapping_add(window as u64),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub forecaster: String,
    pub horizon: usize,
    /// Row index of the first forecast origin.
    pub train_end: usize,
    /// `crps[i][d]`: mean CRPS of window `i`, dimension `d`, over the horizon.
    pub crps: Vec<Vec<f64>>,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

impl EvalReport {
    pub fn windows(&self) -> usize {
        self.crps.len()
    }

    pub fn origin(&self, window: usize) -> usize {
        self.train_end + window * self.horizon
    }

    /// Unweighted mean over dimensions, per window.
    pub fn window_means(&self) -> Vec<f64> {
        self.crps.iter().map(|w| w.iter().sum::<f64>() / w.len() as f64).collect()
    }

    pub fn mean(&self) -> f64 {
        let w = self.window_means();
        w.iter().sum::<f64>() / w.len() as f64
    }

    /// Sample standard deviation of the window means; zero for one window.
    pub fn std_dev(&self) -> f64 {
        let w = self.window_means();
        if w.len() < 2 {
            return 0.0;
        }
        let m = self.mean();
        (w.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (w.len() - 1) as f64).sqrt()
    }

    /// `window,origin,dim,crps` rows, then one `mean` and one `sd` row with
    /// `dim` set to `all`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("window,origin,dim,crps\n");
        for (i, dims) in self.crps.iter().enumerate() {
            for (d, v) in dims.iter().enumerate() {
                let _ = writeln!(out, "{i},{},{d},{v}", self.origin(i));
            }
        }
        let _ = writeln!(out, "mean,,all,{}", self.mean());
        let _ = writeln!(out, "sd,,all,{}", self.std_dev());
        out
    }

    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "forecaster: {}", self.forecaster);
        let _ = writeln!(out, "horizon: {}  windows: {}  first origin: {}", self.horizon, self.windows(), self.train_end);
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed: {seed}");
        }
        if let Some(hash) = &self.config_hash {
            let _ = writeln!(out, "config sha256: {hash}");
        }
        let _ = writeln!(out, "{:>8}  {:>8}  {:>12}", "window", "origin", "crps");
        for (i, m) in self.window_means().iter().enumerate() {
            let _ = writeln!(out, "{i:>8}  {:>8}  {m:>12.6}", self.origin(i));
        }
        let _ = writeln!(out, "CRPS mean (S.D. across windows): {:.6} ({:.6})", self.mean(), self.std_dev());
        out
    }
}

/// Mean CRPS per dimension of `[S x tau x M]` samples against `[tau x M]` truth.
pub fn crps_by_dim(samples: &Tensor, truth: &Tensor) -> Result<Vec<f64>> {
    let &[trials, horizon, m] = samples.shape() else {
        return Err(Error::Dimension(format!("samples must be [S x tau x M], got {:?}", samples.shape())));
    };
    if truth.shape() != [horizon, m] {
        return Err(Error::Dimension(format!(
            "truth has shape {:?}, samples imply [{horizon}, {m}]",
            truth.shape()
        )));
    }
    if trials == 0 {
        return Err(Error::Contract("CRPS needs at least one sample".into()));
    }
    if let Some(i) = samples.first_non_finite() {
        return Err(Error::Numeric(format!("forecast sample {i} is not finite")));
    }
    let mut out = vec![0.0; m];
    let mut column = vec![0.0; trials];
    for t in 0..horizon {
        for d in 0..m {
            for (s, slot) in column.iter_mut().enumerate() {
                *slot = samples.values()[(s * horizon + t) * m + d];
            }
            column.sort_by(f64::total_cmp);
            out[d] += crps_sorted(&column, truth.get(t, d));
        }
    }
    Ok(out.into_iter().map(|v| v / horizon as f64).collect())
}

/// Backtests `forecaster` over `windows` consecutive non-overlapping
/// windows of `horizon` steps, the first starting at row `train_end`.
/// Window `i` sees only rows before `train_end + i * horizon`.
pub fn rolling_window_evaluate(
    forecaster: &dyn Forecaster,
    x: &Tensor,
    u: &Tensor,
    train_end: usize,
    horizon: usize,
    windows: usize,
) -> Result<EvalReport> {
    if horizon == 0 || windows == 0 || train_end == 0 {
        return Err(Error::Contract("horizon, windows and training length must be at least 1".into()));
    }
    let required = train_end + windows * horizon;
    if x.rows() < required || u.rows() < required {
        return Err(Error::Contract(format!(
            "rolling evaluation needs {required} rows ({train_end} + {windows} x {horizon}), have {} targets and {} exogenous",
            x.rows(),
            u.rows()
        )));
    }
    let mut crps = Vec::with_capacity(windows);
    for i in 0..windows {
        let origin = train_end + i * horizon;
        let x_hist = x.slice_rows(0, origin)?;
        let u_hist = u.slice_rows(0, origin)?;
        let u_future = u.slice_rows(origin, origin + horizon)?;
        let truth = x.slice_rows(origin, origin + horizon)?;
        let samples = forecaster.forecast(&x_hist, &u_hist, &u_future, i)?;
        crps.push(crps_by_dim(&samples, &truth)?);
    }
    Ok(EvalReport {
        forecaster: forecaster.name().to_string(),
        horizon,
        train_end,
        crps,
        seed: None,
        config_hash: None,
    })
}
