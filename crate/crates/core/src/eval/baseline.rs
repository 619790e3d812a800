use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::forecast::trial_rng;
use crate::tensor::Tensor;

fn check(history: &Tensor, period: usize) -> Result<()> {
    if history.rank() != 2 {
        return Err(Error::Dimension(format!("history must be [T x M], got {:?}", history.shape())));
    }
    if period == 0 || period > history.rows() {
        return Err(Error::Contract(format!(
            "season length {period} must be in [1, {}]",
            history.rows()
        )));
    }
    Ok(())
}

/// `x_{T+t-p}`, repeating the last observed season when `t > p`.
pub fn seasonal_naive_point(history: &Tensor, period: usize, horizon: usize) -> Result<Tensor> {
    check(history, period)?;
    let (len, m) = (history.rows(), history.cols());
    let mut values = Vec::with_capacity(horizon * m);
    for t in 0..horizon {
        values.extend_from_slice(history.row(len - period + t % period));
    }
    Tensor::matrix(horizon, m, values)
}

/// Root mean square of the seasonal differences `x_i - x_{i-p}` over the
/// last observed season, per dimension. Zero when fewer than `p + 1` rows
/// exist.
pub fn seasonal_residual_std(history: &Tensor, period: usize) -> Result<Vec<f64>> {
    check(history, period)?;
    let (len, m) = (history.rows(), history.cols());
    let first = (len - period).max(period);
    let count = len - first;
    Ok((0..m)
        .map(|d| {
            if count == 0 {
                return 0.0;
            }
            let ss: f64 = (first..len).map(|i| (history.get(i, d) - history.get(i - period, d)).powi(2)).sum();
            (ss / count as f64).sqrt()
        })
        .collect())
}

/// Probabilistic seasonal naive forecast, `[S x tau x M]`.
///
/// Each sample adds Gaussian noise to the point forecast with std
/// `sigma * sqrt(k + 1)` where `k = (t - 1) / p` counts completed seasons
/// and `sigma` is [`seasonal_residual_std`]. Trial `s` draws from its own
/// stream of `seed`.
pub fn seasonal_naive_baseline(history: &Tensor, period: usize, horizon: usize, trials: usize, seed: u64) -> Result<Tensor> {
    if trials == 0 {
        return Err(Error::Contract("need at least one trial".into()));
    }
    let point = seasonal_naive_point(history, period, horizon)?;
    let sigma = seasonal_residual_std(history, period)?;
    let m = history.cols();
    let mut values = Vec::with_capacity(trials * horizon * m);
    for s in 0..trials {
        let mut rng = trial_rng(seed, s);
        for t in 0..horizon {
            let widen = ((t / period + 1) as f64).sqrt();
            for d in 0..m {
                let e: f64 = rng.sample(StandardNormal);
                values.push(point.get(t, d) + sigma[d] * widen * e);
            }
        }
    }
    Tensor::new(vec![trials, horizon, m], values)
}
