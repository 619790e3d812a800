use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Central interval widths drawn as forecast bands.
pub const DEFAULT_BANDS: [f64; 5] = [0.2, 0.3, 0.5, 0.8, 0.95];

/// Lower and upper quantile levels of each central band plus the median,
/// sorted ascending.
pub fn band_levels(bands: &[f64]) -> Vec<f64> {
    let mut levels: Vec<f64> = bands
        .iter()
        .flat_map(|b| [0.5 - b / 2.0, 0.5 + b / 2.0])
        .chain([0.5])
        .map(|l| (l * 1e12).round() / 1e12)
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    levels
}

/// Linear interpolation between order statistics: position `(n-1) p`.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * level;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Empirical quantiles of `[S x tau x M]` samples, one `[tau x M]` tensor
/// per level.
pub fn summarize_quantiles(samples: &Tensor, levels: &[f64]) -> Result<Vec<Tensor>> {
    if levels.is_empty() {
        return Err(Error::Contract("no quantile levels requested".into()));
    }
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::Contract(format!("quantile level {l} outside (0, 1)")));
    }
    let &[trials, horizon, dim] = samples.shape() else {
        return Err(Error::Dimension(format!(
            "samples must be [S x tau x M], got {:?}",
            samples.shape()
        )));
    };
    if trials == 0 {
        return Err(Error::Contract("need at least one sample".into()));
    }
    let cells = horizon * dim;
    let mut out: Vec<Vec<f64>> = vec![vec![0.0; cells]; levels.len()];
    let mut column = vec![0.0; trials];
    for cell in 0..cells {
        for (s, slot) in column.iter_mut().enumerate() {
            *slot = samples.values()[s * cells + cell];
        }
        column.sort_by(f64::total_cmp);
        for (q, level) in out.iter_mut().zip(levels) {
            q[cell] = quantile_sorted(&column, *level);
        }
    }
    out.into_iter()
        .map(|v| Tensor::new(vec![horizon, dim], v))
        .collect()
}
