use crate::error::{Error, Result};

/// CRPS of the empirical distribution of `samples` at `truth`, via the
/// energy form `E|Y - x| - E|Y - Y'| / 2` evaluated on sorted samples.
pub fn crps_sample(samples: &[f64], truth: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Contract("CRPS needs at least one sample".into()));
    }
    if !truth.is_finite() || samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Domain("CRPS inputs must be finite".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(crps_sorted(&sorted, truth))
}

/// [`crps_sample`] for samples already sorted ascending.
pub fn crps_sorted(sorted: &[f64], truth: f64) -> f64 {
    let n = sorted.len() as f64;
    let mut abs_err = 0.0;
    let mut spread = 0.0;
    for (i, &y) in sorted.iter().enumerate() {
        abs_err += (y - truth).abs();
        spread += (2.0 * (i as f64 + 1.0) - n - 1.0) * y;
    }
    (abs_err / n - spread / (n * n)).max(0.0)
}

/// Closed-form CRPS of `N(mean, std^2)` at `truth`.
pub fn crps_gaussian(mean: f64, std: f64, truth: f64) -> Result<f64> {
    if !(std > 0.0) {
        return Err(Error::Domain(format!("std must be positive, got {std}")));
    }
    let z = (truth - mean) / std;
    let cdf = 0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    Ok(std * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::f64::consts::PI.sqrt()))
}
