use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExogenousKind {
    /// Delta distribution at the center value.
    Known,
    /// `center + std_t * N(0, 1)`.
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExogenousVariable {
    pub kind: ExogenousKind,
    /// Center value at each forecast step.
    pub center: Vec<f64>,
    /// Standard deviation at each forecast step; ignored when known.
    pub std: Vec<f64>,
}

/// Distribution of every exogenous variable over the forecast horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSpec {
    pub variables: Vec<ExogenousVariable>,
}

/// `max_std * (t - 1) / (horizon - 1)` for `t = 1..=horizon`: zero at the
/// first step, `max_std` at the last. A one-step horizon gets zero.
pub fn linear_std_schedule(horizon: usize, max_std: f64) -> Vec<f64> {
    if horizon <= 1 {
        return vec![0.0; horizon];
    }
    (0..horizon)
        .map(|i| max_std * i as f64 / (horizon - 1) as f64)
        .collect()
}

impl ExogenousSpec {
    /// Every variable known exactly; `centers` is `[horizon x D]`.
    pub fn known(centers: &Tensor) -> Result<Self> {
        Self::with_schedule(centers, &[], &[])
    }

    /// Variables listed in `uncertain` become Gaussian with a linearly
    /// growing std reaching `max_std` at the final step.
    pub fn with_linear_uncertainty(centers: &Tensor, uncertain: &[usize], max_std: f64) -> Result<Self> {
        let schedule = linear_std_schedule(centers.rows(), max_std);
        Self::with_schedule(centers, uncertain, &schedule)
    }

    pub fn with_schedule(centers: &Tensor, uncertain: &[usize], schedule: &[f64]) -> Result<Self> {
        if centers.rank() != 2 {
            return Err(Error::Dimension(format!(
                "exogenous centers must be [horizon x D], got {:?}",
                centers.shape()
            )));
        }
        let (horizon, dim) = (centers.rows(), centers.cols());
        if let Some(&d) = uncertain.iter().find(|&&d| d >= dim) {
            return Err(Error::Contract(format!("exogenous index {d} out of range for D={dim}")));
        }
        let spec = Self {
            variables: (0..dim)
                .map(|d| {
                    let gaussian = uncertain.contains(&d);
                    ExogenousVariable {
                        kind: if gaussian { ExogenousKind::Gaussian } else { ExogenousKind::Known },
                        center: (0..horizon).map(|t| centers.get(t, d)).collect(),
                        std: if gaussian { schedule.to_vec() } else { vec![0.0; horizon] },
                    }
                })
                .collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn horizon(&self) -> usize {
        self.variables.first().map_or(0, |v| v.center.len())
    }

    pub fn validate(&self) -> Result<()> {
        let horizon = self.horizon();
        if horizon == 0 {
            return Err(Error::Contract("exogenous spec has an empty horizon".into()));
        }
        for (d, v) in self.variables.iter().enumerate() {
            if v.center.len() != horizon || v.std.len() != horizon {
                return Err(Error::Contract(format!(
                    "exogenous variable {d}: center/std lengths {}/{} differ from horizon {horizon}",
                    v.center.len(),
                    v.std.len()
                )));
            }
            if let Some(t) = v.center.iter().position(|c| !c.is_finite()) {
                return Err(Error::Contract(format!("exogenous variable {d}: center not finite at step {}", t + 1)));
            }
            if let Some(t) = v.std.iter().position(|s| !(*s >= 0.0) || !s.is_finite()) {
                return Err(Error::Contract(format!(
                    "exogenous variable {d}: std must be finite and >= 0 at step {}",
                    t + 1
                )));
            }
        }
        Ok(())
    }

    /// Writes one draw for 1-based step `t` into `out`. Only Gaussian
    /// variables consume random numbers, in variable order.
    pub(crate) fn sample_into<R: Rng + ?Sized>(&self, t: usize, rng: &mut R, out: &mut [f64]) -> Result<()> {
        let horizon = self.horizon();
        if t == 0 || t > horizon {
            return Err(Error::Contract(format!("forecast step {t} outside 1..={horizon}")));
        }
        for (slot, v) in out.iter_mut().zip(&self.variables) {
            *slot = match v.kind {
                ExogenousKind::Known => v.center[t - 1],
                ExogenousKind::Gaussian => {
                    let e: f64 = rng.sample(StandardNormal);
                    v.center[t - 1] + v.std[t - 1] * e
                }
            };
        }
        Ok(())
    }
}

/// One draw of `u_{T+t}`, `t` counted from 1.
pub fn sample_exogenous<R: Rng + ?Sized>(spec: &ExogenousSpec, t: usize, rng: &mut R) -> Result<Tensor> {
    let mut out = vec![0.0; spec.dim()];
    spec.sample_into(t, rng, &mut out)?;
    Ok(Tensor::vector(out))
}
