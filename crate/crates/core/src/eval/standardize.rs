use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-dimension affine map `(x - mean) / std`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on the rows of a `[T x M]` series with the population std.
    pub fn fit(x: &Tensor) -> Result<Self> {
        if x.rank() != 2 || x.rows() == 0 {
            return Err(Error::Dimension(format!("expected a non-empty [T x M] series, got {:?}", x.shape())));
        }
        let (rows, cols) = (x.rows(), x.cols());
        let mut mean = vec![0.0; cols];
        let mut std = vec![0.0; cols];
        for d in 0..cols {
            let m = (0..rows).map(|t| x.get(t, d)).sum::<f64>() / rows as f64;
            let var = (0..rows).map(|t| (x.get(t, d) - m).powi(2)).sum::<f64>() / rows as f64;
            if !(var > 0.0) || !var.is_finite() {
                return Err(Error::Contract(format!("dimension {d} has zero or undefined variance")));
            }
            mean[d] = m;
            std[d] = var.sqrt();
        }
        Ok(Self { mean, std })
    }

    /// Like [`Standardizer::fit`], but dimensions without variance are only
    /// centered (unit scale) instead of rejected.
    pub fn fit_allow_constant(x: &Tensor) -> Result<Self> {
        if x.rank() != 2 || x.rows() == 0 {
            return Err(Error::Dimension(format!("expected a non-empty [T x M] series, got {:?}", x.shape())));
        }
        let mut out = Self { mean: Vec::new(), std: Vec::new() };
        for d in 0..x.cols() {
            let col = Tensor::matrix(x.rows(), 1, (0..x.rows()).map(|t| x.get(t, d)).collect())?;
            match Self::fit(&col) {
                Ok(s) => {
                    out.mean.push(s.mean[0]);
                    out.std.push(s.std[0]);
                }
                Err(Error::Contract(_)) => {
                    out.mean.push(col.values()[0]);
                    out.std.push(1.0);
                }
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn apply(&self, x: &Tensor, f: impl Fn(f64, f64, f64) -> f64) -> Result<Tensor> {
        let last = *x.shape().last().unwrap_or(&0);
        if x.rank() < 2 || last != self.dim() {
            return Err(Error::Dimension(format!(
                "standardizer for {} dimensions applied to shape {:?}",
                self.dim(),
                x.shape()
            )));
        }
        let values = x
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| f(v, self.mean[i % last], self.std[i % last]))
            .collect();
        Tensor::new(x.shape().to_vec(), values)
    }

    /// Standardizes any tensor whose last axis is the dimension.
    pub fn transform(&self, x: &Tensor) -> Result<Tensor> {
        self.apply(x, |v, m, s| (v - m) / s)
    }

    pub fn inverse(&self, x: &Tensor) -> Result<Tensor> {
        self.apply(x, |v, m, s| v * s + m)
    }
}

/// Fits on the first `train_rows` rows and standardizes the whole series
/// with those statistics.
pub fn standardize_series(x: &Tensor, train_rows: usize) -> Result<(Tensor, Standardizer)> {
    let scaler = Standardizer::fit(&x.slice_rows(0, train_rows)?)?;
    Ok((scaler.transform(x)?, scaler))
}
