//! Shingling: random fixed-width windows cut from one long series.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One window of targets `[W x M]` and exogenous inputs `[W x D]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub start: usize,
    pub x: Tensor,
    pub u: Tensor,
}

/// Draws a window start uniformly from `[0, T - W]` and slices `x` and `u`
/// at the same offset. `T` is the number of rows in `x`; `u` may extend
/// further (future covariates) but must cover the first `T` rows.
pub fn sample_window<R: Rng + ?Sized>(x: &Tensor, u: &Tensor, width: usize, rng: &mut R) -> Result<Window> {
    let len = x.rows();
    if width == 0 || width > len {
        return Err(Error::Contract(format!(
            "window width {width} must be in [1, {len}]"
        )));
    }
    if u.rows() < len {
        return Err(Error::Dimension(format!(
            "exogenous series has {} rows, targets have {len}",
            u.rows()
        )));
    }
    let start = rng.random_range(0..=len - width);
    window_at(x, u, start, width)
}

pub fn window_at(x: &Tensor, u: &Tensor, start: usize, width: usize) -> Result<Window> {
    Ok(Window {
        start,
        x: x.slice_rows(start, start + width)?,
        u: u.slice_rows(start, start + width)?,
    })
}

/// Windows stacked step-major: `x[t]` is `[B x M]` holding step `t` of every
/// window, `u[t]` likewise `[B x D]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowBatch {
    pub starts: Vec<usize>,
    pub x: Vec<Tensor>,
    pub u: Vec<Tensor>,
}

impl WindowBatch {
    pub fn from_windows(windows: &[Window]) -> Result<Self> {
        let first = windows
            .first()
            .ok_or_else(|| Error::Contract("batch needs at least one window".into()))?;
        let width = first.x.rows();
        let (m, d) = (first.x.cols(), first.u.cols());
        for w in windows {
            if w.x.shape() != [width, m] || w.u.shape() != [width, d] {
                return Err(Error::Dimension(format!(
                    "window at {} has shapes {:?}/{:?}, expected [{width}, {m}]/[{width}, {d}]",
                    w.start,
                    w.x.shape(),
                    w.u.shape()
                )));
            }
        }
        let stack = |pick: fn(&Window) -> &Tensor, cols: usize| -> Result<Vec<Tensor>> {
            (0..width)
                .map(|t| {
                    let values = windows.iter().flat_map(|w| pick(w).row(t).to_vec()).collect();
                    Tensor::matrix(windows.len(), cols, values)
                })
                .collect()
        };
        Ok(Self {
            starts: windows.iter().map(|w| w.start).collect(),
            x: stack(|w| &w.x, m)?,
            u: stack(|w| &w.u, d)?,
        })
    }

    /// The whole series as a single window.
    pub fn single(x: &Tensor, u: &Tensor) -> Result<Self> {
        Self::from_windows(&[window_at(x, u, 0, x.rows())?])
    }

    pub fn width(&self) -> usize {
        self.x.len()
    }

    /// Number of windows `B`.
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn observed_dim(&self) -> usize {
        self.x.first().map_or(0, |t| t.cols())
    }

    pub fn exogenous_dim(&self) -> usize {
        self.u.first().map_or(0, |t| t.cols())
    }
}
