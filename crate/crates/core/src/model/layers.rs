//! Forward computations of every network, recorded on a [`Tape`].
//!
//! All state tensors are `[rows x features]`; one row per independent
//! sequence (window, SGVB replicate or Monte Carlo trial).

use super::config::TransformSpec;
use super::params::{GaussianHeads, Gru, Linear, Mlp};
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Mean and standard deviation of a diagonal Gaussian.
#[derive(Clone, Copy, Debug)]
pub struct GaussianParams {
    pub mean: Var,
    pub std: Var,
}

fn in_head<T>(head: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Numeric(msg) => Error::Numeric(format!("{head}: {msg}")),
        other => other,
    })
}

pub fn linear(tape: &mut Tape, layer: &Linear<Var>, x: Var) -> Result<Var> {
    let y = tape.matmul(x, layer.weight)?;
    tape.add(y, layer.bias)
}

pub fn mlp(tape: &mut Tape, net: &Mlp<Var>, x: Var) -> Result<Var> {
    let pre = linear(tape, &net.hidden, x)?;
    let hidden = tape.tanh(pre)?;
    linear(tape, &net.output, hidden)
}

/// One GRU update:
///
/// ```text
/// r  = sigmoid([h, x] W_r + b_r)
/// u  = sigmoid([h, x] W_u + b_u)
/// h~ = tanh([r * h, x] W_c + b_c)
/// h' = (1 - u) * h + u * h~
/// ```
pub fn gru_step(tape: &mut Tape, gru: &Gru<Var>, h_prev: Var, x_prev: Var) -> Result<Var> {
    in_head("gru", (|| {
        let hx = tape.concat_cols(&[h_prev, x_prev])?;
        let r_pre = linear(tape, &gru.reset, hx)?;
        let reset = tape.sigmoid(r_pre)?;
        let u_pre = linear(tape, &gru.update, hx)?;
        let update = tape.sigmoid(u_pre)?;
        let gated = tape.mul(reset, h_prev)?;
        let cx = tape.concat_cols(&[gated, x_prev])?;
        let c_pre = linear(tape, &gru.candidate, cx)?;
        let candidate = tape.tanh(c_pre)?;
        // (1 - u) * h + u * h~  ==  h + u * (h~ - h)
        let delta = tape.sub(candidate, h_prev)?;
        let step = tape.mul(update, delta)?;
        tape.add(h_prev, step)
    })())
}

fn gaussian_heads(tape: &mut Tape, heads: &GaussianHeads<Var>, input: Var) -> Result<GaussianParams> {
    let mean = mlp(tape, &heads.mean, input)?;
    let raw = mlp(tape, &heads.scale, input)?;
    let std = tape.softplus(raw)?;
    Ok(GaussianParams { mean, std })
}

/// `p(z_t | z_{t-1}, h_t [, u_t])`. Pass `u` only when the model was
/// configured with `transition_uses_exogenous`.
pub fn transition_params(
    tape: &mut Tape,
    heads: &GaussianHeads<Var>,
    z_prev: Var,
    h: Var,
    u: Option<Var>,
) -> Result<GaussianParams> {
    in_head("transition", (|| {
        let input = match u {
            Some(u) => tape.concat_cols(&[z_prev, h, u])?,
            None => tape.concat_cols(&[z_prev, h])?,
        };
        gaussian_heads(tape, heads, input)
    })())
}

/// Gaussian emission statistics `p(x_t | z_t, h_t, u_t)`; the mean passes
/// through `mean_transform`, the scale through softplus.
pub fn emission_params(
    tape: &mut Tape,
    heads: &GaussianHeads<Var>,
    mean_transform: TransformSpec,
    z: Var,
    h: Var,
    u_relevant: Var,
) -> Result<GaussianParams> {
    in_head("emission", (|| {
        let input = tape.concat_cols(&[z, h, u_relevant])?;
        let raw_mean = mlp(tape, &heads.mean, input)?;
        let mean = output_transform(tape, mean_transform, raw_mean)?;
        let raw_scale = mlp(tape, &heads.scale, input)?;
        let std = output_transform(tape, TransformSpec::Positive, raw_scale)?;
        Ok(GaussianParams { mean, std })
    })())
}

/// Posterior `q(z_t | z_{t-1}, x_t, h_t, u_t)`.
pub fn inference_params(
    tape: &mut Tape,
    heads: &GaussianHeads<Var>,
    z_prev: Var,
    x_t: Var,
    h: Var,
    u_relevant: Var,
) -> Result<GaussianParams> {
    in_head("inference", (|| {
        let input = tape.concat_cols(&[z_prev, x_t, h, u_relevant])?;
        gaussian_heads(tape, heads, input)
    })())
}

/// Relevance weights `softmax(NN(1))` over the `dim` exogenous variables.
/// The input is the all-ones vector; the result does not depend on time.
pub fn ard_weights(tape: &mut Tape, ard: &Mlp<Var>, dim: usize) -> Result<Var> {
    in_head("ard", (|| {
        let ones = tape.constant(Tensor::ones(&[1, dim]));
        let logits = mlp(tape, ard, ones)?;
        let logits = tape.reshape(logits, vec![dim])?;
        tape.softmax(logits)
    })())
}

/// `w * u_t` for every row of `u`; identity when relevance is disabled.
pub fn apply_relevance(tape: &mut Tape, w: Option<Var>, u: Var) -> Result<Var> {
    match w {
        None => Ok(u),
        Some(w) => {
            let (wl, ul) = (tape.value(w).cols(), tape.value(u).cols());
            if wl != ul {
                return Err(Error::Dimension(format!(
                    "relevance has {wl} weights but exogenous input has {ul} variables"
                )));
            }
            tape.mul(u, w)
        }
    }
}

pub fn output_transform(tape: &mut Tape, spec: TransformSpec, raw: Var) -> Result<Var> {
    spec.validate()?;
    match spec {
        TransformSpec::Real => Ok(raw),
        TransformSpec::Positive => tape.softplus(raw),
        TransformSpec::Bounded { lower, upper } => {
            let s = tape.sigmoid(raw)?;
            let scaled = tape.scale(s, upper - lower)?;
            tape.add_scalar(scaled, lower)
        }
    }
}
