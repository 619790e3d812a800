//! The SGVB estimate of the evidence lower bound.

use rand::Rng;
use rand_distr::StandardNormal;

use super::window::WindowBatch;
use crate::error::{Error, Result};
use crate::model::{
    apply_relevance, ard_weights, emission_params, gru_step, inference_params, transition_params,
    ModelConfig, ModelParams, Weights,
};
use crate::tensor::{Tape, Tensor, Var};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Supplies the standard-normal draws `eps` used by the reparameterization.
pub trait NoiseSource {
    fn standard_normal(&mut self, rows: usize, cols: usize) -> Result<Tensor>;
}

/// Fresh draws from a random number generator.
pub struct GaussianNoise<R> {
    rng: R,
}

impl<R: Rng> GaussianNoise<R> {
    pub fn new(rng: R) -> Self {
        Self { rng }
    }

    pub fn into_inner(self) -> R {
        self.rng
    }
}

impl<R: Rng> NoiseSource for GaussianNoise<R> {
    fn standard_normal(&mut self, rows: usize, cols: usize) -> Result<Tensor> {
        let values = (0..rows * cols)
            .map(|_| self.rng.sample(StandardNormal))
            .collect();
        Tensor::matrix(rows, cols, values)
    }
}

impl<N: NoiseSource + ?Sized> NoiseSource for &mut N {
    fn standard_normal(&mut self, rows: usize, cols: usize) -> Result<Tensor> {
        (**self).standard_normal(rows, cols)
    }
}

/// Replays a fixed list of draws, making the objective a deterministic
/// function of the parameters. Used for gradient verification.
#[derive(Clone, Debug)]
pub struct FrozenNoise {
    draws: Vec<Tensor>,
    next: usize,
}

impl FrozenNoise {
    pub fn new(draws: Vec<Tensor>) -> Self {
        Self { draws, next: 0 }
    }

    /// Pre-draws `count` tensors of shape `[rows x cols]`.
    pub fn sample<R: Rng>(rng: R, count: usize, rows: usize, cols: usize) -> Result<Self> {
        let mut source = GaussianNoise::new(rng);
        let draws = (0..count)
            .map(|_| source.standard_normal(rows, cols))
            .collect::<Result<_>>()?;
        Ok(Self::new(draws))
    }

    pub fn rewind(&mut self) {
        self.next = 0;
    }
}

impl NoiseSource for FrozenNoise {
    fn standard_normal(&mut self, rows: usize, cols: usize) -> Result<Tensor> {
        let draw = self.draws.get(self.next).ok_or_else(|| {
            Error::Contract(format!("frozen noise exhausted after {} draws", self.next))
        })?;
        if draw.shape() != [rows, cols] {
            return Err(Error::Contract(format!(
                "frozen draw {} has shape {:?}, requested [{rows}, {cols}]",
                self.next,
                draw.shape()
            )));
        }
        self.next += 1;
        Ok(draw.clone())
    }
}

fn require_positive(tape: &Tape, v: Var, what: &str) -> Result<()> {
    match tape.value(v).values().iter().position(|&s| !(s > 0.0)) {
        None => Ok(()),
        Some(i) => Err(Error::Domain(format!(
            "{what} must be positive, got {} at index {i}",
            tape.value(v).values()[i]
        ))),
    }
}

/// `KL(N(mean_q, std_q) || N(mean_p, std_p))` for diagonal Gaussians,
/// summed over every element:
/// `sum[ log(std_p/std_q) + (std_q^2 + (mean_q - mean_p)^2) / (2 std_p^2) - 1/2 ]`.
pub fn kl_diag_gaussian(
    tape: &mut Tape,
    mean_q: Var,
    std_q: Var,
    mean_p: Var,
    std_p: Var,
) -> Result<Var> {
    require_positive(tape, std_q, "std_q")?;
    require_positive(tape, std_p, "std_p")?;
    let log_p = tape.log(std_p)?;
    let log_q = tape.log(std_q)?;
    let log_ratio = tape.sub(log_p, log_q)?;
    let diff = tape.sub(mean_q, mean_p)?;
    let diff_sq = tape.mul(diff, diff)?;
    let var_q = tape.mul(std_q, std_q)?;
    let numer = tape.add(var_q, diff_sq)?;
    let var_p = tape.mul(std_p, std_p)?;
    let ratio = tape.div(numer, var_p)?;
    let half_ratio = tape.scale(ratio, 0.5)?;
    let terms = tape.add(log_ratio, half_ratio)?;
    let terms = tape.add_scalar(terms, -0.5)?;
    tape.sum(terms)
}

/// `sum[ -log(2 pi)/2 - log(std) - (x - mean)^2 / (2 std^2) ]`.
pub fn gaussian_log_pdf(tape: &mut Tape, x: Var, mean: Var, std: Var) -> Result<Var> {
    require_positive(tape, std, "std")?;
    let diff = tape.sub(x, mean)?;
    let z = tape.div(diff, std)?;
    let z_sq = tape.mul(z, z)?;
    let quad = tape.scale(z_sq, -0.5)?;
    let log_std = tape.log(std)?;
    let terms = tape.sub(quad, log_std)?;
    let terms = tape.add_scalar(terms, -HALF_LN_2PI)?;
    tape.sum(terms)
}

/// `mean + eps * std`. `eps` should be a constant so no gradient reaches it.
pub fn reparameterize(tape: &mut Tape, mean: Var, std: Var, eps: Var) -> Result<Var> {
    let scaled = tape.mul(eps, std)?;
    tape.add(mean, scaled)
}

/// Value-only KL between diagonal Gaussians given as plain tensors.
pub fn kl_diag_gaussian_value(mean_q: &Tensor, std_q: &Tensor, mean_p: &Tensor, std_p: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = [mean_q, std_q, mean_p, std_p].map(|t| tape.constant(t.clone()));
    let kl = kl_diag_gaussian(&mut tape, vars[0], vars[1], vars[2], vars[3])?;
    tape.value(kl).item()
}

/// Value-only Gaussian log density.
pub fn gaussian_log_pdf_value(x: &Tensor, mean: &Tensor, std: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = [x, mean, std].map(|t| tape.constant(t.clone()));
    let lp = gaussian_log_pdf(&mut tape, vars[0], vars[1], vars[2])?;
    tape.value(lp).item()
}

/// Components of one objective evaluation.
#[derive(Clone, Copy, Debug)]
pub struct ElboEstimate {
    /// `-ELBO` averaged over samples and windows; the quantity minimized.
    pub loss: Var,
    /// Summed log likelihood per window, averaged over samples and windows.
    pub log_likelihood: f64,
    /// Summed KL per window, averaged over samples and windows.
    pub kl: f64,
}

fn at_step<T>(step: usize, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Numeric(msg) => Error::Numeric(format!("step {step}: {msg}")),
        Error::Domain(msg) => Error::Domain(format!("step {step}: {msg}")),
        other => other,
    })
}

/// Records `-(1/K) sum_k L_SGVB^(k)` for a batch of windows, averaged over
/// the windows.
///
/// Each of the `samples` passes rolls the GRU over the window (cold start
/// `x_0 = x_1`, `h_0 = 0`, `z_0 = 0`), samples `z_t` from the posterior by
/// reparameterization and accumulates `log p(x_t | z_t, h_t, u_t) -
/// KL(q || p)`. The passes run side by side as extra rows, one noise draw
/// per step covering all of them.
pub fn elbo_sgvb(
    tape: &mut Tape,
    weights: &Weights<Var>,
    config: &ModelConfig,
    batch: &WindowBatch,
    samples: usize,
    noise: &mut dyn NoiseSource,
) -> Result<ElboEstimate> {
    if samples == 0 {
        return Err(Error::Contract("SGVB needs at least one sample".into()));
    }
    if batch.width() == 0 || batch.is_empty() {
        return Err(Error::Contract("empty window batch".into()));
    }
    if batch.observed_dim() != config.observed_dim || batch.exogenous_dim() != config.exogenous_dim {
        return Err(Error::Dimension(format!(
            "batch has M={} D={}, model expects M={} D={}",
            batch.observed_dim(),
            batch.exogenous_dim(),
            config.observed_dim,
            config.exogenous_dim
        )));
    }
    let rows = samples * batch.len();
    let relevance = match (&weights.ard, config.use_ard) {
        (Some(ard), true) => Some(ard_weights(tape, ard, config.exogenous_dim)?),
        (None, true) => return Err(Error::Contract("model uses ARD but has no ARD weights".into())),
        _ => None,
    };

    let mut h = tape.constant(Tensor::zeros(&[rows, config.hidden_dim]));
    let mut z = tape.constant(Tensor::zeros(&[rows, config.latent_dim]));
    let mut x_prev = tape.constant(batch.x[0].repeat_rows(samples));
    let mut total: Option<Var> = None;
    let mut log_lik_sum = 0.0;
    let mut kl_sum = 0.0;

    for t in 0..batch.width() {
        let x_t = tape.constant(batch.x[t].repeat_rows(samples));
        let u_t = tape.constant(batch.u[t].repeat_rows(samples));
        let step_terms = at_step(t, (|| {
            h = gru_step(tape, &weights.gru, h, x_prev)?;
            let u_rel = apply_relevance(tape, relevance, u_t)?;
            let prior_u = config.transition_uses_exogenous.then_some(u_rel);
            let prior = transition_params(tape, &weights.transition, z, h, prior_u)?;
            let post = inference_params(tape, &weights.inference, z, x_t, h, u_rel)?;
            let eps = noise.standard_normal(rows, config.latent_dim)?;
            let eps = tape.constant(eps);
            z = reparameterize(tape, post.mean, post.std, eps)?;
            let emission = emission_params(tape, &weights.emission, config.mean_transform, z, h, u_rel)?;
            let log_lik = gaussian_log_pdf(tape, x_t, emission.mean, emission.std)?;
            let kl = kl_diag_gaussian(tape, post.mean, post.std, prior.mean, prior.std)?;
            Ok((log_lik, kl))
        })())?;
        let (log_lik, kl) = step_terms;
        let kl_value = tape.value(kl).item()?;
        if kl_value < -1e-9 * (1.0 + rows as f64) {
            return Err(Error::Numeric(format!("step {t}: negative KL {kl_value}")));
        }
        log_lik_sum += tape.value(log_lik).item()?;
        kl_sum += kl_value;
        let elbo_t = tape.sub(log_lik, kl)?;
        total = Some(match total {
            None => elbo_t,
            Some(acc) => tape.add(acc, elbo_t)?,
        });
        x_prev = x_t;
    }

    let norm = rows as f64;
    let total = total.expect("window width checked above");
    let loss = tape.scale(total, -1.0 / norm)?;
    let value = tape.value(loss).item()?;
    if !value.is_finite() {
        return Err(Error::Numeric(format!("loss is not finite: {value}")));
    }
    Ok(ElboEstimate {
        loss,
        log_likelihood: log_lik_sum / norm,
        kl: kl_sum / norm,
    })
}

/// Loss value and its gradient for every parameter tensor, in canonical order.
pub fn loss_and_gradients(
    params: &ModelParams,
    batch: &WindowBatch,
    samples: usize,
    noise: &mut dyn NoiseSource,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, true);
    let estimate = elbo_sgvb(&mut tape, &bound, &params.config, batch, samples, noise)?;
    let grads = tape.backward(estimate.loss)?;
    let loss = tape.value(estimate.loss).item()?;
    let tensors = bound
        .named()
        .into_iter()
        .zip(params.tensors())
        .map(|((_, &var), like)| grads.get_or_zeros(var, like))
        .collect();
    Ok((loss, tensors))
}

/// Loss value only.
pub fn loss_value(
    params: &ModelParams,
    batch: &WindowBatch,
    samples: usize,
    noise: &mut dyn NoiseSource,
) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let estimate = elbo_sgvb(&mut tape, &bound, &params.config, batch, samples, noise)?;
    tape.value(estimate.loss).item()
}
