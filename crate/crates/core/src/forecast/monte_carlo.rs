use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::exogenous::ExogenousSpec;
use super::quantiles::{band_levels, summarize_quantiles, DEFAULT_BANDS};
use crate::error::{Error, Result};
use crate::model::{
    apply_relevance, ard_weights, emission_params, gru_step, inference_params, transition_params,
    ModelConfig, ModelParams, Weights,
};
use crate::tensor::{Tape, Tensor, Var};

/// State handed from the observed history to the forecast recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct WarmState {
    /// `h_T`, `[1 x n_H]`.
    pub hidden: Tensor,
    /// Mean of `p(z_T | z_{T-1}, h_T)`, `[1 x n_Z]`.
    pub prior_mean: Tensor,
    /// Std of `p(z_T | z_{T-1}, h_T)`, `[1 x n_Z]`.
    pub prior_std: Tensor,
    /// Last observed target `x_T`, `[1 x M]`; the first GRU input of the forecast.
    pub last_x: Tensor,
}

fn check_history(config: &ModelConfig, x: &Tensor, u: &Tensor) -> Result<usize> {
    if x.rank() != 2 || x.cols() != config.observed_dim {
        return Err(Error::Dimension(format!(
            "targets must be [T x {}], got {:?}",
            config.observed_dim,
            x.shape()
        )));
    }
    if u.rank() != 2 || u.cols() != config.exogenous_dim || u.rows() != x.rows() {
        return Err(Error::Dimension(format!(
            "exogenous history must be [{} x {}], got {:?}",
            x.rows(),
            config.exogenous_dim,
            u.shape()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::Contract("empty history".into()));
    }
    Ok(x.rows())
}

fn relevance_var(tape: &mut Tape, weights: &Weights<Var>, config: &ModelConfig) -> Result<Option<Var>> {
    match (&weights.ard, config.use_ard) {
        (Some(ard), true) => Ok(Some(ard_weights(tape, ard, config.exogenous_dim)?)),
        (None, true) => Err(Error::Contract("model uses ARD but has no ARD weights".into())),
        _ => Ok(None),
    }
}

/// Rolls the model over the observed history.
///
/// `h` follows the GRU with cold start `x_0 = x_1`, `h_0 = 0`. The latent
/// path follows the inference network's posterior mean (`z_0 = 0`), and the
/// transition prior at `T` is evaluated from `z_{T-1}` and `h_T`.
pub fn warm_up(params: &ModelParams, x: &Tensor, u: &Tensor) -> Result<WarmState> {
    let config = &params.config;
    let len = check_history(config, x, u)?;
    let mut tape = Tape::new();
    let weights = params.bind(&mut tape, false);
    let relevance = relevance_var(&mut tape, &weights, config)?;
    let mark = tape.len();

    let mut h = Tensor::zeros(&[1, config.hidden_dim]);
    let mut z = Tensor::zeros(&[1, config.latent_dim]);
    let mut x_prev = x.slice_rows(0, 1)?;
    for t in 0..len {
        let x_t = x.slice_rows(t, t + 1)?;
        let hv = tape.constant(h);
        let zv = tape.constant(z.clone());
        let xp = tape.constant(x_prev);
        let xv = tape.constant(x_t.clone());
        let uv = tape.constant(u.slice_rows(t, t + 1)?);
        let step = (|| {
            let h_new = gru_step(&mut tape, &weights.gru, hv, xp)?;
            let u_rel = apply_relevance(&mut tape, relevance, uv)?;
            if t + 1 == len {
                let prior_u = config.transition_uses_exogenous.then_some(u_rel);
                let prior = transition_params(&mut tape, &weights.transition, zv, h_new, prior_u)?;
                return Ok((h_new, None, Some(prior)));
            }
            let post = inference_params(&mut tape, &weights.inference, zv, xv, h_new, u_rel)?;
            Ok((h_new, Some(post.mean), None))
        })();
        let (h_new, z_new, prior) = step.map_err(|e: Error| match e {
            Error::Numeric(m) => Error::Numeric(format!("warm-up step {t}: {m}")),
            other => other,
        })?;
        h = tape.value(h_new).clone();
        if let Some(zn) = z_new {
            z = tape.value(zn).clone();
        }
        if let Some(p) = prior {
            return Ok(WarmState {
                hidden: h,
                prior_mean: tape.value(p.mean).clone(),
                prior_std: tape.value(p.std).clone(),
                last_x: x_t,
            });
        }
        tape.truncate(mark);
        x_prev = x_t;
    }
    unreachable!("history is non-empty")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForecastOptions {
    /// Monte Carlo trials `S`.
    pub trials: usize,
    /// Master seed; trial `s` draws from stream `s` of this seed.
    pub seed: u64,
    pub levels: Vec<f64>,
    /// Trials advanced together as rows of one tape.
    pub chunk_size: usize,
    pub parallel: bool,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 0,
            levels: band_levels(&DEFAULT_BANDS),
            chunk_size: 64,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForecastResult {
    /// `[S x tau x M]` sampled trajectories.
    pub samples: Tensor,
    pub levels: Vec<f64>,
    /// One `[tau x M]` tensor per level.
    pub quantiles: Vec<Tensor>,
    /// Zero-based row index of the first forecast step (equals `T`).
    pub start: usize,
    pub seed: u64,
}

impl ForecastResult {
    pub fn trials(&self) -> usize {
        self.samples.shape()[0]
    }

    pub fn horizon(&self) -> usize {
        self.samples.shape()[1]
    }

    /// Per-step sample mean, `[tau x M]`.
    pub fn mean(&self) -> Tensor {
        let &[s, tau, m] = self.samples.shape() else { unreachable!() };
        let mut out = vec![0.0; tau * m];
        for trial in self.samples.values().chunks(tau * m) {
            for (o, v) in out.iter_mut().zip(trial) {
                *o += v;
            }
        }
        Tensor::new(vec![tau, m], out.into_iter().map(|v| v / s as f64).collect()).expect("shape")
    }
}

/// Per-trial random stream.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn normals(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}

/// Simulates trials `first..first + count`; returns their `[count x tau x M]`
/// values flattened trial-major.
fn simulate_chunk(
    params: &ModelParams,
    warm: &WarmState,
    spec: &ExogenousSpec,
    seed: u64,
    first: usize,
    count: usize,
) -> Result<Vec<f64>> {
    let c = &params.config;
    let (n_z, m, d) = (c.latent_dim, c.observed_dim, c.exogenous_dim);
    let horizon = spec.horizon();
    let mut rngs: Vec<ChaCha8Rng> = (first..first + count).map(|s| trial_rng(seed, s)).collect();

    let mut tape = Tape::new();
    let weights = params.bind(&mut tape, false);
    let relevance = relevance_var(&mut tape, &weights, c)?;
    let mark = tape.len();

    // z_T ~ p(z_T | z_{T-1}, h_T)
    let mut eps = vec![0.0; count * n_z];
    for (rng, row) in rngs.iter_mut().zip(eps.chunks_mut(n_z)) {
        normals(rng, row);
    }
    let mut z = Tensor::matrix(
        count,
        n_z,
        eps.iter()
            .enumerate()
            .map(|(i, e)| warm.prior_mean.values()[i % n_z] + e * warm.prior_std.values()[i % n_z])
            .collect(),
    )?;
    let mut h = warm.hidden.repeat_rows(count);
    let mut x_prev = warm.last_x.repeat_rows(count);
    let mut out = vec![0.0; count * horizon * m];

    let mut eps_z = vec![0.0; count * n_z];
    let mut u_draw = vec![0.0; count * d];
    let mut eps_x = vec![0.0; count * m];
    for t in 1..=horizon {
        for (r, rng) in rngs.iter_mut().enumerate() {
            normals(rng, &mut eps_z[r * n_z..(r + 1) * n_z]);
            spec.sample_into(t, rng, &mut u_draw[r * d..(r + 1) * d])?;
            normals(rng, &mut eps_x[r * m..(r + 1) * m]);
        }
        let hv = tape.constant(h);
        let zv = tape.constant(z);
        let xv = tape.constant(x_prev);
        let uv = tape.constant(Tensor::matrix(count, d, u_draw.clone())?);
        let ez = tape.constant(Tensor::matrix(count, n_z, eps_z.clone())?);
        let ex = tape.constant(Tensor::matrix(count, m, eps_x.clone())?);
        let step = (|| {
            let h_new = gru_step(&mut tape, &weights.gru, hv, xv)?;
            let u_rel = apply_relevance(&mut tape, relevance, uv)?;
            let prior_u = c.transition_uses_exogenous.then_some(u_rel);
            let prior = transition_params(&mut tape, &weights.transition, zv, h_new, prior_u)?;
            let dz = tape.mul(ez, prior.std)?;
            let z_new = tape.add(prior.mean, dz)?;
            let em = emission_params(&mut tape, &weights.emission, c.mean_transform, z_new, h_new, u_rel)?;
            let dx = tape.mul(ex, em.std)?;
            let x_new = tape.add(em.mean, dx)?;
            Ok((h_new, z_new, x_new))
        })();
        let (h_new, z_new, x_new) = step.map_err(|e: Error| match e {
            Error::Numeric(msg) => Error::Numeric(format!("forecast step {t}, trials {first}..{}: {msg}", first + count)),
            other => other,
        })?;
        h = tape.value(h_new).clone();
        z = tape.value(z_new).clone();
        x_prev = tape.value(x_new).clone();
        if let Some(i) = x_prev.first_non_finite() {
            return Err(Error::Numeric(format!(
                "trial {} step {t}: sampled value is not finite",
                first + i / m
            )));
        }
        for r in 0..count {
            let dst = (r * horizon + (t - 1)) * m;
            out[dst..dst + m].copy_from_slice(x_prev.row(r));
        }
        tape.truncate(mark);
    }
    Ok(out)
}

/// Monte Carlo forecast over the horizon of `spec`.
///
/// Each trial draws `z_T` from the transition prior left by [`warm_up`] and
/// then recurses: `h` through the GRU fed with the trial's own previous
/// sample, `z` from the transition, `u` from `spec` (relevance-weighted),
/// and `x` from the emission. Trial `s` consumes only its own random stream,
/// so results do not depend on chunking or on parallel execution.
pub fn monte_carlo_forecast(
    params: &ModelParams,
    x: &Tensor,
    u: &Tensor,
    spec: &ExogenousSpec,
    options: &ForecastOptions,
) -> Result<ForecastResult> {
    spec.validate()?;
    if spec.dim() != params.config.exogenous_dim {
        return Err(Error::Dimension(format!(
            "exogenous spec has D={}, model expects {}",
            spec.dim(),
            params.config.exogenous_dim
        )));
    }
    if options.trials == 0 || options.chunk_size == 0 {
        return Err(Error::Contract("trials and chunk_size must be at least 1".into()));
    }
    let warm = warm_up(params, x, u)?;
    let (horizon, m) = (spec.horizon(), params.config.observed_dim);
    let chunks: Vec<(usize, usize)> = (0..options.trials)
        .step_by(options.chunk_size)
        .map(|first| (first, options.chunk_size.min(options.trials - first)))
        .collect();
    let run = |&(first, count): &(usize, usize)| simulate_chunk(params, &warm, spec, options.seed, first, count);
    let parts: Vec<Vec<f64>> = if options.parallel {
        chunks.par_iter().map(run).collect::<Result<_>>()?
    } else {
        chunks.iter().map(run).collect::<Result<_>>()?
    };
    let samples = Tensor::new(vec![options.trials, horizon, m], parts.concat())?;
    let quantiles = summarize_quantiles(&samples, &options.levels)?;
    Ok(ForecastResult {
        samples,
        levels: options.levels.clone(),
        quantiles,
        start: x.rows(),
        seed: options.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    fn config() -> ModelConfig {
        ModelConfig {
            latent_dim: 2,
            hidden_dim: 3,
            mlp_dim: 4,
            ..ModelConfig::new(1, 2)
        }
    }

    fn history(len: usize) -> (Tensor, Tensor) {
        let x = Tensor::matrix(len, 1, (0..len).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
        let u = Tensor::matrix(len, 2, (0..2 * len).map(|i| (i as f64 * 0.3).cos()).collect()).unwrap();
        (x, u)
    }

    fn spec(horizon: usize) -> ExogenousSpec {
        let c = Tensor::matrix(horizon, 2, (0..2 * horizon).map(|i| i as f64 * 0.1).collect()).unwrap();
        ExogenousSpec::with_linear_uncertainty(&c, &[1], 0.5).unwrap()
    }

    #[test]
    fn warm_up_single_step_uses_cold_start() {
        let p = init_params(&config(), 1).unwrap();
        let (x, u) = history(1);
        let warm = warm_up(&p, &x, &u).unwrap();
        let mut tape = Tape::new();
        let w = p.bind(&mut tape, false);
        let h0 = tape.constant(Tensor::zeros(&[1, 3]));
        let x1 = tape.constant(x.clone());
        let h1 = gru_step(&mut tape, &w.gru, h0, x1).unwrap();
        assert_eq!(&warm.hidden, tape.value(h1));
        assert_eq!(warm.last_x, x);
    }

    #[test]
    fn warm_up_is_deterministic_and_checks_lengths() {
        let p = init_params(&config(), 1).unwrap();
        let (x, u) = history(12);
        assert_eq!(warm_up(&p, &x, &u).unwrap(), warm_up(&p, &x, &u).unwrap());
        let short_u = u.slice_rows(0, 11).unwrap();
        assert!(matches!(warm_up(&p, &x, &short_u), Err(Error::Dimension(_))));
    }

    #[test]
    fn shape_and_chunking_independence() {
        let p = init_params(&config(), 2).unwrap();
        let (x, u) = history(10);
        let base = ForecastOptions {
            trials: 13,
            seed: 5,
            chunk_size: 13,
            parallel: false,
            ..ForecastOptions::default()
        };
        let a = monte_carlo_forecast(&p, &x, &u, &spec(6), &base).unwrap();
        assert_eq!(a.samples.shape(), &[13, 6, 1]);
        assert_eq!((a.trials(), a.horizon(), a.start), (13, 6, 10));
        let b = monte_carlo_forecast(&p, &x, &u, &spec(6), &ForecastOptions { chunk_size: 4, parallel: true, ..base.clone() }).unwrap();
        let bits = |t: &Tensor| t.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.samples), bits(&b.samples));
        let c = monte_carlo_forecast(&p, &x, &u, &spec(6), &ForecastOptions { seed: 6, ..base }).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn trials_match_their_streams_under_subsetting() {
        let p = init_params(&config(), 2).unwrap();
        let (x, u) = history(10);
        let opts = |trials| ForecastOptions { trials, seed: 1, chunk_size: 3, parallel: false, ..ForecastOptions::default() };
        let few = monte_carlo_forecast(&p, &x, &u, &spec(4), &opts(5)).unwrap();
        let many = monte_carlo_forecast(&p, &x, &u, &spec(4), &opts(9)).unwrap();
        assert_eq!(few.samples.values(), &many.samples.values()[..5 * 4]);
    }

    #[test]
    fn mismatched_spec_rejected() {
        let p = init_params(&config(), 2).unwrap();
        let (x, u) = history(10);
        let bad = ExogenousSpec::known(&Tensor::zeros(&[3, 1])).unwrap();
        assert!(matches!(
            monte_carlo_forecast(&p, &x, &u, &bad, &ForecastOptions::default()),
            Err(Error::Dimension(_))
        ));
    }
}
