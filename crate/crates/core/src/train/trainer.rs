use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, OptimizerState};
use super::objective::{loss_and_gradients, GaussianNoise};
use super::window::{sample_window, WindowBatch};
use crate::error::{Error, Result};
use crate::model::{init_params, ModelConfig, ModelParams};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Window width `W` in steps.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Windows per iteration.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// SGVB samples `K`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Checkpoint period in iterations; 0 disables periodic checkpoints.
    #[serde(default)]
    pub checkpoint_every: usize,
}

fn default_window() -> usize {
    168
}
fn default_batch_size() -> usize {
    8
}
fn default_iterations() -> usize {
    1000
}
fn default_learning_rate() -> f64 {
    0.001
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}
fn default_samples() -> usize {
    5
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window: default_window(),
            batch_size: default_batch_size(),
            iterations: default_iterations(),
            learning_rate: default_learning_rate(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
            samples: default_samples(),
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("train.{msg}")));
        if self.window < 2 {
            return fail(format!("window must be at least 2, got {}", self.window));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.samples == 0 {
            return fail("samples must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Loss of each iteration, evaluated before its update.
    pub losses: Vec<f64>,
}

/// Trains from a seeded initialization. See [`train_from`].
pub fn train(x: &Tensor, u: &Tensor, model: &ModelConfig, config: &TrainConfig) -> Result<TrainOutcome> {
    let params = init_params(model, config.seed)?;
    train_from(params, x, u, config, |_, _| Ok(()))
}

/// Runs `iterations` steps of window sampling, SGVB loss, backpropagation
/// and Adam. `on_checkpoint(iteration, params)` is called every
/// `checkpoint_every` completed iterations.
///
/// A non-finite loss, gradient or intermediate value aborts with
/// [`Error::Diverged`] carrying the parameters from before the failing step.
pub fn train_from(
    mut params: ModelParams,
    x: &Tensor,
    u: &Tensor,
    config: &TrainConfig,
    mut on_checkpoint: impl FnMut(usize, &ModelParams) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    params.config.validate()?;
    if x.rank() != 2 || u.rank() != 2 {
        return Err(Error::Dimension("training series must be [T x M] and [T x D]".into()));
    }
    if x.cols() != params.config.observed_dim || u.cols() != params.config.exogenous_dim {
        return Err(Error::Dimension(format!(
            "series has M={} D={}, model expects M={} D={}",
            x.cols(),
            u.cols(),
            params.config.observed_dim,
            params.config.exogenous_dim
        )));
    }
    if config.window > x.rows() {
        return Err(Error::Contract(format!(
            "window {} exceeds series length {}",
            config.window,
            x.rows()
        )));
    }

    let adam = config.adam();
    let mut state = OptimizerState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut losses = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let windows = (0..config.batch_size)
            .map(|_| sample_window(x, u, config.window, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let batch = WindowBatch::from_windows(&windows)?;
        let diverged = |message: String, last_good: &ModelParams| Error::Diverged {
            iteration,
            message,
            last_good: Box::new(last_good.clone()),
        };
        let mut noise = GaussianNoise::new(&mut rng);
        let (loss, grads) = match loss_and_gradients(&params, &batch, config.samples, &mut noise) {
            Ok(v) => v,
            Err(e @ (Error::Numeric(_) | Error::Domain(_))) => return Err(diverged(e.to_string(), &params)),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(diverged(format!("loss is {loss}"), &params));
        }
        let last_good = params.clone();
        if let Err(e) = adam_step(&mut params, &grads, &mut state, &adam) {
            return Err(diverged(e.to_string(), &last_good));
        }
        if let Some(i) = params.tensors().iter().position(|t| !t.all_finite()) {
            let name = params.named_tensors()[i].0.clone();
            return Err(diverged(format!("parameter {name} became non-finite"), &last_good));
        }
        losses.push(loss);
        if config.checkpoint_every > 0 && (iteration + 1) % config.checkpoint_every == 0 {
            on_checkpoint(iteration + 1, &params)?;
        }
    }
    Ok(TrainOutcome { params, losses })
}

/// `iteration,loss` rows with shortest round-trip floats.
pub fn loss_history_csv(losses: &[f64]) -> String {
    let mut out = String::from("iteration,loss\n");
    for (i, l) in losses.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}

/// Trailing moving average; entry `i` averages `losses[i+1-w ..= i]`
/// (fewer at the start).
pub fn smoothed(losses: &[f64], width: usize) -> Vec<f64> {
    let width = width.max(1);
    let mut out = Vec::with_capacity(losses.len());
    let mut acc = 0.0;
    for i in 0..losses.len() {
        acc += losses[i];
        if i >= width {
            acc -= losses[i - width];
        }
        out.push(acc / (i + 1).min(width) as f64);
    }
    out
}
