use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Affine map `x W + b` with `W: [in x out]`, `b: [out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub weight: T,
    pub bias: T,
}

/// Two-layer network: affine, tanh, affine.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub hidden: Linear<T>,
    pub output: Linear<T>,
}

/// Mean head and pre-softplus scale head of a diagonal Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianHeads<T> {
    pub mean: Mlp<T>,
    pub scale: Mlp<T>,
}

/// Gate weights act on `[h, x]` (reset, update) and `[r * h, x]` (candidate).
#[derive(Clone, Debug, PartialEq)]
pub struct Gru<T> {
    pub reset: Linear<T>,
    pub update: Linear<T>,
    pub candidate: Linear<T>,
}

/// Every learnable tensor of the model. `T` is `Tensor` for stored values
/// and `Var` once bound to a tape.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights<T> {
    pub gru: Gru<T>,
    pub transition: GaussianHeads<T>,
    pub emission: GaussianHeads<T>,
    pub inference: GaussianHeads<T>,
    pub ard: Option<Mlp<T>>,
}

impl<T> Linear<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Linear<U> {
        Linear {
            weight: f(&self.weight),
            bias: f(&self.bias),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a T)>) {
        out.push((format!("{prefix}.weight"), &self.weight));
        out.push((format!("{prefix}.bias"), &self.bias));
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut T>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
    }
}

impl<T> Mlp<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Mlp<U> {
        Mlp {
            hidden: self.hidden.map(f),
            output: self.output.map(f),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a T)>) {
        self.hidden.visit(&format!("{prefix}.hidden"), out);
        self.output.visit(&format!("{prefix}.output"), out);
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut T>) {
        self.hidden.visit_mut(out);
        self.output.visit_mut(out);
    }
}

impl<T> GaussianHeads<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> GaussianHeads<U> {
        GaussianHeads {
            mean: self.mean.map(f),
            scale: self.scale.map(f),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a T)>) {
        self.mean.visit(&format!("{prefix}.mean"), out);
        self.scale.visit(&format!("{prefix}.scale"), out);
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut T>) {
        self.mean.visit_mut(out);
        self.scale.visit_mut(out);
    }
}

impl<T> Gru<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Gru<U> {
        Gru {
            reset: self.reset.map(f),
            update: self.update.map(f),
            candidate: self.candidate.map(f),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a T)>) {
        self.reset.visit(&format!("{prefix}.reset"), out);
        self.update.visit(&format!("{prefix}.update"), out);
        self.candidate.visit(&format!("{prefix}.candidate"), out);
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut T>) {
        self.reset.visit_mut(out);
        self.update.visit_mut(out);
        self.candidate.visit_mut(out);
    }
}

impl<T> Weights<T> {
    /// Applies `f` to every tensor in canonical order.
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Weights<U> {
        Weights {
            gru: self.gru.map(&mut f),
            transition: self.transition.map(&mut f),
            emission: self.emission.map(&mut f),
            inference: self.inference.map(&mut f),
            ard: self.ard.as_ref().map(|a| a.map(&mut f)),
        }
    }

    /// `(name, tensor)` pairs in canonical order.
    pub fn named(&self) -> Vec<(String, &T)> {
        let mut out = Vec::new();
        self.gru.visit("gru", &mut out);
        self.transition.visit("transition", &mut out);
        self.emission.visit("emission", &mut out);
        self.inference.visit("inference", &mut out);
        if let Some(ard) = &self.ard {
            ard.visit("ard", &mut out);
        }
        out
    }

    /// Mutable references in the same order as [`Weights::named`].
    pub fn all_mut(&mut self) -> Vec<&mut T> {
        let mut out = Vec::new();
        self.gru.visit_mut(&mut out);
        self.transition.visit_mut(&mut out);
        self.emission.visit_mut(&mut out);
        self.inference.visit_mut(&mut out);
        if let Some(ard) = &mut self.ard {
            ard.visit_mut(&mut out);
        }
        out
    }
}

/// Model configuration together with its learned weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub weights: Weights<Tensor>,
}

impl ModelParams {
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        self.weights.named()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights.all_mut()
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.weights.named().into_iter().map(|(_, t)| t).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Records every tensor on the tape, as leaves when `trainable`,
    /// otherwise as constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Weights<Var> {
        self.weights.map(|t| {
            if trainable {
                tape.leaf(t.clone())
            } else {
                tape.constant(t.clone())
            }
        })
    }

    /// Replaces tensors from a canonical-order list, checking names and shapes.
    pub fn replace_tensors(&mut self, named: Vec<(String, Tensor)>) -> Result<()> {
        let expected: Vec<(String, Vec<usize>)> = self
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if expected.len() != named.len() {
            return Err(Error::Contract(format!(
                "expected {} tensors, got {}",
                expected.len(),
                named.len()
            )));
        }
        for ((name, shape), (got_name, got)) in expected.iter().zip(&named) {
            if name != got_name || shape.as_slice() != got.shape() {
                return Err(Error::Contract(format!(
                    "tensor mismatch: expected {name} {shape:?}, got {got_name} {:?}",
                    got.shape()
                )));
            }
            if let Some(i) = got.first_non_finite() {
                return Err(Error::Numeric(format!("{name}[{i}] is not finite")));
            }
        }
        for (slot, (_, t)) in self.tensors_mut().into_iter().zip(named) {
            *slot = t;
        }
        Ok(())
    }

    /// Learned relevance weights, or `None` when the model has no ARD network.
    pub fn relevance(&self) -> Result<Option<Vec<f64>>> {
        if self.weights.ard.is_none() {
            return Ok(None);
        }
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let ard = bound.ard.as_ref().expect("checked above");
        let w = super::layers::ard_weights(&mut tape, ard, self.config.exogenous_dim)?;
        Ok(Some(tape.value(w).values().to_vec()))
    }
}

fn uniform_linear(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Linear<Tensor> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let values = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Linear {
        weight: Tensor::new(vec![fan_in, fan_out], values).expect("shape matches"),
        bias: Tensor::zeros(&[fan_out]),
    }
}

fn zero_linear(fan_in: usize, fan_out: usize) -> Linear<Tensor> {
    Linear {
        weight: Tensor::zeros(&[fan_in, fan_out]),
        bias: Tensor::zeros(&[fan_out]),
    }
}

fn mlp(rng: &mut ChaCha8Rng, input: usize, width: usize, output: usize) -> Mlp<Tensor> {
    Mlp {
        hidden: uniform_linear(rng, input, width),
        output: uniform_linear(rng, width, output),
    }
}

fn heads(rng: &mut ChaCha8Rng, input: usize, width: usize, output: usize) -> GaussianHeads<Tensor> {
    GaussianHeads {
        mean: mlp(rng, input, width, output),
        scale: mlp(rng, input, width, output),
    }
}

/// Seeded initialization.
///
/// Weights are drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` and biases
/// start at zero. The relevance network's output layer starts at zero, so
/// its logits are zero and the initial relevance is uniform.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = config;
    let gru_in = c.hidden_dim + c.observed_dim;
    let weights = Weights {
        gru: Gru {
            reset: uniform_linear(&mut rng, gru_in, c.hidden_dim),
            update: uniform_linear(&mut rng, gru_in, c.hidden_dim),
            candidate: uniform_linear(&mut rng, gru_in, c.hidden_dim),
        },
        transition: heads(&mut rng, c.transition_input_dim(), c.mlp_dim, c.latent_dim),
        emission: heads(&mut rng, c.emission_input_dim(), c.mlp_dim, c.observed_dim),
        inference: heads(&mut rng, c.inference_input_dim(), c.mlp_dim, c.latent_dim),
        ard: c.use_ard.then(|| Mlp {
            hidden: uniform_linear(&mut rng, c.exogenous_dim, c.exogenous_dim),
            output: zero_linear(c.exogenous_dim, c.exogenous_dim),
        }),
    };
    Ok(ModelParams {
        config: config.clone(),
        weights,
    })
}
