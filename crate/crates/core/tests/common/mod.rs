//! Plain-f64 reimplementation of the model recursions, written without the
//! tape, used as an independent oracle.
#![allow(dead_code)]

use deepstate::model::{GaussianHeads, Gru, Linear, Mlp, ModelConfig, ModelParams};
use deepstate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn affine(x: &[f64], l: &Linear<Tensor>) -> Vec<f64> {
    let out = l.bias.len();
    assert_eq!(l.weight.shape(), &[x.len(), out]);
    (0..out)
        .map(|j| {
            let mut acc = l.bias.values()[j];
            for (i, xi) in x.iter().enumerate() {
                acc += xi * l.weight.values()[i * out + j];
            }
            acc
        })
        .collect()
}

pub fn mlp(x: &[f64], m: &Mlp<Tensor>) -> Vec<f64> {
    let hidden: Vec<f64> = affine(x, &m.hidden).iter().map(|v| v.tanh()).collect();
    affine(&hidden, &m.output)
}

pub fn softplus(v: f64) -> f64 {
    (1.0 + v.exp()).ln()
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn cat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

pub fn gru(h: &[f64], x: &[f64], g: &Gru<Tensor>) -> Vec<f64> {
    let hx = cat(&[h, x]);
    let r: Vec<f64> = affine(&hx, &g.reset).into_iter().map(sigmoid).collect();
    let u: Vec<f64> = affine(&hx, &g.update).into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let c: Vec<f64> = affine(&cat(&[&rh, x]), &g.candidate).into_iter().map(f64::tanh).collect();
    (0..h.len()).map(|i| (1.0 - u[i]) * h[i] + u[i] * c[i]).collect()
}

pub fn gaussian(input: &[f64], heads: &GaussianHeads<Tensor>) -> (Vec<f64>, Vec<f64>) {
    let mean = mlp(input, &heads.mean);
    let std = mlp(input, &heads.scale).into_iter().map(softplus).collect();
    (mean, std)
}

pub fn relevance(p: &ModelParams) -> Option<Vec<f64>> {
    let ard = p.weights.ard.as_ref()?;
    let d = p.config.exogenous_dim;
    let logits = mlp(&vec![1.0; d], ard);
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    Some(e.into_iter().map(|v| v / s).collect())
}

pub fn weighted(u: &[f64], w: &Option<Vec<f64>>) -> Vec<f64> {
    match w {
        Some(w) => u.iter().zip(w).map(|(a, b)| a * b).collect(),
        None => u.to_vec(),
    }
}

pub fn kl(mq: &[f64], sq: &[f64], mp: &[f64], sp: &[f64]) -> f64 {
    (0..mq.len())
        .map(|i| (sp[i] / sq[i]).ln() + (sq[i] * sq[i] + (mq[i] - mp[i]).powi(2)) / (2.0 * sp[i] * sp[i]) - 0.5)
        .sum()
}

pub fn log_pdf(x: &[f64], m: &[f64], s: &[f64]) -> f64 {
    (0..x.len())
        .map(|i| -0.5 * (2.0 * std::f64::consts::PI).ln() - s[i].ln() - (x[i] - m[i]).powi(2) / (2.0 * s[i] * s[i]))
        .sum()
}

/// Negative ELBO of one window averaged over `eps.len()` passes; `eps[k][t]`
/// is the posterior noise of pass `k` at step `t`.
pub fn neg_elbo(p: &ModelParams, x: &[Vec<f64>], u: &[Vec<f64>], eps: &[Vec<Vec<f64>>]) -> f64 {
    let c = &p.config;
    let w = relevance(p);
    let mut total = 0.0;
    for pass in eps {
        let mut h = vec![0.0; c.hidden_dim];
        let mut z = vec![0.0; c.latent_dim];
        let mut x_prev = x[0].clone();
        for t in 0..x.len() {
            h = gru(&h, &x_prev, &p.weights.gru);
            let ur = weighted(&u[t], &w);
            let prior_in = if c.transition_uses_exogenous { cat(&[&z, &h, &ur]) } else { cat(&[&z, &h]) };
            let (mp, sp) = gaussian(&prior_in, &p.weights.transition);
            let (mq, sq) = gaussian(&cat(&[&z, &x[t], &h, &ur]), &p.weights.inference);
            z = (0..z.len()).map(|i| mq[i] + pass[t][i] * sq[i]).collect();
            let (mx, sx) = gaussian(&cat(&[&z, &h, &ur]), &p.weights.emission);
            total += log_pdf(&x[t], &mx, &sx) - kl(&mq, &sq, &mp, &sp);
            x_prev = x[t].clone();
        }
    }
    -total / eps.len() as f64
}

/// `h_T` under the posterior-mean warm-up.
pub fn warm_hidden(p: &ModelParams, x: &[Vec<f64>], u: &[Vec<f64>]) -> Vec<f64> {
    let c = &p.config;
    let w = relevance(p);
    let mut h = vec![0.0; c.hidden_dim];
    let mut z = vec![0.0; c.latent_dim];
    let mut x_prev = x[0].clone();
    for t in 0..x.len() {
        h = gru(&h, &x_prev, &p.weights.gru);
        let ur = weighted(&u[t], &w);
        z = gaussian(&cat(&[&z, &x[t], &h, &ur]), &p.weights.inference).0;
        x_prev = x[t].clone();
    }
    h
}

pub fn toy_config() -> ModelConfig {
    ModelConfig {
        latent_dim: 2,
        hidden_dim: 4,
        mlp_dim: 5,
        ..ModelConfig::new(1, 2)
    }
}

/// Seeded parameters with every tensor (biases and the zero ARD output
/// layer included) jittered away from its initial value.
pub fn jittered(config: &ModelConfig, seed: u64) -> ModelParams {
    let mut p = deepstate::model::init_params(config, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for t in p.tensors_mut() {
        for v in t.values_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    p
}

pub fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

/// Toy series `[T x M]`, `[T x D]`.
pub fn toy_series(len: usize, m: usize, d: usize, seed: u64) -> (Tensor, Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..len * m).map(|_| rng.random_range(-1.5..1.5)).collect();
    let u = (0..len * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    (Tensor::matrix(len, m, x).unwrap(), Tensor::matrix(len, d, u).unwrap())
}

/// `E_q[log q(z) - log p(z)]` by sampling.
pub fn monte_carlo_kl(mq: &[f64], sq: &[f64], mp: &[f64], sp: &[f64], draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..draws {
        for i in 0..mq.len() {
            let e: f64 = StandardNormal.sample(&mut rng);
            let z = mq[i] + sq[i] * e;
            let lq = -sq[i].ln() - 0.5 * e * e;
            let lp = -sp[i].ln() - 0.5 * ((z - mp[i]) / sp[i]).powi(2);
            acc += lq - lp;
        }
    }
    acc / draws as f64
}
