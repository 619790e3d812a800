use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub first: Vec<Tensor>,
    pub second: Vec<Tensor>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. Gradients are validated before anything
/// is modified, so a rejected step leaves `params` and `state` untouched.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[Tensor],
    state: &mut OptimizerState,
    config: &AdamConfig,
) -> Result<()> {
    let names: Vec<(String, Vec<usize>)> = params
        .named_tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    if grads.len() != names.len() || state.first.len() != names.len() {
        return Err(Error::Contract(format!(
            "expected {} gradients and moments, got {} and {}",
            names.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for ((name, shape), g) in names.iter().zip(grads) {
        if g.shape() != shape.as_slice() {
            return Err(Error::Dimension(format!(
                "gradient for {name} has shape {:?}, parameter has {shape:?}",
                g.shape()
            )));
        }
        if let Some(i) = g.first_non_finite() {
            return Err(Error::Numeric(format!(
                "gradient for {name} is not finite at index {i}: {}",
                g.values()[i]
            )));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for (((theta, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        let (theta, m, v) = (theta.values_mut(), m.values_mut(), v.values_mut());
        for i in 0..theta.len() {
            let gi = g.values()[i];
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            theta[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};

    fn small() -> ModelParams {
        let c = ModelConfig {
            latent_dim: 2,
            hidden_dim: 2,
            mlp_dim: 2,
            ..ModelConfig::new(1, 1)
        };
        init_params(&c, 4).unwrap()
    }

    fn grads_like(p: &ModelParams, value: f64) -> Vec<Tensor> {
        p.tensors().iter().map(|t| Tensor::full(t.shape(), value)).collect()
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = small();
        for t in p.tensors_mut() {
            t.values_mut().fill(0.0);
        }
        let g = grads_like(&p, 2.0);
        let mut s = OptimizerState::new(&p);
        adam_step(&mut p, &g, &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(s.step, 1);
        // m_hat = 2, v_hat = 4, step = lr * 2 / (2 + 1e-8)
        let expected = -0.001 * 2.0 / (2.0 + 1e-8);
        for t in p.tensors() {
            for &v in t.values() {
                assert!((v - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = small();
        let before = p.clone();
        let mut s = OptimizerState::new(&p);
        let g = grads_like(&p, 0.0);
        adam_step(&mut p, &g, &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = small();
        let before = p.clone();
        let mut g = grads_like(&p, 1.0);
        g[3].values_mut()[0] = f64::NAN;
        let mut s = OptimizerState::new(&p);
        let name = p.named_tensors()[3].0.clone();
        match adam_step(&mut p, &g, &mut s, &AdamConfig::default()) {
            Err(Error::Numeric(msg)) => assert!(msg.contains(&name), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert_eq!((p, s.step), (before, 0));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = small();
        let mut g = grads_like(&p, 1.0);
        g[0] = Tensor::zeros(&[1]);
        let mut s = OptimizerState::new(&p);
        assert!(matches!(adam_step(&mut p, &g, &mut s, &AdamConfig::default()), Err(Error::Dimension(_))));
    }
}
