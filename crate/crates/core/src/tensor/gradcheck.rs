use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Worst relative disagreement between `backward` and central differences
/// for a scalar function of one tensor.
///
/// The relative error of each component uses the denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_diff_check<F>(f: F, params: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    finite_diff_check_many(
        |tape, vars| f(tape, vars[0]),
        std::slice::from_ref(params),
        step,
    )
}

/// [`finite_diff_check`] over several parameter tensors at once.
pub fn finite_diff_check_many<F>(f: F, params: &[Tensor], step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::Contract(format!("step must be positive, got {step}")));
    }

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let root = f(&mut tape, &vars)?;
    let grads = tape.backward(root)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| grads.get_or_zeros(v, p))
        .collect();

    let eval = |probe: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = probe.iter().map(|p| tape.leaf(p.clone())).collect();
        let root = f(&mut tape, &vars)?;
        let value = tape.value(root).item()?;
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "function value {value} is not finite"
            )));
        }
        Ok(value)
    };

    let mut probe = params.to_vec();
    let mut worst: f64 = 0.0;
    for (t, grad) in analytic.iter().enumerate() {
        for i in 0..params[t].len() {
            let original = params[t].values()[i];
            probe[t].values_mut()[i] = original + step;
            let plus = eval(&probe)?;
            probe[t].values_mut()[i] = original - step;
            let minus = eval(&probe)?;
            probe[t].values_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let exact = grad.values()[i];
            let denom = exact.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((exact - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
