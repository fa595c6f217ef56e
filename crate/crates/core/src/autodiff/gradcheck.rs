use super::{Tape, Tensor, Var};
use crate::error::Result;

/// Central-difference estimate of the gradient of `value` at `inputs`, one
/// entry per coordinate of every input tensor.
pub fn central_difference<F>(value: F, inputs: &[Tensor], step: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[Tensor]) -> Result<f64>,
{
    let mut probe = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for t in 0..inputs.len() {
        let mut grad = Vec::with_capacity(inputs[t].len());
        for i in 0..inputs[t].len() {
            let orig = probe[t].data[i];
            probe[t].data[i] = orig + step;
            let plus = value(&probe)?;
            probe[t].data[i] = orig - step;
            let minus = value(&probe)?;
            probe[t].data[i] = orig;
            grad.push((plus - minus) / (2.0 * step));
        }
        out.push(grad);
    }
    Ok(out)
}

/// Maximum over all input coordinates of
/// `|analytic − central difference| / max(1, |analytic|)`.
///
/// `build` records a scalar-valued computation of the given leaves.
pub fn grad_check<F>(build: F, inputs: &[Tensor], step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = build(&mut tape, &vars)?;
    let mut grads = tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| grads.take_or_zeros(v, t.len()))
        .collect();

    let numeric = central_difference(
        |probe| {
            let mut tape = Tape::new();
            let vars: Vec<Var> = probe.iter().map(|t| tape.param(t.clone())).collect();
            let loss = build(&mut tape, &vars)?;
            Ok(tape.value(loss).item())
        },
        inputs,
        step,
    )?;

    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(&numeric) {
        for (&ai, &ni) in a.iter().zip(n) {
            worst = worst.max((ai - ni).abs() / ai.abs().max(1.0));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let err = grad_check(
            |tape, v| {
                let sq = tape.mul(v[0], v[0])?;
                Ok(tape.sum(sq))
            },
            &[Tensor::scalar(3.0)],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn relu_away_from_kink() {
        let x = Tensor::new(vec![4], vec![-0.7, 0.3, 1.2, -2.0]).unwrap();
        let err = grad_check(
            |tape, v| {
                let r = tape.relu(v[0]);
                let sq = tape.mul(r, r)?;
                Ok(tape.sum(sq))
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
