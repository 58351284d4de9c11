//! Central finite-difference verification of backpropagated gradients.

use super::{Graph, Result, Tensor, TensorError, Var};

/// Denominator floor for the relative error, so that coordinates whose true
/// gradient is (numerically) zero are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Largest relative error over every coordinate of every input.
///
/// `f` builds a scalar from leaf handles of `inputs`; it is re-run twice per
/// coordinate with that coordinate shifted by ±`eps`.
pub fn grad_check_inputs<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = values.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        let v = g.value(out);
        if v.len() != 1 {
            return Err(TensorError::shape("grad_check", "function must return a scalar"));
        }
        Ok(v.item())
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    if g.value(out).len() != 1 {
        return Err(TensorError::shape("grad_check", "function must return a scalar"));
    }
    if !g.value(out).item().is_finite() {
        return Err(TensorError::NonFinite { op: "grad_check" });
    }
    g.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let mut worst = 0.0f64;
    let mut shifted = inputs.to_vec();
    for (which, grad) in analytic.iter().enumerate() {
        for j in 0..inputs[which].len() {
            let orig = inputs[which].data()[j];
            shifted[which].data_mut()[j] = orig + eps;
            let up = eval(&shifted)?;
            shifted[which].data_mut()[j] = orig - eps;
            let down = eval(&shifted)?;
            shifted[which].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = grad.data()[j];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

/// Single-input form of [`grad_check_inputs`].
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    grad_check_inputs(|g, v| f(g, v[0]), std::slice::from_ref(x), eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_is_exact() {
        let x = Tensor::from_fn(&[50], |i| (i as f64 * 0.37).sin() * 2.0);
        let err = grad_check(|g, v| g.sum_squares(v), &x, 1e-5).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn non_finite_value_is_error() {
        let x = Tensor::full(&[2], f64::MAX);
        let r = grad_check(|g, v| g.sum_squares(v), &x, 1e-5);
        assert!(r.is_err());
    }
}
