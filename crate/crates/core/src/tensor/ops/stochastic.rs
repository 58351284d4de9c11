use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng;
use crate::tensor::{Backward, BackwardCtx, Graph, Mode, Result, Tensor, TensorError, Var};

struct MaskBack(Vec<f64>);
impl Backward for MaskBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let mut g = ctx.grad.clone();
        for (v, m) in g.data_mut().iter_mut().zip(&self.0) {
            *v *= m;
        }
        vec![Some(g)]
    }
}

struct PassBack;
impl Backward for PassBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        vec![Some(ctx.grad.clone())]
    }
}

/// Inverted-dropout mask: 0 with probability `p`, else `1/(1-p)`.
pub(crate) fn dropout_mask(len: usize, p: f64, seed: u64) -> Vec<f64> {
    let mut r = rng::rng(seed);
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if r.random::<f64>() < p { 0.0 } else { keep })
        .collect()
}

pub(crate) fn gaussian(len: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut r = rng::rng(seed);
    (0..len)
        .map(|_| sigma * r.sample::<f64, _>(StandardNormal))
        .collect()
}

impl Graph {
    pub fn dropout(&mut self, x: Var, p: f64, mode: Mode, seed: u64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::invalid("dropout", format!("p = {p} outside [0, 1)")));
        }
        if mode == Mode::Infer || p == 0.0 {
            return Ok(x);
        }
        let mask = dropout_mask(self.value(x).len(), p, seed);
        let mut v = self.value(x).clone();
        for (a, m) in v.data_mut().iter_mut().zip(&mask) {
            *a *= m;
        }
        self.apply(v, &[x], Box::new(MaskBack(mask)))
    }

    pub fn gaussian_noise(&mut self, x: Var, sigma: f64, mode: Mode, seed: u64) -> Result<Var> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(TensorError::invalid(
                "gaussian_noise",
                format!("sigma = {sigma} must be finite and non-negative"),
            ));
        }
        if mode == Mode::Infer || sigma == 0.0 {
            return Ok(x);
        }
        let noise = gaussian(self.value(x).len(), sigma, seed);
        let mut v = self.value(x).clone();
        for (a, e) in v.data_mut().iter_mut().zip(&noise) {
            *a += e;
        }
        self.apply(v, &[x], Box::new(PassBack))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_cases() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_fn(&[10], |i| i as f64));
        assert_eq!(g.dropout(x, 0.0, Mode::Train, 1).unwrap(), x);
        assert_eq!(g.dropout(x, 0.9, Mode::Infer, 1).unwrap(), x);
        assert_eq!(g.gaussian_noise(x, 0.0, Mode::Train, 1).unwrap(), x);
        assert_eq!(g.gaussian_noise(x, 0.3, Mode::Infer, 1).unwrap(), x);
    }

    #[test]
    fn argument_errors() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[4]));
        assert!(g.dropout(x, 1.0, Mode::Train, 0).is_err());
        assert!(g.dropout(x, -0.1, Mode::Train, 0).is_err());
        assert!(g.gaussian_noise(x, -1.0, Mode::Train, 0).is_err());
    }

    #[test]
    fn dropout_statistics() {
        let n = 1_000_000;
        let mask = dropout_mask(n, 0.25, 42);
        let zeros = mask.iter().filter(|&&m| m == 0.0).count() as f64 / n as f64;
        let mean = mask.iter().sum::<f64>() / n as f64;
        assert!((0.248..=0.252).contains(&zeros), "zero fraction {zeros}");
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
    }

    #[test]
    fn noise_statistics_and_reproducibility() {
        let n = 1_000_000;
        let e = gaussian(n, 0.05, 9);
        let mean = e.iter().sum::<f64>() / n as f64;
        let std = (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((0.0498..=0.0502).contains(&std), "std {std}");
        assert_eq!(e[..100], gaussian(n, 0.05, 9)[..100]);
        assert_eq!(dropout_mask(50, 0.3, 3), dropout_mask(50, 0.3, 3));
    }
}
