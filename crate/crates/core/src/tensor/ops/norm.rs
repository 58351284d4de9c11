use crate::tensor::{Backward, BackwardCtx, Graph, Mode, Result, Tensor, TensorError, Var};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.99;

/// Per-feature moments of one training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BatchStats {
    /// Exponential moving average update of running moments.
    pub fn update_running(&self, running_mean: &mut Tensor, running_var: &mut Tensor) {
        for (r, m) in running_mean.data_mut().iter_mut().zip(&self.mean) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * m;
        }
        for (r, v) in running_var.data_mut().iter_mut().zip(&self.var) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * v;
        }
    }
}

pub struct BatchNormOutput {
    pub out: Var,
    /// Present in training mode only.
    pub stats: Option<BatchStats>,
}

struct BnBack {
    /// Normalized input, same layout as x.
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    c: usize,
    inner: usize,
    batch_stats: bool,
}

impl Backward for BnBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let gamma = ctx.inputs[1].data();
        let g = ctx.grad.data();
        let (c, inner) = (self.c, self.inner);
        let n = g.len() / (c * inner);
        let m = (n * inner) as f64;

        let mut sum_g = vec![0.0; c];
        let mut sum_gx = vec![0.0; c];
        for b in 0..n {
            for f in 0..c {
                let off = (b * c + f) * inner;
                for j in off..off + inner {
                    sum_g[f] += g[j];
                    sum_gx[f] += g[j] * self.xhat[j];
                }
            }
        }

        let gx = ctx.needs[0].then(|| {
            let mut out = vec![0.0; g.len()];
            for b in 0..n {
                for f in 0..c {
                    let off = (b * c + f) * inner;
                    let k = gamma[f] * self.inv_std[f];
                    for j in off..off + inner {
                        out[j] = if self.batch_stats {
                            k * (g[j] - sum_g[f] / m - self.xhat[j] * sum_gx[f] / m)
                        } else {
                            k * g[j]
                        };
                    }
                }
            }
            Tensor::new(ctx.inputs[0].shape(), out).unwrap()
        });
        vec![
            gx,
            ctx.needs[1].then(|| Tensor::new(&[c], sum_gx).unwrap()),
            ctx.needs[2].then(|| Tensor::new(&[c], sum_g).unwrap()),
        ]
    }
}

impl Graph {
    /// Batch normalization over axis 1 of an (N, C, ...) tensor.
    ///
    /// Training mode normalizes with the batch moments and reports them so the
    /// caller can update its running averages; inference mode uses the running
    /// moments passed in.
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &Tensor,
        running_var: &Tensor,
        mode: Mode,
    ) -> Result<BatchNormOutput> {
        let xs = self.shape(x).to_vec();
        if xs.len() < 2 {
            return Err(TensorError::shape("batchnorm", format!("input {xs:?}")));
        }
        let (n, c) = (xs[0], xs[1]);
        for t in [self.shape(gamma), self.shape(beta), running_mean.shape(), running_var.shape()] {
            if t != [c] {
                return Err(TensorError::shape(
                    "batchnorm",
                    format!("per-feature tensor {t:?} for {c} features"),
                ));
            }
        }
        if mode == Mode::Train && n < 2 {
            return Err(TensorError::invalid(
                "batchnorm",
                "training mode needs a batch of at least 2",
            ));
        }
        let inner: usize = xs[2..].iter().product();
        let xd = self.value(x).data();

        let (mean, var) = match mode {
            Mode::Train => {
                let m = (n * inner) as f64;
                let mut mean = vec![0.0; c];
                for b in 0..n {
                    for f in 0..c {
                        let off = (b * c + f) * inner;
                        mean[f] += xd[off..off + inner].iter().sum::<f64>();
                    }
                }
                mean.iter_mut().for_each(|v| *v /= m);
                let mut var = vec![0.0; c];
                for b in 0..n {
                    for f in 0..c {
                        let off = (b * c + f) * inner;
                        var[f] += xd[off..off + inner]
                            .iter()
                            .map(|v| (v - mean[f]).powi(2))
                            .sum::<f64>();
                    }
                }
                var.iter_mut().for_each(|v| *v /= m);
                (mean, var)
            }
            Mode::Infer => (running_mean.data().to_vec(), running_var.data().to_vec()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();
        let (gd, bd) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![0.0; xd.len()];
        let mut out = vec![0.0; xd.len()];
        for b in 0..n {
            for f in 0..c {
                let off = (b * c + f) * inner;
                for j in off..off + inner {
                    xhat[j] = (xd[j] - mean[f]) * inv_std[f];
                    out[j] = gd[f] * xhat[j] + bd[f];
                }
            }
        }
        let v = Tensor::new(&xs, out)?;
        let back = BnBack {
            xhat,
            inv_std,
            c,
            inner,
            batch_stats: mode == Mode::Train,
        };
        let out = self.apply(v, &[x, gamma, beta], Box::new(back))?;
        let stats = (mode == Mode::Train).then_some(BatchStats { mean, var });
        Ok(BatchNormOutput { out, stats })
    }
}
