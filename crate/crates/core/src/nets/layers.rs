use crate::rng;
use crate::tensor::ops::{BatchStats, LstmParams};
use crate::tensor::{Graph, Mode, Result, Tensor, Var};

use super::store::ParamStore;
use super::he_init;

/// State threaded through one forward pass.
pub(crate) struct Fwd<'a> {
    pub g: &'a mut Graph,
    pub vars: &'a [Var],
    pub store: &'a ParamStore,
    pub mode: Mode,
    pub seed: u64,
    /// (mean buffer, var buffer, batch moments) for every batch norm run in training mode.
    pub stats: Vec<(usize, usize, BatchStats)>,
}

impl<'a> Fwd<'a> {
    pub fn new(g: &'a mut Graph, vars: &'a [Var], store: &'a ParamStore, mode: Mode, seed: u64) -> Self {
        Fwd {
            g,
            vars,
            store,
            mode,
            seed,
            stats: Vec::new(),
        }
    }

    pub fn var(&self, i: usize) -> Var {
        self.vars[i]
    }

    pub fn dropout(&mut self, x: Var, p: f64, stream: u64) -> Result<Var> {
        let seed = rng::derive(self.seed, stream);
        self.g.dropout(x, p, self.mode, seed)
    }

    pub fn noise(&mut self, x: Var, sigma: f64, stream: u64) -> Result<Var> {
        let seed = rng::derive(self.seed, stream);
        self.g.gaussian_noise(x, sigma, self.mode, seed)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BatchNorm {
    gamma: usize,
    beta: usize,
    mean: usize,
    var: usize,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, features: usize) -> Self {
        BatchNorm {
            gamma: store.add(format!("{name}.gamma"), Tensor::ones(&[features]), 0.0),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[features]), 0.0),
            mean: store.add_buffer(format!("{name}.running_mean"), Tensor::zeros(&[features])),
            var: store.add_buffer(format!("{name}.running_var"), Tensor::ones(&[features])),
        }
    }

    pub fn forward(&self, f: &mut Fwd, x: Var) -> Result<Var> {
        let out = f.g.batchnorm(
            x,
            f.var(self.gamma),
            f.var(self.beta),
            f.store.buffer(self.mean),
            f.store.buffer(self.var),
            f.mode,
        )?;
        if let Some(s) = out.stats {
            f.stats.push((self.mean, self.var, s));
        }
        Ok(out.out)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dense {
    w: usize,
    b: usize,
    bn: Option<BatchNorm>,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, bn: bool, seed: u64) -> super::Result<Self> {
        let w = store.add(format!("{name}.w"), he_init(&[inputs, outputs], inputs, seed)?, 0.0);
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[outputs]), 0.0);
        let bn = bn.then(|| BatchNorm::new(store, &format!("{name}.bn"), outputs));
        Ok(Dense { w, b, bn })
    }

    /// Affine map followed by batch norm when present (pre-activation).
    pub fn forward(&self, f: &mut Fwd, x: Var) -> Result<Var> {
        let y = f.g.dense(x, f.var(self.w), f.var(self.b))?;
        match self.bn {
            Some(bn) => bn.forward(f, y),
            None => Ok(y),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Conv {
    k: usize,
    b: usize,
    bn: BatchNorm,
}

pub(crate) const KERNEL: usize = 3;

impl Conv {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, filters: usize, l2: f64, seed: u64) -> super::Result<Self> {
        let fan_in = inputs * KERNEL * KERNEL * KERNEL;
        let k = store.add(
            format!("{name}.kernel"),
            he_init(&[filters, inputs, KERNEL, KERNEL, KERNEL], fan_in, seed)?,
            l2,
        );
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[filters]), 0.0);
        let bn = BatchNorm::new(store, &format!("{name}.bn"), filters);
        Ok(Conv { k, b, bn })
    }

    pub fn forward(&self, f: &mut Fwd, x: Var) -> Result<Var> {
        let y = f.g.conv3d_same(x, f.var(self.k), f.var(self.b))?;
        self.bn.forward(f, y)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Lstm {
    w_ih: usize,
    w_hh: usize,
    bias: usize,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, units: usize, seed: u64) -> super::Result<Self> {
        let w_ih = store.add(
            format!("{name}.w_ih"),
            he_init(&[inputs, 4 * units], inputs, rng::derive(seed, 0))?,
            0.0,
        );
        let w_hh = store.add(
            format!("{name}.w_hh"),
            he_init(&[units, 4 * units], units, rng::derive(seed, 1))?,
            0.0,
        );
        // forget gate starts open
        let bias = Tensor::from_fn(&[4 * units], |i| if (units..2 * units).contains(&i) { 1.0 } else { 0.0 });
        let bias = store.add(format!("{name}.bias"), bias, 0.0);
        Ok(Lstm { w_ih, w_hh, bias })
    }

    pub fn forward(&self, f: &mut Fwd, x: Var) -> Result<Var> {
        let p = LstmParams {
            w_ih: f.var(self.w_ih),
            w_hh: f.var(self.w_hh),
            bias: f.var(self.bias),
        };
        f.g.lstm_seq(x, p)
    }
}
