use crate::rng;
use crate::tensor::ops::LEAKY_SLOPE;
use crate::tensor::{Checkpoint, Graph, Mode, Tensor, Var};

use super::layers::{Conv, Dense, Fwd, Lstm};
use super::store::ParamStore;
use super::{NetConfig, NetError, Result};

/// Filters of the seven conv layers.
pub const CONV_FILTERS: [usize; 7] = [32, 32, 32, 64, 64, 128, 128];
/// 0-based conv layers followed by a (2, 2, 1) max pool.
pub const POOL_AFTER: [usize; 5] = [0, 1, 2, 4, 6];
/// Conv-block dropout sites: after the 2nd and 4th pools (convs 2 and 5) and after conv 6.
const CONV_DROPOUT_AFTER: [usize; 3] = [1, 4, 5];
const INPUT_CHANNELS: usize = 3;
const POOL: [usize; 3] = [2, 2, 1];

const DROPOUT_STREAM: u64 = 300;

/// 7 × Conv3D → reshape (L_v, N_f) → LSTM → flatten → dense ELU → dense sigmoid.
#[derive(Debug, Clone)]
pub struct LipReader {
    pub cfg: NetConfig,
    pub store: ParamStore,
    convs: Vec<Conv>,
    lstm: Lstm,
    mlp: Dense,
    output: Dense,
}

impl LipReader {
    pub fn build(cfg: &NetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::default();
        let mut convs = Vec::new();
        let mut channels = INPUT_CHANNELS;
        for (i, &f) in CONV_FILTERS.iter().enumerate() {
            convs.push(Conv::new(&mut store, &format!("lip.conv{}", i + 1), channels, f, cfg.l2, rng::derive(seed, i as u64))?);
            channels = f;
        }
        let lstm = Lstm::new(&mut store, "lip.lstm", cfg.n_features(), cfg.lstm_units, rng::derive(seed, 20))?;
        let mlp = Dense::new(&mut store, "lip.mlp", cfg.lv * cfg.lstm_units, cfg.mlp_hidden, true, rng::derive(seed, 21))?;
        let output = Dense::new(&mut store, "lip.out", cfg.mlp_hidden, cfg.output_width(), false, rng::derive(seed, 22))?;
        Ok(LipReader {
            cfg: *cfg,
            store,
            convs,
            lstm,
            mlp,
            output,
        })
    }

    pub fn input_shape(&self, n: usize) -> [usize; 5] {
        [n, INPUT_CHANNELS, self.cfg.h, self.cfg.w, self.cfg.lv]
    }

    /// Records the output shape of every conv-block stage (batch axis dropped)
    /// when `trace` is given.
    pub(crate) fn forward_graph(
        &self,
        f: &mut Fwd,
        x: Var,
        mut trace: Option<&mut Vec<(String, Vec<usize>)>>,
    ) -> crate::tensor::Result<Var> {
        let cfg = &self.cfg;
        let mut record = |name: String, g: &Graph, v: Var| {
            if let Some(t) = trace.as_deref_mut() {
                t.push((name, g.shape(v)[1..].to_vec()));
            }
        };
        record("input".into(), f.g, x);
        let mut h = x;
        for (i, conv) in self.convs.iter().enumerate() {
            h = conv.forward(f, h)?;
            h = if i + 1 == self.convs.len() {
                f.g.elu(h, cfg.elu_alpha)?
            } else {
                f.g.leaky_relu(h, LEAKY_SLOPE)?
            };
            record(format!("conv{}", i + 1), f.g, h);
            if POOL_AFTER.contains(&i) {
                h = f.g.maxpool3d(h, POOL)?;
                record(format!("pool{}", i + 1), f.g, h);
            }
            if CONV_DROPOUT_AFTER.contains(&i) {
                h = f.dropout(h, cfg.dropout_conv, DROPOUT_STREAM + i as u64)?;
            }
        }
        let seq = f.g.time_major(h)?;
        record("reshape".into(), f.g, seq);
        let mut r = self.lstm.forward(f, seq)?;
        r = f.g.elu(r, cfg.elu_alpha)?;
        r = f.dropout(r, cfg.dropout_rnn, DROPOUT_STREAM + 20)?;
        record("lstm".into(), f.g, r);
        let n = f.g.shape(r)[0];
        r = f.g.reshape(r, &[n, cfg.lv * cfg.lstm_units])?;
        record("flatten".into(), f.g, r);
        r = self.mlp.forward(f, r)?;
        r = f.g.elu(r, cfg.elu_alpha)?;
        r = f.dropout(r, cfg.dropout_rnn, DROPOUT_STREAM + 21)?;
        record("mlp".into(), f.g, r);
        let y = self.output.forward(f, r)?;
        let y = f.g.sigmoid(y)?;
        record("output".into(), f.g, y);
        Ok(y)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let n = x.shape().first().copied().unwrap_or(0);
        if x.shape() != self.input_shape(n) {
            return Err(NetError::Mismatch(format!(
                "slices must be (N, {INPUT_CHANNELS}, {}, {}, {}), got {:?}",
                self.cfg.h,
                self.cfg.w,
                self.cfg.lv,
                x.shape()
            )));
        }
        Ok(())
    }

    fn run(&self, x: &Tensor, mode: Mode, seed: u64, trace: Option<&mut Vec<(String, Vec<usize>)>>) -> Result<Tensor> {
        self.check_input(x)?;
        let mut g = Graph::new();
        let vars = self.store.bind_frozen(&mut g);
        let xv = g.constant(x.clone());
        let mut f = Fwd::new(&mut g, &vars, &self.store, mode, seed);
        let y = self.forward_graph(&mut f, xv, trace)?;
        Ok(g.value(y).clone())
    }

    /// Inference-mode forward of (N, 3, H, W, L_v) slices → (N, 32·L_a).
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.run(x, Mode::Infer, 0, None)
    }

    /// Forward in the given mode; `seed` drives dropout in training mode.
    pub fn forward(&self, x: &Tensor, mode: Mode, seed: u64) -> Result<Tensor> {
        self.run(x, mode, seed, None)
    }

    /// Per-stage output shapes of an inference pass on `x`.
    pub fn shape_trace(&self, x: &Tensor) -> Result<Vec<(String, Vec<usize>)>> {
        let mut trace = Vec::new();
        self.run(x, Mode::Infer, 0, Some(&mut trace))?;
        Ok(trace)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        self.store.to_checkpoint()
    }

    pub fn from_checkpoint(cfg: &NetConfig, ckpt: &Checkpoint) -> Result<Self> {
        let mut m = Self::build(cfg, 0)?;
        m.store.load_checkpoint(ckpt)?;
        Ok(m)
    }
}
