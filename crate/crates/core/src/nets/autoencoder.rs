use crate::audspec::N_CHANNELS;
use crate::rng;
use crate::tensor::ops::LEAKY_SLOPE;
use crate::tensor::{Checkpoint, Graph, Mode, Tensor, Var};

use super::layers::{Dense, Fwd};
use super::store::ParamStore;
use super::{NetConfig, NetError, Result};

const ENCODER_WIDTHS: [usize; 3] = [512, 128, 64];
const DECODER_HIDDEN: usize = 64;

/// Stochastic-layer stream ids.
const NOISE_STREAM: u64 = 100;
const DROPOUT_STREAM: u64 = 200;

/// 128 → 512 → 128 → 64 → B (sigmoid) → dropout, noise → 64 → 128, LeakyReLU elsewhere.
#[derive(Debug, Clone)]
pub struct Autoencoder {
    pub cfg: NetConfig,
    pub store: ParamStore,
    encoder: Vec<Dense>,
    bottleneck: Dense,
    decoder: Dense,
    output: Dense,
}

/// Graph handles of one autoencoder pass.
pub struct AeOutput {
    /// Sigmoid bottleneck activations before noise.
    pub code: Var,
    pub recon: Var,
}

impl Autoencoder {
    pub fn build(cfg: &NetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::default();
        let mut encoder = Vec::new();
        let mut width = N_CHANNELS;
        for (i, &w) in ENCODER_WIDTHS.iter().enumerate() {
            encoder.push(Dense::new(&mut store, &format!("ae.enc{i}"), width, w, true, rng::derive(seed, i as u64))?);
            width = w;
        }
        let b = cfg.bottleneck;
        let bottleneck = Dense::new(&mut store, "ae.code", width, b, false, rng::derive(seed, 10))?;
        let decoder = Dense::new(&mut store, "ae.dec0", b, DECODER_HIDDEN, true, rng::derive(seed, 11))?;
        let output = Dense::new(&mut store, "ae.out", DECODER_HIDDEN, N_CHANNELS, false, rng::derive(seed, 12))?;
        Ok(Autoencoder {
            cfg: *cfg,
            store,
            encoder,
            bottleneck,
            decoder,
            output,
        })
    }

    pub(crate) fn encode_graph(&self, f: &mut Fwd, x: Var) -> crate::tensor::Result<Var> {
        let mut h = x;
        for layer in &self.encoder {
            h = layer.forward(f, h)?;
            h = f.g.leaky_relu(h, LEAKY_SLOPE)?;
        }
        let z = self.bottleneck.forward(f, h)?;
        f.g.sigmoid(z)
    }

    pub(crate) fn decode_graph(&self, f: &mut Fwd, code: Var) -> crate::tensor::Result<Var> {
        let mut h = self.decoder.forward(f, code)?;
        h = f.g.leaky_relu(h, LEAKY_SLOPE)?;
        let y = self.output.forward(f, h)?;
        f.g.leaky_relu(y, LEAKY_SLOPE)
    }

    /// Full pass; bottleneck dropout and noise act in training mode only.
    pub(crate) fn forward_graph(&self, f: &mut Fwd, x: Var) -> crate::tensor::Result<AeOutput> {
        let code = self.encode_graph(f, x)?;
        let mut noisy = code;
        if self.cfg.ae_dropout > 0.0 {
            noisy = f.dropout(noisy, self.cfg.ae_dropout, DROPOUT_STREAM)?;
        }
        let noisy = f.noise(noisy, self.cfg.noise_sigma, NOISE_STREAM)?;
        let recon = self.decode_graph(f, noisy)?;
        Ok(AeOutput { code, recon })
    }

    fn check_width(x: &Tensor, width: usize, what: &str) -> Result<()> {
        if x.ndim() != 2 || x.shape()[1] != width {
            return Err(NetError::Mismatch(format!(
                "{what} must be (N, {width}), got {:?}",
                x.shape()
            )));
        }
        Ok(())
    }

    fn run_infer(&self, x: &Tensor, body: impl Fn(&Self, &mut Fwd, Var) -> crate::tensor::Result<Var>) -> Result<Tensor> {
        let mut g = Graph::new();
        let vars = self.store.bind_frozen(&mut g);
        let xv = g.constant(x.clone());
        let mut f = Fwd::new(&mut g, &vars, &self.store, Mode::Infer, 0);
        let out = body(self, &mut f, xv)?;
        Ok(g.value(out).clone())
    }

    /// Noiseless inference-mode codes of (N, 128) compressed frames.
    pub fn encode(&self, frames: &Tensor) -> Result<Tensor> {
        Self::check_width(frames, N_CHANNELS, "frames")?;
        self.run_infer(frames, |m, f, x| m.encode_graph(f, x))
    }

    /// Inference-mode reconstruction of (N, B) codes.
    pub fn decode(&self, codes: &Tensor) -> Result<Tensor> {
        Self::check_width(codes, self.cfg.bottleneck, "codes")?;
        self.run_infer(codes, |m, f, x| m.decode_graph(f, x))
    }

    /// Inference-mode encode followed by decode.
    pub fn reconstruct(&self, frames: &Tensor) -> Result<Tensor> {
        self.decode(&self.encode(frames)?)
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
