//! The two networks: a dense denoising autoencoder over spectrogram frames and
//! a 3D-CNN + LSTM lip reader that predicts its bottleneck codes.

mod autoencoder;
pub(crate) mod layers;
mod lipreader;
mod store;

use std::io::{Read, Write};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::tensor::{Tensor, TensorError};

pub use autoencoder::{AeOutput, Autoencoder};
pub use lipreader::{LipReader, CONV_FILTERS, POOL_AFTER};
pub use store::{Param, ParamStore};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid config: {key}: {detail}")]
    Config { key: &'static str, detail: String },
    #[error("checkpoint does not match model: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NetError>;

fn config_err(key: &'static str, detail: impl Into<String>) -> NetError {
    NetError::Config {
        key,
        detail: detail.into(),
    }
}

/// Hyperparameters shared by both networks. Serialized as the JSON sidecar of
/// every checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub h: usize,
    pub w: usize,
    pub lv: usize,
    pub la: usize,
    pub bottleneck: usize,
    pub noise_sigma: f64,
    pub dropout_conv: f64,
    pub dropout_rnn: f64,
    pub l2: f64,
    pub elu_alpha: f64,
    pub lstm_units: usize,
    pub mlp_hidden: usize,
    /// Dropout on the autoencoder's bottleneck during training; 0 disables it.
    pub ae_dropout: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            h: 128,
            w: 128,
            lv: 5,
            la: 20,
            bottleneck: 32,
            noise_sigma: 0.05,
            dropout_conv: 0.25,
            dropout_rnn: 0.3,
            l2: 0.0005,
            elu_alpha: 1.0,
            lstm_units: 512,
            mlp_hidden: 512,
            ae_dropout: 0.0,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h", self.h),
            ("w", self.w),
            ("lv", self.lv),
            ("la", self.la),
            ("bottleneck", self.bottleneck),
            ("lstm_units", self.lstm_units),
            ("mlp_hidden", self.mlp_hidden),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(config_err(key, "must be positive"));
            }
        }
        if self.bottleneck > crate::audspec::N_CHANNELS {
            return Err(config_err("bottleneck", format!("{} exceeds 128", self.bottleneck)));
        }
        let pools = 1usize << POOL_AFTER.len();
        if !self.h.is_multiple_of(pools) || !self.w.is_multiple_of(pools) {
            return Err(config_err("h", format!("h and w must be divisible by {pools}, got {}x{}", self.h, self.w)));
        }
        for (key, p) in [
            ("dropout_conv", self.dropout_conv),
            ("dropout_rnn", self.dropout_rnn),
            ("ae_dropout", self.ae_dropout),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(config_err(key, format!("{p} not in [0, 1)")));
            }
        }
        for (key, v) in [("noise_sigma", self.noise_sigma), ("l2", self.l2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(key, format!("{v} must be finite and >= 0")));
            }
        }
        if !(self.elu_alpha > 0.0 && self.elu_alpha.is_finite()) {
            return Err(config_err("elu_alpha", "must be positive"));
        }
        Ok(())
    }

    /// Flattened conv-block features per time step.
    pub fn n_features(&self) -> usize {
        let pools = 1usize << POOL_AFTER.len();
        CONV_FILTERS[CONV_FILTERS.len() - 1] * (self.h / pools) * (self.w / pools)
    }

    /// Width of the lip reader's output layer.
    pub fn output_width(&self) -> usize {
        self.bottleneck * self.la
    }

    pub fn write_sidecar<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read_sidecar<R: Read>(r: R) -> Result<Self> {
        let cfg: NetConfig = serde_json::from_reader(r)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// I.i.d. N(0, 2/fan_in) weights.
pub fn he_init(shape: &[usize], fan_in: usize, seed: u64) -> Result<Tensor> {
    if fan_in == 0 {
        return Err(config_err("fan_in", "must be at least 1"));
    }
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    let mut r = rng::rng(seed);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| normal.sample(&mut r)).collect();
    Ok(Tensor::new(shape, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_round_trip() {
        let cfg = NetConfig {
            bottleneck: 16,
            ..NetConfig::default()
        };
        let mut buf = Vec::new();
        cfg.write_sidecar(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        for key in ["\"h\"", "\"lv\"", "\"la\"", "\"bottleneck\"", "\"noise_sigma\"", "\"elu_alpha\""] {
            assert!(text.contains(key), "{key}");
        }
        assert_eq!(NetConfig::read_sidecar(&buf[..]).unwrap(), cfg);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            NetConfig { bottleneck: 200, ..Default::default() },
            NetConfig { h: 100, ..Default::default() },
            NetConfig { dropout_conv: 1.0, ..Default::default() },
            NetConfig { lv: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert!(NetConfig::read_sidecar(&b"{\"bogus\": 1}"[..]).is_err());
    }

    #[test]
    fn default_feature_count() {
        let cfg = NetConfig::default();
        assert_eq!(cfg.n_features(), 2048);
        assert_eq!(cfg.output_width(), 640);
    }
}
