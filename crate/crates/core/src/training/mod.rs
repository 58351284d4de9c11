//! Losses, Adam, plateau scheduling, augmentation and the two training loops.

mod augment;
mod check;
mod loops;
mod loss;
mod optim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nets::{NetConfig, NetError};
use crate::tensor::TensorError;

pub use augment::{augment, augment_with, Branch, AUGMENT_NOISE_STD};
pub use check::{ae_loss_grad_check, lip_loss_grad_check};
pub use loops::{
    ae_corr2d, bottleneck_corr2d, decoded_corr2d, train_autoencoder, train_lipreader, EpochRecord, LipData, TrainRun,
};
pub use loss::{corrmse, loss_node, mse, pearson, sample_loss, LossKind, LossSpec, LossValue, DEGENERATE_VARIANCE};
pub use optim::{adam_step, AdamHyper, AdamState, PlateauState};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("loss: {0}")]
    Loss(String),
    #[error("optimizer: {0}")]
    Optimizer(String),
    #[error("empty {0} set")]
    EmptyData(&'static str),
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for Split {
    fn default() -> Self {
        Split {
            train: 0.9,
            val: 0.05,
            test: 0.05,
        }
    }
}

impl Split {
    /// Sizes of the three parts of `n` items; the test part takes the rounding remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = (self.train * n as f64).round() as usize;
        let val = ((self.val * n as f64).round() as usize).min(n - train.min(n));
        let train = train.min(n);
        (train, val, n - train - val)
    }
}

/// Training hyperparameters, read from JSON. Missing keys keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossSpec,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub lr_factor: f64,
    pub seed: u64,
    pub split: Split,
    /// Probability that a training slice is augmented in a given epoch.
    pub augment_prob: f64,
    pub net: NetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::autoencoder()
    }
}

impl TrainConfig {
    pub fn autoencoder() -> Self {
        TrainConfig {
            loss: LossSpec::default(),
            lr: 1e-4,
            batch_size: 128,
            epochs: 50,
            patience: 4,
            lr_factor: 5.0,
            seed: 0,
            split: Split::default(),
            augment_prob: 0.0,
            net: NetConfig::default(),
        }
    }

    pub fn lipreader() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 150,
            augment_prob: 0.5,
            ..Self::autoencoder()
        }
    }

    /// Parses JSON on top of `base`: keys present in the text override it,
    /// nested objects (`loss`, `net`, `split`) key by key.
    pub fn from_json(text: &str, base: &TrainConfig) -> Result<Self> {
        let bad = |e: serde_json::Error| TrainError::Config(e.to_string());
        let patch: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
        let mut merged = serde_json::to_value(base).map_err(bad)?;
        overlay(&mut merged, patch);
        let cfg: TrainConfig = serde_json::from_value(merged).map_err(bad)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.net.validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config(format!("lr {} must be positive", self.lr)));
        }
        if self.batch_size < 2 {
            return Err(TrainError::Config("batch_size must be at least 2".into()));
        }
        if self.patience == 0 || !(self.lr_factor > 1.0) {
            return Err(TrainError::Config("patience must be >= 1 and lr_factor > 1".into()));
        }
        if !(0.0..=1.0).contains(&self.augment_prob) {
            return Err(TrainError::Config(format!("augment_prob {} not in [0, 1]", self.augment_prob)));
        }
        let s = self.split;
        if [s.train, s.val, s.test].iter().any(|v| *v < 0.0) || (s.train + s.val + s.test - 1.0).abs() > 1e-9 {
            return Err(TrainError::Config(format!("split fractions {s:?} must be >= 0 and sum to 1")));
        }
        Ok(())
    }
}

fn overlay(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_overlay() {
        let cfg = TrainConfig::from_json(
            r#"{"epochs": 3, "net": {"bottleneck": 16}, "loss": {"kind": "mse"}}"#,
            &TrainConfig::lipreader(),
        )
        .unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.net.bottleneck, 16);
        assert_eq!(cfg.net.lv, 5);
        assert_eq!(cfg.loss.kind, LossKind::Mse);
        assert!(TrainConfig::from_json(r#"{"epoch": 3}"#, &TrainConfig::default()).is_err());
        assert!(TrainConfig::from_json(r#"{"net": {"bottleneck": 0}}"#, &TrainConfig::default())
            .unwrap_err()
            .to_string()
            .contains("bottleneck"));
    }

    #[test]
    fn split_sizes() {
        assert_eq!(Split::default().sizes(100), (90, 5, 5));
        assert_eq!(Split::default().sizes(20), (18, 1, 1));
    }
}
