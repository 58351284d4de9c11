use serde::{Deserialize, Serialize};

use crate::nets::Param;
use crate::tensor::Tensor;

use super::{Result, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment accumulators, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &[Param]) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam step. Parameters with `l2 > 0` get `2·l2·w` added
/// to their gradient first; parameters without a gradient are left alone.
pub fn adam_step(params: &mut [Param], grads: &[Option<Tensor>], state: &mut AdamState, lr: f64, h: &AdamHyper) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TrainError::Optimizer(format!(
            "{} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if let Some(g) = g {
            if g.shape() != p.value.shape() {
                return Err(TrainError::Optimizer(format!(
                    "gradient of {} has shape {:?}, parameter {:?}",
                    p.name,
                    g.shape(),
                    p.value.shape()
                )));
            }
            if !g.all_finite() {
                return Err(TrainError::Optimizer(format!("non-finite gradient for {}", p.name)));
            }
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - h.beta1.powi(t);
    let c2 = 1.0 - h.beta2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let Some(g) = g else { continue };
        let l2 = if p.trainable { p.l2 } else { 0.0 };
        let w = p.value.data_mut();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for j in 0..w.len() {
            let gj = g.data()[j] + 2.0 * l2 * w[j];
            m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * gj;
            v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * gj * gj;
            let mhat = m[j] / c1;
            let vhat = v[j] / c2;
            w[j] -= lr * mhat / (vhat.sqrt() + h.eps);
        }
    }
    Ok(())
}

/// Divides the learning rate by `factor` after `patience` epochs without a
/// strict improvement of the validation loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauState {
    pub best: f64,
    pub counter: usize,
    pub lr: f64,
    pub patience: usize,
    pub factor: f64,
}

impl PlateauState {
    pub fn new(lr: f64, patience: usize, factor: f64) -> Self {
        PlateauState {
            best: f64::INFINITY,
            counter: 0,
            lr,
            patience,
            factor,
        }
    }

    /// Returns true when the rate was just reduced.
    pub fn update(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.counter = 0;
            return false;
        }
        self.counter += 1;
        if self.counter >= self.patience {
            self.lr /= self.factor;
            self.counter = 0;
            return true;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_schedule() {
        let mut s = PlateauState::new(1e-4, 4, 5.0);
        for l in [1.0, 0.9, 0.8] {
            s.update(l);
        }
        assert_eq!(s.lr, 1e-4);
        let mut s = PlateauState::new(1e-4, 4, 5.0);
        for _ in 0..5 {
            s.update(1.0);
        }
        assert!((s.lr - 2e-5).abs() < 1e-18);
        for _ in 0..4 {
            s.update(1.0);
        }
        assert!((s.lr - 4e-6).abs() < 1e-18);
    }
}
