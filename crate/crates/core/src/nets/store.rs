use crate::tensor::ops::BatchStats;
use crate::tensor::{Checkpoint, Graph, Tensor, Var};

use super::{NetError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
    /// L2 multiplier; the optimizer adds `2·l2·w` to the gradient.
    pub l2: f64,
}

/// Named parameters plus non-trainable buffers (batch-norm running moments).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    buffers: Vec<(String, Tensor)>,
}

impl ParamStore {
    pub(crate) fn add(&mut self, name: impl Into<String>, value: Tensor, l2: f64) -> usize {
        self.params.push(Param {
            name: name.into(),
            value,
            trainable: true,
            l2,
        });
        self.params.len() - 1
    }

    pub(crate) fn add_buffer(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        self.buffers.push((name.into(), value));
        self.buffers.len() - 1
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub(crate) fn buffer(&self, i: usize) -> &Tensor {
        &self.buffers[i].1
    }

    /// Number of scalar parameters, excluding buffers.
    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Puts every parameter on the tape: trainable ones as gradient leaves,
    /// frozen ones as constants. The returned vars are indexed like `params()`.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                if p.trainable {
                    g.leaf(p.value.clone())
                } else {
                    g.constant(p.value.clone())
                }
            })
            .collect()
    }

    /// Puts every parameter on the tape as a constant, for inference.
    pub fn bind_frozen(&self, g: &mut Graph) -> Vec<Var> {
        self.params.iter().map(|p| g.constant(p.value.clone())).collect()
    }

    /// Gradients after `g.backward`, one per parameter (`None` if frozen or unused).
    pub fn grads(&self, g: &Graph, vars: &[Var]) -> Vec<Option<Tensor>> {
        self.params
            .iter()
            .zip(vars)
            .map(|(p, &v)| if p.trainable { g.grad(v).cloned() } else { None })
            .collect()
    }

    pub(crate) fn apply_batch_stats(&mut self, stats: &[(usize, usize, BatchStats)]) {
        for (mean, var, s) in stats {
            let mut m = std::mem::replace(&mut self.buffers[*mean].1, Tensor::scalar(0.0));
            let mut v = std::mem::replace(&mut self.buffers[*var].1, Tensor::scalar(0.0));
            s.update_running(&mut m, &mut v);
            self.buffers[*mean].1 = m;
            self.buffers[*var].1 = v;
        }
    }

    /// Freezes or unfreezes every parameter whose name starts with `prefix`.
    pub fn set_trainable(&mut self, prefix: &str, trainable: bool) {
        for p in self.params.iter_mut().filter(|p| p.name.starts_with(prefix)) {
            p.trainable = trainable;
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let tensors = self
            .params
            .iter()
            .map(|p| (p.name.clone(), p.value.clone()))
            .chain(self.buffers.iter().cloned())
            .collect();
        Checkpoint { tensors }
    }

    /// Replaces every parameter and buffer by the checkpoint tensor of the same
    /// name. Missing names and shape differences are errors.
    pub fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        let slots = self
            .params
            .iter_mut()
            .map(|p| (&p.name, &mut p.value))
            .chain(self.buffers.iter_mut().map(|(n, t)| (&*n, t)));
        for (name, slot) in slots {
            let t = ckpt
                .get(name)
                .ok_or_else(|| NetError::Mismatch(format!("missing tensor {name:?}")))?;
            if t.shape() != slot.shape() {
                return Err(NetError::Mismatch(format!(
                    "{name:?} has shape {:?}, model expects {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t.clone();
        }
        Ok(())
    }
}
