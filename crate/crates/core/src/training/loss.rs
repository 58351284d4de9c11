//! Per-sample regression losses: MSE, negative Pearson correlation and their
//! combination `λ·MSE − Pearson`.

use serde::{Deserialize, Serialize};

use crate::tensor::{Backward, BackwardCtx, Graph, Tensor, TensorError, Var};

use super::{Result, TrainError};

/// Below this prediction variance (per element) the correlation term is dropped.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    Corr,
    Corrmse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub kind: LossKind,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    1.0
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            kind: LossKind::Corrmse,
            lambda: 1.0,
        }
    }
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(TrainError::Config(format!("loss lambda {} must be >= 0", self.lambda)));
        }
        Ok(())
    }

    /// Weights of the MSE and correlation terms.
    fn weights(&self) -> (f64, f64) {
        match self.kind {
            LossKind::Mse => (1.0, 0.0),
            LossKind::Corr => (0.0, 1.0),
            LossKind::Corrmse => (self.lambda, 1.0),
        }
    }
}

/// Loss of one sample and its gradient with respect to the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// The correlation term was undefined and left out.
    pub degenerate: bool,
}

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() || y.len() < 2 {
        return Err(TrainError::Loss(format!(
            "need equal lengths >= 2, got {} and {}",
            y.len(),
            yhat.len()
        )));
    }
    Ok(())
}

pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok(crate::stats::mse(y, yhat))
}

pub fn pearson(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    crate::stats::pearson(y, yhat).ok_or_else(|| TrainError::Loss("zero variance".into()))
}

/// `w_mse·MSE(y, ŷ) − w_corr·Pearson(y, ŷ)` with its gradient in ŷ.
fn weighted(y: &[f64], yhat: &[f64], w_mse: f64, w_corr: f64) -> LossValue {
    let n = y.len() as f64;
    let mut grad: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| w_mse * 2.0 * (b - a) / n).collect();
    let mut loss = if w_mse > 0.0 { w_mse * crate::stats::mse(y, yhat) } else { 0.0 };
    if w_corr == 0.0 {
        return LossValue {
            loss,
            grad,
            degenerate: false,
        };
    }
    let (my, mh) = (crate::stats::mean(y), crate::stats::mean(yhat));
    let (mut syh, mut syy, mut shh) = (0.0, 0.0, 0.0);
    for (&a, &b) in y.iter().zip(yhat) {
        let (da, db) = (a - my, b - mh);
        syh += da * db;
        syy += da * da;
        shh += db * db;
    }
    if shh / n < DEGENERATE_VARIANCE || syy / n < DEGENERATE_VARIANCE {
        return LossValue {
            loss,
            grad,
            degenerate: true,
        };
    }
    let denom = (syy * shh).sqrt();
    let r = syh / denom;
    loss -= w_corr * r;
    // d r / d ŷ_i = (y_i − ȳ)/√(Syy·Shh) − r·(ŷ_i − ŷ̄)/Shh
    for ((g, &a), &b) in grad.iter_mut().zip(y).zip(yhat) {
        *g -= w_corr * ((a - my) / denom - r * (b - mh) / shh);
    }
    LossValue {
        loss,
        grad,
        degenerate: false,
    }
}

/// `λ·MSE(y, ŷ) − Pearson(y, ŷ)`. When ŷ (or y) is constant the correlation
/// is undefined; the MSE term alone is returned and `degenerate` is set.
pub fn corrmse(y: &[f64], yhat: &[f64], lambda: f64) -> Result<LossValue> {
    check_pair(y, yhat)?;
    Ok(weighted(y, yhat, lambda, 1.0))
}

/// Loss of one sample under `spec`.
pub fn sample_loss(spec: &LossSpec, y: &[f64], yhat: &[f64]) -> Result<LossValue> {
    check_pair(y, yhat)?;
    let (wm, wc) = spec.weights();
    Ok(weighted(y, yhat, wm, wc))
}

struct LossBack {
    grads: Vec<f64>,
}

impl Backward for LossBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let s = ctx.grad.item();
        let g = self.grads.iter().map(|v| v * s).collect();
        vec![Some(Tensor::new(ctx.inputs[0].shape(), g).unwrap())]
    }
}

/// Batch-mean loss node for (N, D) predictions against fixed targets of the
/// same shape. Returns the node and the number of degenerate samples.
pub fn loss_node(g: &mut Graph, pred: Var, target: &Tensor, spec: &LossSpec) -> Result<(Var, usize)> {
    let shape = g.shape(pred).to_vec();
    if shape.len() != 2 || shape != target.shape() {
        return Err(TensorError::shape(
            "loss",
            format!("prediction {shape:?} vs target {:?}", target.shape()),
        )
        .into());
    }
    let (n, d) = (shape[0], shape[1]);
    let p = g.value(pred).data();
    let mut total = 0.0;
    let mut grads = vec![0.0; n * d];
    let mut degenerate = 0;
    for i in 0..n {
        let r = i * d..(i + 1) * d;
        let v = sample_loss(spec, &target.data()[r.clone()], &p[r.clone()])?;
        total += v.loss;
        degenerate += v.degenerate as usize;
        for (dst, gv) in grads[r].iter_mut().zip(&v.grad) {
            *dst = gv / n as f64;
        }
    }
    let node = g.apply(Tensor::scalar(total / n as f64), &[pred], Box::new(LossBack { grads }))?;
    Ok((node, degenerate))
}
