use rand::Rng as _;

use crate::nets::layers::Fwd;
use crate::nets::{Autoencoder, LipReader, ParamStore};
use crate::rng;
use crate::tensor::gradcheck::RELATIVE_FLOOR;
use crate::tensor::{Graph, Mode, Tensor, Var};

use super::loss::loss_node;
use super::{LossSpec, Result, TrainError};

type LossFn<'a, M> = dyn Fn(&M, &mut Fwd) -> Result<Var> + 'a;

/// Training-mode loss of `model` with its current parameters; with `grads`
/// also the backpropagated parameter gradients.
fn evaluate<M>(model: &M, store: &ParamStore, loss: &LossFn<M>, seed: u64, grads: bool) -> Result<(f64, Vec<Option<Tensor>>)> {
    let mut g = Graph::new();
    let vars = if grads { store.bind(&mut g) } else { store.bind_frozen(&mut g) };
    let out = {
        let mut f = Fwd::new(&mut g, &vars, store, Mode::Train, seed);
        loss(model, &mut f)?
    };
    let value = g.value(out).item();
    if !grads {
        return Ok((value, Vec::new()));
    }
    g.backward(out)?;
    Ok((value, store.grads(&g, &vars)))
}

fn check<M: Clone>(
    model: &M,
    store: fn(&M) -> &ParamStore,
    store_mut: fn(&mut M) -> &mut ParamStore,
    loss: &LossFn<M>,
    n_coords: usize,
    eps: f64,
    seed: u64,
) -> Result<f64> {
    let step_seed = rng::derive(seed, 1);
    let (_, analytic) = evaluate(model, store(model), loss, step_seed, true)?;
    let candidates: Vec<(usize, usize)> = store(model)
        .params()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.trainable)
        .flat_map(|(i, p)| (0..p.value.len()).map(move |j| (i, j)))
        .collect();
    if candidates.is_empty() {
        return Err(TrainError::Config("model has no trainable parameters".into()));
    }
    let mut r = rng::rng(seed);
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for _ in 0..n_coords {
        let (i, j) = candidates[r.random_range(0..candidates.len())];
        let orig = store(model).params()[i].value.data()[j];
        let mut at = |v: f64| -> Result<f64> {
            store_mut(&mut probe).params_mut()[i].value.data_mut()[j] = v;
            Ok(evaluate(&probe, store(&probe), loss, step_seed, false)?.0)
        };
        let numeric = (at(orig + eps)? - at(orig - eps)?) / (2.0 * eps);
        at(orig)?;
        let a = analytic[i].as_ref().map_or(0.0, |g| g.data()[j]);
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR));
    }
    Ok(worst)
}

/// Largest relative error between backpropagated and central-difference
/// gradients of the autoencoder's reconstruction loss (bottleneck noise and
/// batch norm in training mode, with a fixed noise draw), over `n_coords`
/// randomly chosen parameter coordinates.
pub fn ae_loss_grad_check(ae: &Autoencoder, frames: &Tensor, spec: &LossSpec, n_coords: usize, eps: f64, seed: u64) -> Result<f64> {
    let loss = |m: &Autoencoder, f: &mut Fwd| -> Result<Var> {
        let x = f.g.constant(frames.clone());
        let out = m.forward_graph(f, x)?;
        Ok(loss_node(f.g, out.recon, frames, spec)?.0)
    };
    check(ae, |m| &m.store, |m| &mut m.store, &loss, n_coords, eps, seed)
}

/// Same check for the lip reader against (N, B·L_a) targets.
pub fn lip_loss_grad_check(
    lip: &LipReader,
    x: &Tensor,
    targets: &Tensor,
    spec: &LossSpec,
    n_coords: usize,
    eps: f64,
    seed: u64,
) -> Result<f64> {
    let loss = |m: &LipReader, f: &mut Fwd| -> Result<Var> {
        let xv = f.g.constant(x.clone());
        let pred = m.forward_graph(f, xv, None)?;
        Ok(loss_node(f.g, pred, targets, spec)?.0)
    };
    check(lip, |m| &m.store, |m| &mut m.store, &loss, n_coords, eps, seed)
}
