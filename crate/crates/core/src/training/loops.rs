use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::metrics;
use crate::nets::layers::Fwd;
use crate::nets::{Autoencoder, LipReader, ParamStore};
use crate::rng::{self, Rng};
use crate::tensor::{Graph, Mode, Tensor, Var};

use super::augment::augment;
use super::loss::loss_node;
use super::optim::{adam_step, AdamHyper, AdamState, PlateauState};
use super::{Result, TrainConfig, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub history: Vec<EpochRecord>,
    pub seed: u64,
    pub config: TrainConfig,
    /// Epoch whose parameters were kept (lowest validation loss).
    pub best_epoch: usize,
    /// Samples whose correlation term was undefined, summed over training.
    pub degenerate: usize,
}

impl TrainRun {
    pub fn history_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,lr\n");
        for r in &self.history {
            s.push_str(&format!("{},{:.9e},{:.9e},{:.9e}\n", r.epoch, r.train_loss, r.val_loss, r.lr));
        }
        s
    }

    pub fn final_val_loss(&self) -> Option<f64> {
        self.history.last().map(|r| r.val_loss)
    }
}

/// Video slices with their flattened bottleneck targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LipData {
    /// One (3, H, W, L_v) tensor per sample.
    pub slices: Vec<Tensor>,
    /// (N, B·L_a).
    pub targets: Tensor,
}

impl LipData {
    pub fn new(slices: Vec<Tensor>, targets: Tensor) -> Result<Self> {
        if targets.ndim() != 2 || targets.shape()[0] != slices.len() {
            return Err(TrainError::Config(format!(
                "{} slices but targets of shape {:?}",
                slices.len(),
                targets.shape()
            )));
        }
        Ok(LipData { slices, targets })
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// Samples at `idx` stacked into one batch.
    pub fn batch(&self, idx: &[usize]) -> (Tensor, Tensor) {
        let x = Tensor::stack(&idx.iter().map(|&i| self.slices[i].clone()).collect::<Vec<_>>()).expect("equal slice shapes");
        (x, rows(&self.targets, idx))
    }
}

fn rows(t: &Tensor, idx: &[usize]) -> Tensor {
    let d = t.shape()[1];
    let mut out = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        out.extend_from_slice(&t.data()[i * d..(i + 1) * d]);
    }
    Tensor::new(&[idx.len(), d], out).expect("row gather")
}

/// Called per batch with the forward state, the sample indices, whether this
/// is a training batch and the epoch's augmentation generator.
type BatchLoss<'m, M> = dyn Fn(&M, &mut Fwd, &[usize], bool, &mut Rng) -> Result<(Var, usize)> + 'm;

struct Fit<'m, M> {
    store: fn(&M) -> &ParamStore,
    store_mut: fn(&mut M) -> &mut ParamStore,
    batch_loss: &'m BatchLoss<'m, M>,
    n_train: usize,
    n_val: usize,
}

impl<M: Clone> Fit<'_, M> {
    fn run(&self, model: &mut M, cfg: &TrainConfig) -> Result<TrainRun> {
        if self.n_train < 2 {
            return Err(TrainError::EmptyData("training"));
        }
        let hyper = AdamHyper::default();
        let mut adam = AdamState::new((self.store)(model).params());
        let mut plateau = PlateauState::new(cfg.lr, cfg.patience, cfg.lr_factor);
        let mut history = Vec::with_capacity(cfg.epochs);
        let mut best: Option<(f64, usize, M)> = None;
        let mut degenerate = 0;
        for epoch in 1..=cfg.epochs {
            let e = epoch as u64;
            let mut order: Vec<usize> = (0..self.n_train).collect();
            order.shuffle(&mut rng::rng(rng::derive(cfg.seed, e)));
            let mut aug = rng::rng(rng::derive(cfg.seed, (1 << 40) | e));
            let lr = plateau.lr;
            let (mut sum, mut count) = (0.0, 0usize);
            for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
                // batch norm needs two samples
                if chunk.len() < 2 {
                    continue;
                }
                let store = (self.store)(model);
                let mut g = Graph::new();
                let vars = store.bind(&mut g);
                let step_seed = rng::derive(cfg.seed, (e << 20) | b as u64);
                let (loss, deg, stats) = {
                    let mut f = Fwd::new(&mut g, &vars, store, Mode::Train, step_seed);
                    let (loss, deg) = (self.batch_loss)(model, &mut f, chunk, true, &mut aug)?;
                    (loss, deg, std::mem::take(&mut f.stats))
                };
                let value = g.value(loss).item();
                if !value.is_finite() {
                    return Err(TrainError::NonFinite { epoch, batch: b });
                }
                g.backward(loss)?;
                let grads = store.grads(&g, &vars);
                drop(g);
                let store = (self.store_mut)(model);
                adam_step(store.params_mut(), &grads, &mut adam, lr, &hyper)?;
                store.apply_batch_stats(&stats);
                sum += value * chunk.len() as f64;
                count += chunk.len();
                degenerate += deg;
            }
            let train_loss = sum / count as f64;
            // without a validation set the epoch's training loss drives the schedule
            let val_loss = if self.n_val > 0 {
                self.validate(model, self.n_train..self.n_train + self.n_val, cfg.batch_size)?
            } else {
                train_loss
            };
            if !val_loss.is_finite() {
                return Err(TrainError::NonFinite { epoch, batch: 0 });
            }
            history.push(EpochRecord {
                epoch,
                train_loss,
                val_loss,
                lr,
            });
            plateau.update(val_loss);
            if best.as_ref().is_none_or(|(l, _, _)| val_loss < *l) {
                best = Some((val_loss, epoch, model.clone()));
            }
        }
        let best_epoch = match best {
            Some((_, epoch, m)) => {
                *model = m;
                epoch
            }
            None => 0,
        };
        Ok(TrainRun {
            history,
            seed: cfg.seed,
            config: cfg.clone(),
            best_epoch,
            degenerate,
        })
    }

    /// Inference-mode loss averaged over the samples in `range`; validation
    /// samples are indexed after the training ones.
    fn validate(&self, model: &M, range: std::ops::Range<usize>, batch_size: usize) -> Result<f64> {
        let store = (self.store)(model);
        let n = range.len();
        let idx: Vec<usize> = range.collect();
        let mut sum = 0.0;
        let mut dummy = rng::rng(0);
        for chunk in idx.chunks(batch_size) {
            let mut g = Graph::new();
            let vars = store.bind_frozen(&mut g);
            let mut f = Fwd::new(&mut g, &vars, store, Mode::Infer, 0);
            let (loss, _) = (self.batch_loss)(model, &mut f, chunk, false, &mut dummy)?;
            sum += g.value(loss).item() * chunk.len() as f64;
        }
        Ok(sum / n as f64)
    }
}

fn check_frames(t: &Tensor, what: &'static str) -> Result<()> {
    if t.ndim() != 2 || t.shape()[1] != crate::audspec::N_CHANNELS {
        return Err(TrainError::Config(format!("{what} frames must be (N, 128), got {:?}", t.shape())));
    }
    Ok(())
}

/// Trains an autoencoder on (N, 128) compressed spectrogram frames to
/// reconstruct its input. Returns the parameters of the best validation epoch.
pub fn train_autoencoder(train: &Tensor, val: Option<&Tensor>, cfg: &TrainConfig) -> Result<(Autoencoder, TrainRun)> {
    cfg.validate()?;
    check_frames(train, "training")?;
    if let Some(v) = val {
        check_frames(v, "validation")?;
    }
    let n_train = train.shape()[0];
    let n_val = val.map_or(0, |v| v.shape()[0]);
    let all = match val {
        Some(v) => Tensor::new(&[n_train + n_val, 128], [train.data(), v.data()].concat())?,
        None => train.clone(),
    };
    let spec = cfg.loss;
    let batch_loss = move |m: &Autoencoder, f: &mut Fwd, idx: &[usize], _train: bool, _r: &mut Rng| {
        let x = rows(&all, idx);
        let xv = f.g.constant(x.clone());
        let out = m.forward_graph(f, xv)?;
        loss_node(f.g, out.recon, &x, &spec)
    };
    let mut model = Autoencoder::build(&cfg.net, rng::derive(cfg.seed, 0xAE))?;
    let fit = Fit {
        store: |m: &Autoencoder| &m.store,
        store_mut: |m: &mut Autoencoder| &mut m.store,
        batch_loss: &batch_loss,
        n_train,
        n_val,
    };
    let run = fit.run(&mut model, cfg)?;
    Ok((model, run))
}

/// Trains a lip reader on video slices against bottleneck targets.
pub fn train_lipreader(train: &LipData, val: Option<&LipData>, cfg: &TrainConfig) -> Result<(LipReader, TrainRun)> {
    cfg.validate()?;
    let width = cfg.net.output_width();
    for d in std::iter::once(train).chain(val) {
        if d.targets.shape()[1] != width {
            return Err(TrainError::Config(format!(
                "bottleneck: targets have width {}, config expects {} (bottleneck {} x la {})",
                d.targets.shape()[1],
                width,
                cfg.net.bottleneck,
                cfg.net.la
            )));
        }
    }
    let n_train = train.len();
    let n_val = val.map_or(0, |v| v.len());
    let mut all = train.clone();
    if let Some(v) = val {
        all.slices.extend(v.slices.iter().cloned());
        all.targets = Tensor::new(&[n_train + n_val, width], [train.targets.data(), v.targets.data()].concat())?;
    }
    let spec = cfg.loss;
    let p = cfg.augment_prob;
    let batch_loss = move |m: &LipReader, f: &mut Fwd, idx: &[usize], training: bool, r: &mut Rng| {
        let mut items = Vec::with_capacity(idx.len());
        for &i in idx {
            let s = &all.slices[i];
            items.push(if training && p > 0.0 && r.random_bool(p) { augment(s, r) } else { s.clone() });
        }
        let x = Tensor::stack(&items)?;
        let y = rows(&all.targets, idx);
        let xv = f.g.constant(x);
        let pred = m.forward_graph(f, xv, None)?;
        loss_node(f.g, pred, &y, &spec)
    };
    let mut model = LipReader::build(&cfg.net, rng::derive(cfg.seed, 0x11))?;
    let fit = Fit {
        store: |m: &LipReader| &m.store,
        store_mut: |m: &mut LipReader| &mut m.store,
        batch_loss: &batch_loss,
        n_train,
        n_val,
    };
    let run = fit.run(&mut model, cfg)?;
    Ok((model, run))
}

fn cube(t: &Tensor) -> Tensor {
    t.map(|v| v * v * v)
}

/// Corr2D between the decompressed input frames and their decompressed
/// reconstructions, over the whole (N, 128) matrix.
pub fn ae_corr2d(ae: &Autoencoder, frames: &Tensor) -> Result<f64> {
    let recon = ae.reconstruct(frames)?;
    corr_of(&cube(frames), &cube(&recon))
}

fn as_matrix(t: &Tensor) -> metrics::MatrixRef<'_> {
    metrics::MatrixRef::new(t.shape()[0], t.len() / t.shape()[0], t.data())
}

fn corr_of(a: &Tensor, b: &Tensor) -> Result<f64> {
    metrics::corr2d(as_matrix(a), as_matrix(b)).map_err(|e| TrainError::Loss(e.to_string()))
}

/// Corr2D between predicted and target bottleneck codes, (N, B·L_a) as one matrix.
pub fn bottleneck_corr2d(lip: &LipReader, data: &LipData) -> Result<f64> {
    let pred = predict_all(lip, data)?;
    corr_of(&pred, &data.targets)
}

fn predict_all(lip: &LipReader, data: &LipData) -> Result<Tensor> {
    let mut out = Vec::with_capacity(data.targets.len());
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(16) {
        let (x, _) = data.batch(chunk);
        out.extend_from_slice(lip.predict(&x)?.data());
    }
    Ok(Tensor::new(data.targets.shape(), out)?)
}

/// Mean over samples of the Corr2D between the decompressed spectrogram slice
/// decoded from each prediction and the decompressed reference slice.
/// `reference` holds one (L_a, 128) compressed slice per sample.
pub fn decoded_corr2d(lip: &LipReader, ae: &Autoencoder, data: &LipData, reference: &[Tensor]) -> Result<f64> {
    if reference.len() != data.len() {
        return Err(TrainError::Config(format!("{} references for {} samples", reference.len(), data.len())));
    }
    let pred = predict_all(lip, data)?;
    let (la, b) = (lip.cfg.la, lip.cfg.bottleneck);
    let codes = pred.into_reshaped(&[data.len() * la, b])?;
    let spec = ae.decode(&codes)?;
    let mut total = 0.0;
    for (i, r) in reference.iter().enumerate() {
        let s = Tensor::new(&[la, 128], spec.data()[i * la * 128..(i + 1) * la * 128].to_vec())?;
        total += corr_of(&cube(r), &cube(&s))?;
    }
    Ok(total / data.len() as f64)
}
