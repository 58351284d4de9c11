use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::audspec::{self, AudSpec, N_CHANNELS};
use crate::datapipe::{self, read_manifest, ManifestEntry, SplitName};
use crate::metrics::{self, MetricReport, SampleScores};
use crate::nets::{Autoencoder, LipReader, NetConfig};
use crate::tensor::{read_checkpoint, write_checkpoint, Checkpoint, Tensor};
use crate::training::{self, LipData, TrainConfig, TrainRun};

use super::{history_path, sidecar_path, AudspecCommand, CliError, Command, EvalArgs, PredictArgs, Result, SynthArgs, TrainArgs, TrainCommand};

/// Utterances the lip reader validates on; the rest of the val split is unused.
const LIP_VAL_SAMPLES: usize = 10;

pub(super) fn dispatch(cmd: Command) -> Result<Value> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Audspec(a) => audspec_cmd(a),
        Command::Train(TrainCommand::Ae(a)) => train_ae(a),
        Command::Train(TrainCommand::Lip { args, ae }) => train_lip(args, &ae),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::File {
        path: path.to_owned(),
        source,
    })
}

/// Writes through a buffered file, flushing before returning.
fn create<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let file = File::create(path).map_err(|source| CliError::File {
        path: path.to_owned(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|source| CliError::File {
        path: path.to_owned(),
        source,
    })
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{}: no such file", path.display())))
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{}: no such directory", path.display())))
    }
}

/// The parent directory of an output path must exist.
fn require_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => require_dir(p),
        _ => Ok(()),
    }
}

fn synth(a: SynthArgs) -> Result<Value> {
    datapipe::phone_count(a.duration).map_err(|e| CliError::Usage(e.to_string()))?;
    let entries = datapipe::build_dataset(a.count as usize, a.seed, &a.out, a.duration)?;
    let count = |s| entries.iter().filter(|e| e.split == s).count();
    eprintln!("wrote {} samples to {}", entries.len(), a.out.display());
    Ok(json!({
        "samples": entries.len(),
        "train": count(SplitName::Train),
        "val": count(SplitName::Val),
        "test": count(SplitName::Test),
        "manifest": a.out.join(datapipe::MANIFEST_FILE),
    }))
}

fn audspec_cmd(cmd: AudspecCommand) -> Result<Value> {
    match cmd {
        AudspecCommand::Encode { input, output, codec } => {
            let params = codec.params()?;
            require_file(&input)?;
            require_parent(&output)?;
            let w = audspec::read_wav(open(&input)?)?;
            let w = audspec::resample(&w, audspec::CODEC_RATE)?;
            let s = audspec::wav2aud(&w, &params)?;
            create(&output, |f| Ok(audspec::write_auds(f, &s)?))?;
            Ok(json!({ "frames": s.n_frames(), "channels": N_CHANNELS }))
        }
        AudspecCommand::Decode { input, output, iters, seed } => {
            require_file(&input)?;
            require_parent(&output)?;
            let s = audspec::read_auds(open(&input)?)?;
            let rec = audspec::aud2wav(&s, iters as usize, seed)?;
            create(&output, |f| Ok(audspec::write_wav(f, &rec.waveform)?))?;
            eprintln!("round-trip Corr2D {:.4} (iteration {})", rec.corr2d, rec.best_iteration);
            Ok(json!({
                "samples": rec.waveform.samples.len(),
                "corr2d": rec.corr2d,
                "best_iteration": rec.best_iteration,
            }))
        }
    }
}

fn load_config(path: Option<&Path>, base: TrainConfig, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => {
            require_file(p)?;
            let text = fs::read_to_string(p).map_err(|source| CliError::File {
                path: p.to_owned(),
                source,
            })?;
            TrainConfig::from_json(&text, &base)?
        }
        None => base,
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn check_train_paths(a: &TrainArgs) -> Result<()> {
    require_dir(&a.data)?;
    require_file(&a.data.join(datapipe::MANIFEST_FILE))?;
    require_parent(&a.out)
}

fn by_split(entries: &[ManifestEntry], split: SplitName) -> Vec<&ManifestEntry> {
    entries.iter().filter(|e| e.split == split).collect()
}

/// Compressed spectrogram rows of every sample, stacked to (ΣT, 128).
fn spectrogram_frames(dir: &Path, entries: &[&ManifestEntry]) -> Result<Option<Tensor>> {
    if entries.is_empty() {
        return Ok(None);
    }
    let mut data = Vec::new();
    for e in entries {
        let (_, audio) = datapipe::load_sample(dir, e)?;
        data.extend_from_slice(datapipe::compressed_spectrogram(&audio)?.data());
    }
    let n = data.len() / N_CHANNELS;
    Ok(Some(Tensor::new(&[n, N_CHANNELS], data)?))
}

fn finish_training(out: &Path, ckpt: &Checkpoint, net: &NetConfig, run: &TrainRun) -> Result<Value> {
    create(out, |f| Ok(write_checkpoint(f, ckpt)?))?;
    create(&sidecar_path(out), |f| Ok(net.write_sidecar(f)?))?;
    let history = history_path(out);
    fs::write(&history, run.history_csv()).map_err(|source| CliError::File {
        path: history.clone(),
        source,
    })?;
    Ok(json!({
        "final_val_loss": run.final_val_loss(),
        "best_epoch": run.best_epoch,
        "epochs": run.history.len(),
        "checkpoint": out,
        "history": history,
    }))
}

fn train_ae(a: TrainArgs) -> Result<Value> {
    check_train_paths(&a)?;
    let cfg = load_config(a.config.as_deref(), TrainConfig::autoencoder(), a.seed)?;
    let entries = read_manifest(&a.data)?;
    let train = spectrogram_frames(&a.data, &by_split(&entries, SplitName::Train))?
        .ok_or(training::TrainError::EmptyData("training"))?;
    let val = spectrogram_frames(&a.data, &by_split(&entries, SplitName::Val))?;
    eprintln!("training autoencoder on {} frames", train.shape()[0]);
    let (ae, run) = training::train_autoencoder(&train, val.as_ref(), &cfg)?;
    finish_training(&a.out, &ae.to_checkpoint(), &cfg.net, &run)
}

fn load_autoencoder(path: &Path) -> Result<Autoencoder> {
    let side = sidecar_path(path);
    require_file(path)?;
    require_file(&side)?;
    let cfg = NetConfig::read_sidecar(open(&side)?)?;
    let ckpt = read_checkpoint(open(path)?)?;
    Ok(Autoencoder::from_checkpoint(&cfg, &ckpt)?)
}

fn load_lipreader(path: &Path) -> Result<(LipReader, NetConfig)> {
    let side = sidecar_path(path);
    require_file(path)?;
    require_file(&side)?;
    let cfg = NetConfig::read_sidecar(open(&side)?)?;
    let ckpt = read_checkpoint(open(path)?)?;
    Ok((LipReader::from_checkpoint(&cfg, &ckpt)?, cfg))
}

fn bottleneck_mismatch(lip: usize, ae: usize) -> Result<()> {
    if lip != ae {
        return Err(CliError::Data(format!(
            "config key \"bottleneck\" is {lip} but the autoencoder's bottleneck is {ae}"
        )));
    }
    Ok(())
}

fn lip_data(dir: &Path, entries: &[&ManifestEntry], ae: &Autoencoder, net: &NetConfig) -> Result<Option<LipData>> {
    let mut slices = Vec::new();
    let mut targets = Vec::new();
    for e in entries {
        let (frames, audio) = datapipe::load_sample(dir, e)?;
        let spec = datapipe::compressed_spectrogram(&audio)?;
        let p = datapipe::paired_sample(&frames, &spec, ae, net)?;
        slices.extend(p.video);
        for c in p.codes {
            targets.extend_from_slice(c.data());
        }
    }
    if slices.is_empty() {
        return Ok(None);
    }
    let n = slices.len();
    let targets = Tensor::new(&[n, net.output_width()], targets)?;
    Ok(Some(LipData::new(slices, targets)?))
}

fn train_lip(a: TrainArgs, ae_path: &Path) -> Result<Value> {
    check_train_paths(&a)?;
    let cfg = load_config(a.config.as_deref(), TrainConfig::lipreader(), a.seed)?;
    let ae = load_autoencoder(ae_path)?;
    bottleneck_mismatch(cfg.net.bottleneck, ae.cfg.bottleneck)?;
    let entries = read_manifest(&a.data)?;
    let train = lip_data(&a.data, &by_split(&entries, SplitName::Train), &ae, &cfg.net)?
        .ok_or(training::TrainError::EmptyData("training"))?;
    let val_entries: Vec<_> = by_split(&entries, SplitName::Val).into_iter().take(LIP_VAL_SAMPLES).collect();
    let val = lip_data(&a.data, &val_entries, &ae, &cfg.net)?;
    eprintln!("training lip reader on {} slices", train.len());
    let (lip, run) = training::train_lipreader(&train, val.as_ref(), &cfg)?;
    finish_training(&a.out, &lip.to_checkpoint(), &cfg.net, &run)
}

/// Lip reader then autoencoder decoder: the compressed (K·L_a, 128) spectrogram.
pub fn predict_spectrogram(frames: &datapipe::FrameSequence, lip: &LipReader, ae: &Autoencoder, net: &NetConfig) -> Result<AudSpec> {
    let video = datapipe::preprocess(frames, net.h)?;
    let d = datapipe::derivatives(&video)?;
    let k = video.n_frames / net.lv;
    if k == 0 {
        return Err(CliError::Data(format!(
            "{} frames is fewer than one slice of {}",
            video.n_frames, net.lv
        )));
    }
    let x = Tensor::stack(&datapipe::slice_video(&d, net.lv, k)?)?;
    let pred = lip.predict(&x)?;
    let codes = pred.into_reshaped(&[k * net.la, net.bottleneck])?;
    // the decoder is unconstrained; a spectrogram is nonnegative
    let spec: Vec<f64> = ae.decode(&codes)?.into_data().into_iter().map(|v| v.max(0.0)).collect();
    Ok(AudSpec::new(spec, k * net.la, audspec::AudSpecParams::default())?)
}

fn predict(a: PredictArgs) -> Result<Value> {
    require_file(&a.frames)?;
    require_parent(&a.out)?;
    if let Some(p) = &a.auds {
        require_parent(p)?;
    }
    let (lip, net) = load_lipreader(&a.lip)?;
    let ae = load_autoencoder(&a.ae)?;
    bottleneck_mismatch(net.bottleneck, ae.cfg.bottleneck)?;
    let frames = datapipe::read_vfrm(open(&a.frames)?)?;
    if (frames.frame_rate - datapipe::FRAME_RATE).abs() > 1e-3 {
        return Err(CliError::Data(format!(
            "frame rate {} fps, expected {}",
            frames.frame_rate,
            datapipe::FRAME_RATE
        )));
    }
    let compressed = predict_spectrogram(&frames, &lip, &ae, &net)?;
    let spec = audspec::decompress(&compressed);
    if let Some(p) = &a.auds {
        create(p, |f| Ok(audspec::write_auds(f, &spec)?))?;
    }
    let rec = audspec::aud2wav(&spec, a.iters as usize, a.seed)?;
    create(&a.out, |f| Ok(audspec::write_wav(f, &rec.waveform)?))?;
    eprintln!("spectrogram {} frames, inversion Corr2D {:.4}", spec.n_frames(), rec.corr2d);
    Ok(json!({
        "frames": frames.n_frames,
        "spectrogram_frames": spec.n_frames(),
        "samples": rec.waveform.samples.len(),
        "inversion_corr2d": rec.corr2d,
    }))
}

/// Audio files of a directory by id: `.wav` is analysed, `.auds` is read as is.
fn audio_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|source| CliError::File {
        path: dir.to_owned(),
        source,
    })?;
    for e in entries {
        let path = e
            .map_err(|source| CliError::File {
                path: dir.to_owned(),
                source,
            })?
            .path();
        let ext = path.extension().and_then(|s| s.to_str()).map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("wav" | "auds")) {
            continue;
        }
        if let Some(id) = path.file_stem().and_then(|s| s.to_str()) {
            // a .auds file wins over a .wav of the same id
            if ext.as_deref() == Some("auds") || !out.contains_key(id) {
                out.insert(id.to_string(), path);
            }
        }
    }
    Ok(out)
}

fn load_spectrogram(path: &Path) -> Result<AudSpec> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("auds")) {
        return Ok(audspec::read_auds(open(path)?)?);
    }
    let w = audspec::read_wav(open(path)?)?;
    let w = audspec::resample(&w, audspec::CODEC_RATE)?;
    Ok(audspec::wav2aud(&w, &audspec::AudSpecParams::default())?)
}

fn eval(a: EvalArgs) -> Result<Value> {
    require_dir(&a.reference)?;
    require_dir(&a.test)?;
    require_parent(&a.out)?;
    let refs = audio_files(&a.reference)?;
    let tests = audio_files(&a.test)?;
    let missing: Vec<&str> = refs.keys().filter(|id| !tests.contains_key(*id)).map(String::as_str).collect();
    if refs.is_empty() || !missing.is_empty() {
        let list = if refs.is_empty() {
            "no reference audio found".to_string()
        } else {
            format!("missing test audio for ids: {}", missing.join(", "))
        };
        return Err(CliError::Data(list));
    }
    let mut per_sample = Vec::with_capacity(refs.len());
    for (id, rpath) in &refs {
        let r = load_spectrogram(rpath)?;
        let t = load_spectrogram(&tests[id])?;
        let n = r.n_frames().min(t.n_frames());
        if n != r.n_frames() || n != t.n_frames() {
            eprintln!("{id}: trimming {} and {} frames to {n}", r.n_frames(), t.n_frames());
        }
        let scores = metrics::score(&r.slice_frames(0, n), &t.slice_frames(0, n))
            .map_err(|e| CliError::Data(format!("{id}: {e}")))?;
        per_sample.push(SampleScores { id: id.clone(), scores });
    }
    let report = MetricReport::new(
        per_sample,
        json!({
            "reference": a.reference,
            "test": a.test,
            "measures": MetricReport::measure_notes(),
        }),
    );
    create(&a.out, |f| Ok(serde_json::to_writer_pretty(&mut *f, &report)?))?;
    Ok(json!({ "samples": report.per_sample.len(), "mean": report.mean }))
}
