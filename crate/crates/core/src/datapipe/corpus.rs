use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::audspec::{self, AudSpec, AudSpecParams, Waveform, CODEC_RATE, N_CHANNELS};
use crate::nets::{Autoencoder, NetConfig};
use crate::rng;
use crate::tensor::Tensor;
use crate::training::Split;

use super::frames::{derivatives, paired_slices, preprocess, read_vfrm, slice_codes, slice_video, write_vfrm, FrameSequence};
use super::synth::synth_pair;
use super::{DataError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const SPLIT_STREAM: u64 = 0x5EED_5917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Paths relative to the corpus directory.
    pub wav: String,
    pub frames: String,
    pub split: SplitName,
    pub seed: u64,
}

/// Shuffled 90/5/5 assignment of `n` items.
pub fn assign_splits(n: usize, seed: u64) -> Vec<SplitName> {
    let (train, val, _) = Split::default().sizes(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng(rng::derive(seed, SPLIT_STREAM)));
    let mut out = vec![SplitName::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank < train {
            SplitName::Train
        } else if rank < train + val {
            SplitName::Val
        } else {
            SplitName::Test
        };
    }
    out
}

/// Generates `n` synthetic pairs into `dir` and writes the manifest.
pub fn build_dataset(n: usize, seed: u64, dir: &Path, duration_s: f64) -> Result<Vec<ManifestEntry>> {
    if n == 0 {
        return Err(DataError::Invalid("corpus size must be positive".into()));
    }
    super::synth::phone_count(duration_s)?;
    fs::create_dir_all(dir)?;
    let splits = assign_splits(n, seed);
    let generate = |i: usize| -> Result<ManifestEntry> {
        let sample_seed = rng::derive(seed, i as u64);
        let (frames, audio) = synth_pair(sample_seed, duration_s)?;
        let id = format!("s{i:05}");
        let entry = ManifestEntry {
            wav: format!("{id}.wav"),
            frames: format!("{id}.vfrm"),
            id,
            split: splits[i],
            seed: sample_seed,
        };
        audspec::write_wav(BufWriter::new(File::create(dir.join(&entry.wav))?), &audio)?;
        write_vfrm(BufWriter::new(File::create(dir.join(&entry.frames))?), &frames)?;
        Ok(entry)
    };
    #[cfg(feature = "parallel")]
    let entries: Vec<ManifestEntry> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(generate).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let entries: Vec<ManifestEntry> = (0..n).map(generate).collect::<Result<_>>()?;
    let file = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
    serde_json::to_writer_pretty(file, &entries)?;
    Ok(entries)
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = dir.join(MANIFEST_FILE);
    let file = File::open(&path).map_err(|e| DataError::Missing(path.clone(), e))?;
    let entries: Vec<ManifestEntry> = serde_json::from_reader(BufReader::new(file))?;
    if entries.is_empty() {
        return Err(DataError::Invalid(format!("{} lists no samples", path.display())));
    }
    Ok(entries)
}

fn open(path: PathBuf) -> Result<BufReader<File>> {
    File::open(&path).map(BufReader::new).map_err(|e| DataError::Missing(path, e))
}

pub fn load_sample(dir: &Path, entry: &ManifestEntry) -> Result<(FrameSequence, Waveform)> {
    let frames = read_vfrm(open(dir.join(&entry.frames))?)?;
    let audio = audspec::read_wav(open(dir.join(&entry.wav))?)?;
    Ok((frames, audio))
}

/// Cube-root compressed spectrogram of any waveform at or above the codec rate.
pub fn compressed_spectrogram(w: &Waveform) -> Result<AudSpec> {
    let w = audspec::resample(w, CODEC_RATE)?;
    let s = audspec::wav2aud(&w, &AudSpecParams::default())?;
    Ok(audspec::compress(&s))
}

/// A spectrogram as a (T, 128) tensor.
pub fn spectrogram_rows(s: &AudSpec) -> Tensor {
    Tensor::new(&[s.n_frames(), N_CHANNELS], s.data().to_vec()).expect("spectrogram shape")
}

/// Paired slices of one sample.
#[derive(Debug, Clone)]
pub struct PairedSlices {
    pub video: Vec<Tensor>,
    /// Flattened (L_a·B) bottleneck targets.
    pub codes: Vec<Tensor>,
    /// (L_a, 128) compressed spectrogram slices matching `codes`.
    pub spectra: Vec<Tensor>,
}

/// Preprocesses the video, encodes the compressed spectrogram with the
/// autoencoder and cuts both into the same number of slices.
pub fn paired_sample(frames: &FrameSequence, spec: &AudSpec, ae: &Autoencoder, cfg: &NetConfig) -> Result<PairedSlices> {
    let video = preprocess(frames, cfg.h)?;
    let d = derivatives(&video)?;
    let k = paired_slices(video.n_frames, cfg.lv, spec.n_frames(), cfg.la)?;
    let rows = spectrogram_rows(spec);
    let codes = ae.encode(&rows)?;
    let spectra = slice_codes(&rows, cfg.la, k)?
        .into_iter()
        .map(|t| t.into_reshaped(&[cfg.la, N_CHANNELS]))
        .collect::<std::result::Result<_, _>>()?;
    Ok(PairedSlices {
        video: slice_video(&d, cfg.lv, k)?,
        codes: slice_codes(&codes, cfg.la, k)?,
        spectra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_counts() {
        let s = assign_splits(100, 4);
        let count = |n| s.iter().filter(|&&x| x == n).count();
        assert_eq!((count(SplitName::Train), count(SplitName::Val), count(SplitName::Test)), (90, 5, 5));
        assert_ne!(assign_splits(100, 4), assign_splits(100, 5));
    }
}
