//! Browser bindings for three liplab operations: the auditory spectrogram of a
//! synthetic vowel, its codec round trip and the behaviour of the CorrMSE loss
//! as a prediction degrades.

use liplab::audspec::{aud2wav, wav2aud, AudSpec, AudSpecParams, N_CHANNELS};
use liplab::datapipe::{render, PHONES, SPEAKER_PITCH_HZ};
use liplab::metrics::corr2d;
use liplab::rng;
use liplab::training::{corrmse, mse, pearson};
use rand::Rng;
use rand_distr::StandardNormal;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn vowel(phone: usize, speaker: usize, phones: usize) -> Result<AudSpec, JsError> {
    let u = render(speaker, &vec![phone; phones.max(1)]).map_err(js_err)?;
    wav2aud(&u.audio, &AudSpecParams::default()).map_err(js_err)
}

#[wasm_bindgen]
pub fn n_channels() -> usize {
    N_CHANNELS
}

#[wasm_bindgen]
pub fn n_phones() -> usize {
    PHONES.len()
}

#[wasm_bindgen]
pub fn n_speakers() -> usize {
    SPEAKER_PITCH_HZ.len()
}

/// A spectrogram as a flat time-major buffer.
#[wasm_bindgen]
pub struct Spectrogram {
    frames: usize,
    data: Vec<f64>,
}

#[wasm_bindgen]
impl Spectrogram {
    #[wasm_bindgen(getter)]
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn data(&self) -> Vec<f64> {
        self.data.clone()
    }
}

impl From<AudSpec> for Spectrogram {
    fn from(s: AudSpec) -> Self {
        Spectrogram {
            frames: s.n_frames(),
            data: s.into_data(),
        }
    }
}

/// Auditory spectrogram of a held vowel, `phones` × 200 ms long.
#[wasm_bindgen]
pub fn vowel_spectrogram(phone: usize, speaker: usize, phones: usize) -> Result<Spectrogram, JsError> {
    Ok(vowel(phone, speaker, phones)?.into())
}

#[wasm_bindgen]
pub struct RoundTrip {
    original: Spectrogram,
    reconstructed: Spectrogram,
    corr2d: f64,
    samples: Vec<f64>,
}

#[wasm_bindgen]
impl RoundTrip {
    pub fn original(&self) -> Spectrogram {
        Spectrogram {
            frames: self.original.frames,
            data: self.original.data.clone(),
        }
    }

    pub fn reconstructed(&self) -> Spectrogram {
        Spectrogram {
            frames: self.reconstructed.frames,
            data: self.reconstructed.data.clone(),
        }
    }

    #[wasm_bindgen(getter)]
    pub fn corr2d(&self) -> f64 {
        self.corr2d
    }

    /// Reconstructed audio at 8 kHz, for playback.
    pub fn samples(&self) -> Vec<f32> {
        self.samples.iter().map(|&v| v as f32).collect()
    }
}

/// Encodes a vowel, inverts it with `iters` projection iterations and
/// re-encodes the result.
#[wasm_bindgen]
pub fn round_trip(phone: usize, speaker: usize, iters: usize, seed: u64) -> Result<RoundTrip, JsError> {
    let s = vowel(phone, speaker, 3)?;
    let rec = aud2wav(&s, iters.max(1), seed).map_err(js_err)?;
    let again = wav2aud(&rec.waveform, &AudSpecParams::default()).map_err(js_err)?;
    let corr = corr2d(&again, &s).map_err(js_err)?;
    Ok(RoundTrip {
        original: s.into(),
        reconstructed: again.into(),
        corr2d: corr,
        samples: rec.waveform.samples,
    })
}

/// CorrMSE, MSE and Pearson correlation between a vowel's spectrogram and
/// copies of it corrupted by Gaussian noise of increasing strength, flattened
/// as `[sd, corrmse, mse, corr]` per level.
#[wasm_bindgen]
pub fn loss_curve(lambda: f64, levels: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let target = vowel(2, 0, 2)?.into_data();
    let scale = target.iter().cloned().fold(0.0, f64::max);
    let mut r = rng::rng(seed);
    let noise: Vec<f64> = target.iter().map(|_| r.sample(StandardNormal)).collect();
    let mut out = Vec::with_capacity(levels * 4);
    for i in 0..levels.max(2) {
        let sd = i as f64 / (levels.max(2) - 1) as f64;
        let pred: Vec<f64> = target.iter().zip(&noise).map(|(t, n)| t + sd * scale * n).collect();
        let loss = corrmse(&target, &pred, lambda).map_err(js_err)?;
        out.extend([
            sd,
            loss.loss,
            mse(&target, &pred).map_err(js_err)?,
            pearson(&target, &pred).map_err(js_err)?,
        ]);
    }
    Ok(out)
}
