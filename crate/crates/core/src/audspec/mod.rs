//! Auditory spectrogram codec.
//!
//! The forward transform models the early auditory system: a bank of 128
//! constant-Q cochlear filters (24 per octave), a hair-cell stage, lateral
//! inhibition across neighbouring channels and leaky temporal integration
//! sampled once per frame. [`aud2wav`] inverts it iteratively, and
//! [`compress`]/[`decompress`] apply the cube-root compression used around the
//! autoencoder.

mod auds;
mod filterbank;
mod invert;
mod resample;
mod transform;
mod wav;

pub use auds::{read_auds, write_auds, AUDS_MAGIC};
pub use filterbank::{center_frequency, Filterbank};
pub use invert::{aud2wav, Reconstruction};
pub use resample::resample;
pub use transform::{wav2aud, wav2aud_linear};
pub use wav::{read_wav, write_wav};

/// Sample rate the codec operates at.
pub const CODEC_RATE: u32 = 8000;
pub const N_CHANNELS: usize = 128;

#[derive(Debug, thiserror::Error)]
pub enum AudSpecError {
    #[error("empty waveform")]
    EmptyInput,
    #[error("cannot upsample from {from} Hz to {to} Hz")]
    Upsampling { from: u32, to: u32 },
    #[error("expected a {expected} Hz waveform, got {got} Hz")]
    WrongSampleRate { expected: u32, got: u32 },
    #[error("input of {samples} samples is shorter than one {frame_ms} ms frame")]
    TooShort { samples: usize, frame_ms: f64 },
    #[error("invalid spectrogram: {0}")]
    InvalidSpectrogram(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("waveform contains non-finite samples")]
    NonFinite,
    #[error("{format}: {detail} at byte {offset}")]
    Format {
        format: &'static str,
        offset: usize,
        detail: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = AudSpecError> = std::result::Result<T, E>;

/// Mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(AudSpecError::InvalidParams("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(AudSpecError::NonFinite);
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

/// Parameters of the forward transform.
///
/// `fac` selects the hair-cell nonlinearity: -2 linear, -1 half-wave
/// rectifier, 0 hard limiter, positive values a sigmoid with that gain.
/// `shft` shifts the whole filterbank by octaves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AudSpecParams {
    pub frm_len: f64,
    pub tc: f64,
    pub fac: i32,
    pub shft: i32,
}

impl Default for AudSpecParams {
    fn default() -> Self {
        AudSpecParams {
            frm_len: 10.0,
            tc: 10.0,
            fac: -2,
            shft: -1,
        }
    }
}

impl AudSpecParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.frm_len > 0.0 && self.frm_len.is_finite()) {
            return Err(AudSpecError::InvalidParams(format!("frm_len = {}", self.frm_len)));
        }
        if !(self.tc > 0.0 && self.tc.is_finite()) {
            return Err(AudSpecError::InvalidParams(format!("tc = {}", self.tc)));
        }
        if self.fac < -2 {
            return Err(AudSpecError::InvalidParams(format!("fac = {}", self.fac)));
        }
        Ok(())
    }

    /// Samples per frame at the codec rate.
    pub fn frame_samples(&self) -> usize {
        (self.frm_len * CODEC_RATE as f64 / 1000.0).round() as usize
    }
}

/// A T × 128 nonnegative time-frequency matrix, time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AudSpec {
    frames: Vec<f64>,
    n_frames: usize,
    pub params: AudSpecParams,
    pub source_rate: u32,
}

impl AudSpec {
    pub fn new(frames: Vec<f64>, n_frames: usize, params: AudSpecParams) -> Result<Self> {
        if frames.len() != n_frames * N_CHANNELS {
            return Err(AudSpecError::InvalidSpectrogram(format!(
                "{} values for {n_frames} frames of {N_CHANNELS}",
                frames.len()
            )));
        }
        if let Some(v) = frames.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(AudSpecError::InvalidSpectrogram(format!(
                "entries must be finite and nonnegative, found {v}"
            )));
        }
        Ok(AudSpec {
            frames,
            n_frames,
            params,
            source_rate: CODEC_RATE,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn data(&self) -> &[f64] {
        &self.frames
    }

    pub fn into_data(self) -> Vec<f64> {
        self.frames
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t * N_CHANNELS..(t + 1) * N_CHANNELS]
    }

    pub fn at(&self, t: usize, k: usize) -> f64 {
        self.frames[t * N_CHANNELS + k]
    }

    /// Rows [start, end) as a new spectrogram.
    pub fn slice_frames(&self, start: usize, end: usize) -> AudSpec {
        assert!(start <= end && end <= self.n_frames);
        AudSpec {
            frames: self.frames[start * N_CHANNELS..end * N_CHANNELS].to_vec(),
            n_frames: end - start,
            params: self.params,
            source_rate: self.source_rate,
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> AudSpec {
        AudSpec {
            frames: self.frames.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

/// Elementwise cube root.
pub fn compress(s: &AudSpec) -> AudSpec {
    s.map(f64::cbrt)
}

/// Elementwise cube; inverse of [`compress`].
pub fn decompress(s: &AudSpec) -> AudSpec {
    s.map(|v| v * v * v)
}
