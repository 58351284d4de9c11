//! Spectrogram quality measures: Corr2D, an STMI-style modulation index and
//! log-spectral distance.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audspec::AudSpec;
use crate::stats;

/// Highest temporal modulation rate kept by [`stmi`], Hz.
pub const MAX_RATE_HZ: f64 = 32.0;
/// Highest spectral modulation scale kept by [`stmi`], cycles per octave.
pub const MAX_SCALE_CYC_OCT: f64 = 8.0;
/// Channels per octave of the spectrogram grid.
const CHANNELS_PER_OCTAVE: f64 = 24.0;
/// Floor added inside the logarithm of [`log_spectral_distance`].
pub const LSD_EPSILON: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    Shape((usize, usize), (usize, usize)),
    #[error("{0} has zero variance")]
    ZeroVariance(&'static str),
    #[error("reference is silent")]
    SilentReference,
    #[error("empty matrix")]
    Empty,
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// Borrowed row-major matrix.
#[derive(Debug, Clone, Copy)]
pub struct MatrixRef<'a> {
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

impl<'a> MatrixRef<'a> {
    /// Panics if `data.len() != rows * cols`.
    pub fn new(rows: usize, cols: usize, data: &'a [f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix buffer length");
        MatrixRef { rows, cols, data }
    }

    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

impl<'a> From<&'a AudSpec> for MatrixRef<'a> {
    fn from(s: &'a AudSpec) -> Self {
        MatrixRef::new(s.n_frames(), crate::audspec::N_CHANNELS, s.data())
    }
}

fn same_shape(a: &MatrixRef, b: &MatrixRef) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(MetricError::Shape(a.shape(), b.shape()));
    }
    if a.data.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Pearson correlation over every entry of two equal-shape matrices.
pub fn corr2d<'a, 'b>(a: impl Into<MatrixRef<'a>>, b: impl Into<MatrixRef<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    same_shape(&a, &b)?;
    if stats::centered_ss(a.data) <= 0.0 {
        return Err(MetricError::ZeroVariance("first matrix"));
    }
    stats::pearson(a.data, b.data).ok_or(MetricError::ZeroVariance("second matrix"))
}

/// Magnitudes of the 2D DFT of the mean-removed matrix, restricted to the
/// retained rate/scale bins.
fn modulation_magnitudes(m: &MatrixRef, frame_ms: f64) -> Vec<f64> {
    let (rows, cols) = m.shape();
    let mean = stats::mean(m.data);
    let mut buf: Vec<Complex64> = m.data.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(cols);
    for row in buf.chunks_exact_mut(cols) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(rows);
    let mut col = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = buf[r * cols + c];
        }
        col_fft.process(&mut col);
        for r in 0..rows {
            buf[r * cols + c] = col[r];
        }
    }

    // signed bin index -> modulation frequency
    let signed = |k: usize, n: usize| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    let frame_rate = 1000.0 / frame_ms;
    let mut out = Vec::new();
    for r in 0..rows {
        let rate = signed(r, rows).abs() * frame_rate / rows as f64;
        if rate > MAX_RATE_HZ {
            continue;
        }
        for c in 0..cols {
            let scale = signed(c, cols).abs() * CHANNELS_PER_OCTAVE / cols as f64;
            if scale <= MAX_SCALE_CYC_OCT {
                out.push(buf[r * cols + c].norm());
            }
        }
    }
    out
}

/// STMI-lite on matrices sampled every `frame_ms` ms with 24 channels per
/// octave: `max(0, 1 - |T - N|^2 / |T|^2)` over the low-rate, low-scale part
/// of the modulation spectrum.
///
/// This is a modulation-spectrum approximation of the cortical STMI; its
/// values only support relative comparisons.
pub fn stmi_matrix<'a, 'b>(
    reference: impl Into<MatrixRef<'a>>,
    test: impl Into<MatrixRef<'b>>,
    frame_ms: f64,
) -> Result<f64> {
    let (r, t) = (reference.into(), test.into());
    same_shape(&r, &t)?;
    let tm = modulation_magnitudes(&r, frame_ms);
    let energy: f64 = tm.iter().map(|v| v * v).sum();
    if energy <= 0.0 {
        return Err(MetricError::SilentReference);
    }
    if r.data == t.data {
        return Ok(1.0);
    }
    let nm = modulation_magnitudes(&t, frame_ms);
    let diff: f64 = tm.iter().zip(&nm).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((1.0 - diff / energy).clamp(0.0, 1.0))
}

pub fn stmi(reference: &AudSpec, test: &AudSpec) -> Result<f64> {
    stmi_matrix(reference, test, reference.params.frm_len)
}

/// Root mean square over all entries of `20·log10((a + ε) / (b + ε))`, in dB.
pub fn log_spectral_distance<'a, 'b>(a: impl Into<MatrixRef<'a>>, b: impl Into<MatrixRef<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    same_shape(&a, &b)?;
    let (rows, cols) = a.shape();
    let mut total = 0.0;
    for r in 0..rows {
        let mut row = 0.0;
        for c in 0..cols {
            let i = r * cols + c;
            let d = 20.0 * ((a.data[i] + LSD_EPSILON) / (b.data[i] + LSD_EPSILON)).log10();
            row += d * d;
        }
        total += row / cols as f64;
    }
    Ok((total / rows as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub corr2d: f64,
    pub stmi: f64,
    pub lsd_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScores {
    pub id: String,
    #[serde(flatten)]
    pub scores: Scores,
}

/// Evaluation report as written by `liplab eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_sample: Vec<SampleScores>,
    pub mean: Scores,
    pub config: serde_json::Value,
}

pub fn score(reference: &AudSpec, test: &AudSpec) -> Result<Scores> {
    Ok(Scores {
        corr2d: corr2d(reference, test)?,
        stmi: stmi(reference, test)?,
        lsd_db: log_spectral_distance(reference, test)?,
    })
}

impl MetricReport {
    /// Aggregates per-sample scores; `mean` is the arithmetic mean of each field.
    pub fn new(per_sample: Vec<SampleScores>, config: serde_json::Value) -> Self {
        let n = per_sample.len().max(1) as f64;
        let sum = |f: fn(&Scores) -> f64| per_sample.iter().map(|s| f(&s.scores)).sum::<f64>() / n;
        let mean = Scores {
            corr2d: sum(|s| s.corr2d),
            stmi: sum(|s| s.stmi),
            lsd_db: sum(|s| s.lsd_db),
        };
        MetricReport {
            per_sample,
            mean,
            config,
        }
    }

    /// Descriptions of the measures, stored under `config.measures`.
    pub fn measure_notes() -> serde_json::Value {
        serde_json::json!({
            "corr2d": "Pearson correlation over all spectrogram entries",
            "stmi": "STMI-lite: 2D modulation spectrum (rate <= 32 Hz, scale <= 8 cyc/oct), not the cortical-model STMI; use for relative ordering only",
            "lsd_db": "log-spectral distance in dB with epsilon 1e-5; a quality proxy, not PESQ"
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> MatrixRef<'_> {
        MatrixRef::new(rows, cols, data)
    }

    #[test]
    fn corr2d_errors() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let c = [1.0; 4];
        assert!(matches!(corr2d(m(2, 2, &a), m(1, 4, &a)), Err(MetricError::Shape(..))));
        assert!(matches!(corr2d(m(2, 2, &c), m(2, 2, &a)), Err(MetricError::ZeroVariance(_))));
        assert!(matches!(corr2d(m(2, 2, &a), m(2, 2, &c)), Err(MetricError::ZeroVariance(_))));
    }

    #[test]
    fn stmi_of_zero_test_is_zero() {
        let a: Vec<f64> = (0..40 * 8).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let z = vec![0.0; a.len()];
        assert_eq!(stmi_matrix(m(40, 8, &a), m(40, 8, &z), 10.0).unwrap(), 0.0);
        assert_eq!(
            stmi_matrix(m(40, 8, &z), m(40, 8, &a), 10.0),
            Err(MetricError::SilentReference)
        );
    }

    #[test]
    fn lsd_decade_is_twenty_db() {
        let a = vec![1.0; 12];
        let b = vec![10.0; 12];
        let d = log_spectral_distance(m(3, 4, &a), m(3, 4, &b)).unwrap();
        assert!((d - 20.0).abs() < 1e-3, "{d}");
    }
}
