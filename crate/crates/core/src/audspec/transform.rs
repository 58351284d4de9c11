use super::filterbank::Filterbank;
use super::{AudSpec, AudSpecError, AudSpecParams, Result, Waveform, CODEC_RATE, N_CHANNELS};

fn hair_cell(v: f64, fac: i32) -> f64 {
    match fac {
        -2 => v,
        -1 => v.max(0.0),
        0 => {
            if v > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        g => 1.0 / (1.0 + (-v / g as f64).exp()),
    }
}

fn check_input(w: &Waveform, p: &AudSpecParams) -> Result<usize> {
    p.validate()?;
    if w.sample_rate != CODEC_RATE {
        return Err(AudSpecError::WrongSampleRate {
            expected: CODEC_RATE,
            got: w.sample_rate,
        });
    }
    if w.samples.iter().any(|s| !s.is_finite()) {
        return Err(AudSpecError::NonFinite);
    }
    let frames = w.samples.len() / p.frame_samples();
    if frames == 0 {
        return Err(AudSpecError::TooShort {
            samples: w.samples.len(),
            frame_ms: p.frm_len,
        });
    }
    Ok(frames)
}

/// Half-wave rectification, leaky integration with time constant `tc` and
/// sampling at the last sample of each frame. `channels` are the
/// lateral-inhibition outputs.
pub(crate) fn envelope(channels: &[Vec<f64>], p: &AudSpecParams, n_frames: usize) -> Vec<f64> {
    let step = p.frame_samples();
    let alpha = (-1.0 / (p.tc * CODEC_RATE as f64 / 1000.0)).exp();
    let mut out = vec![0.0; n_frames * N_CHANNELS];
    for (k, y) in channels.iter().enumerate() {
        let mut acc = 0.0;
        for (n, &v) in y.iter().take(n_frames * step).enumerate() {
            acc = v.max(0.0) + alpha * acc;
            if (n + 1) % step == 0 {
                out[(n / step) * N_CHANNELS + k] = acc;
            }
        }
    }
    out
}

/// Auditory spectrogram of an 8 kHz waveform.
///
/// Stages: gammatone filterbank, hair-cell nonlinearity selected by `fac`,
/// membrane low-pass, lateral inhibition (difference with the next higher
/// channel, half-wave rectified) and leaky integration sampled every
/// `frm_len` ms.
pub fn wav2aud(w: &Waveform, p: &AudSpecParams) -> Result<AudSpec> {
    let n_frames = check_input(w, p)?;
    let fb = Filterbank::new(p, w.samples.len());
    let beta = Filterbank::membrane_coefficient();
    let n = w.samples.len();
    let mut hair: Vec<Vec<f64>> = fb.cochlear_outputs_periodic(&w.samples);
    for y in &mut hair {
        let mut state = 0.0;
        for &v in &y[n..] {
            state = (1.0 - beta) * hair_cell(v, p.fac) + beta * state;
        }
        y.truncate(n);
        for v in y.iter_mut() {
            state = (1.0 - beta) * hair_cell(*v, p.fac) + beta * state;
            *v = state;
        }
    }
    let lateral: Vec<Vec<f64>> = (0..N_CHANNELS)
        .map(|k| {
            if !fb.is_active(k) {
                return vec![0.0; n];
            }
            if !fb.is_active(k + 1) {
                return hair[k].clone();
            }
            hair[k].iter().zip(&hair[k + 1]).map(|(a, b)| a - b).collect()
        })
        .collect();
    AudSpec::new(envelope(&lateral, p, n_frames), n_frames, *p)
}

/// Same transform for the linear hair cell (`fac = -2`), computed by folding
/// the membrane filter and lateral inhibition into one linear filter per
/// channel. This is the analysis used by the inverse transform.
pub fn wav2aud_linear(w: &Waveform, p: &AudSpecParams) -> Result<AudSpec> {
    let n_frames = check_input(w, p)?;
    if p.fac != -2 {
        return Err(AudSpecError::InvalidParams(format!(
            "linear analysis requires fac = -2, got {}",
            p.fac
        )));
    }
    let fb = Filterbank::new(p, w.samples.len());
    AudSpec::new(envelope(&fb.lateral_outputs(&w.samples), p, n_frames), n_frames, *p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, amp: f64, seconds: f64) -> Waveform {
        let n = (seconds * CODEC_RATE as f64) as usize;
        let s = (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / CODEC_RATE as f64).sin())
            .collect();
        Waveform::new(s, CODEC_RATE).unwrap()
    }

    fn mean_spectrum(s: &AudSpec) -> Vec<f64> {
        let mut m = vec![0.0; N_CHANNELS];
        for t in 0..s.n_frames() {
            for (acc, v) in m.iter_mut().zip(s.frame(t)) {
                *acc += v;
            }
        }
        m
    }

    #[test]
    fn frame_count_and_silence() {
        let w = Waveform::new(vec![0.0; 3 * 8000], 8000).unwrap();
        let s = wav2aud(&w, &AudSpecParams::default()).unwrap();
        assert_eq!(s.n_frames(), 300);
        assert!(s.data().iter().all(|&v| v == 0.0));
        let w = Waveform::new(vec![0.1; 8000 + 79], 8000).unwrap();
        assert_eq!(wav2aud(&w, &AudSpecParams::default()).unwrap().n_frames(), 100);
    }

    #[test]
    fn input_errors() {
        let p = AudSpecParams::default();
        let w = Waveform::new(vec![0.0; 1000], 16000).unwrap();
        assert!(matches!(wav2aud(&w, &p), Err(AudSpecError::WrongSampleRate { .. })));
        let w = Waveform::new(vec![0.0; 79], 8000).unwrap();
        assert!(matches!(wav2aud(&w, &p), Err(AudSpecError::TooShort { .. })));
    }

    #[test]
    fn tone_peaks_at_its_channel() {
        let p = AudSpecParams::default();
        let cf = super::super::center_frequency(64, p.shft);
        let s = wav2aud(&tone(cf, 0.5, 1.0), &p).unwrap();
        let m = mean_spectrum(&s);
        let argmax = (0..N_CHANNELS).max_by(|&a, &b| m[a].total_cmp(&m[b])).unwrap();
        assert!((argmax as i64 - 64).abs() <= 1, "argmax {argmax}");
    }

    #[test]
    fn linear_route_matches_staged_route() {
        let p = AudSpecParams::default();
        let n = 4000;
        let s: Vec<f64> = (0..n)
            .map(|i| ((i * 7919 % 1000) as f64 / 500.0 - 1.0) * 0.3 + (i as f64 * 0.11).sin() * 0.2)
            .collect();
        let w = Waveform::new(s, 8000).unwrap();
        let a = wav2aud(&w, &p).unwrap();
        let b = wav2aud_linear(&w, &p).unwrap();
        let scale = a.data().iter().cloned().fold(0.0, f64::max);
        for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
            assert!((x - y).abs() <= 1e-9 * scale, "{i}: {x} vs {y}");
        }
    }

    #[test]
    fn doubling_amplitude_never_lowers_energy() {
        let p = AudSpecParams::default();
        let cf = super::super::center_frequency(50, p.shft);
        let a = mean_spectrum(&wav2aud(&tone(cf, 0.2, 0.5), &p).unwrap());
        let b = mean_spectrum(&wav2aud(&tone(cf, 0.4, 0.5), &p).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!(y >= x);
        }
    }
}
