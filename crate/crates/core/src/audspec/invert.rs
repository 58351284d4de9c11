use rand_distr::{Distribution, StandardNormal};

use super::filterbank::Filterbank;
use super::transform::envelope;
use super::{AudSpec, AudSpecError, Result, Waveform, CODEC_RATE, N_CHANNELS};
use crate::{rng, stats};

/// Upper bound on the per-frame envelope correction.
const MAX_GAIN: f64 = 1e4;

/// Result of [`aud2wav`].
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Best iterate found.
    pub waveform: Waveform,
    /// Corr2D between the spectrogram of `waveform` and the target.
    pub corr2d: f64,
    /// 1-based iteration that produced `waveform`.
    pub best_iteration: usize,
    /// Corr2D after every iteration.
    pub history: Vec<f64>,
}

/// Reconstructs a waveform whose auditory spectrogram matches `s`.
///
/// Starts from seeded white noise and alternates between analysis through
/// the cochlear channels, per-frame rescaling of every channel to the target
/// magnitudes, and least-squares resynthesis. Only the linear hair-cell stage
/// (`fac = -2`) is invertible this way.
pub fn aud2wav(s: &AudSpec, iters: usize, seed: u64) -> Result<Reconstruction> {
    if iters == 0 {
        return Err(AudSpecError::InvalidParams("iters must be at least 1".into()));
    }
    let p = s.params;
    p.validate()?;
    if p.fac != -2 {
        return Err(AudSpecError::InvalidParams(format!(
            "inversion requires the linear hair cell (fac = -2), got {}",
            p.fac
        )));
    }
    if let Some(v) = s.data().iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(AudSpecError::InvalidSpectrogram(format!("entry {v}")));
    }
    let target = s.data();
    let n_frames = s.n_frames();
    let step = p.frame_samples();
    let n = n_frames * step;
    let fb = Filterbank::new(&p, n);

    let mut r = rng::rng(seed);
    let mut x: Vec<f64> = (0..n).map(|_| {
        let g: f64 = StandardNormal.sample(&mut r);
        0.1 * g
    }).collect();
    let mut y = fb.lateral_outputs(&x);
    let mut v = envelope(&y, &p, n_frames);

    let mut history = Vec::with_capacity(iters);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for it in 1..=iters {
        let peak = v.iter().cloned().fold(0.0, f64::max);
        let floor = (peak * 1e-9).max(f64::MIN_POSITIVE);
        for (k, ch) in y.iter_mut().enumerate() {
            for t in 0..n_frames {
                let (want, have) = (target[t * N_CHANNELS + k], v[t * N_CHANNELS + k]);
                let gain = if want == 0.0 {
                    0.0
                } else {
                    (want / have.max(floor)).min(MAX_GAIN)
                };
                for sample in &mut ch[t * step..(t + 1) * step] {
                    *sample *= gain;
                }
            }
        }
        x = fb.synthesize(&y);
        y = fb.lateral_outputs(&x);
        v = envelope(&y, &p, n_frames);

        // the transform is positively homogeneous, so the best overall gain is a
        // one-dimensional least-squares fit
        let vv: f64 = v.iter().map(|a| a * a).sum();
        let vs: f64 = v.iter().zip(target).map(|(a, b)| a * b).sum();
        let a = if vv > 0.0 { vs / vv } else { 0.0 };
        for val in x.iter_mut() {
            *val *= a;
        }
        for ch in y.iter_mut() {
            for val in ch.iter_mut() {
                *val *= a;
            }
        }
        for val in v.iter_mut() {
            *val *= a;
        }

        let corr = stats::pearson(&v, target).unwrap_or(f64::NEG_INFINITY);
        history.push(corr);
        if best.as_ref().is_none_or(|(c, _, _)| corr > *c) {
            best = Some((corr, it, x.clone()));
        }
    }
    let (corr2d, best_iteration, samples) = best.expect("at least one iteration");
    Ok(Reconstruction {
        waveform: Waveform::new(samples, CODEC_RATE)?,
        corr2d,
        best_iteration,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audspec::AudSpecParams;

    #[test]
    fn zero_target_gives_silence() {
        let s = AudSpec::new(vec![0.0; 20 * N_CHANNELS], 20, AudSpecParams::default()).unwrap();
        let r = aud2wav(&s, 3, 1).unwrap();
        assert_eq!(r.waveform.samples.len(), 20 * 80);
        assert!(r.waveform.rms() < 1e-6);
    }

    #[test]
    fn rejects_zero_iterations_and_nonlinear_params() {
        let s = AudSpec::new(vec![1.0; N_CHANNELS], 1, AudSpecParams::default()).unwrap();
        assert!(aud2wav(&s, 0, 1).is_err());
        let mut s2 = s.clone();
        s2.params.fac = -1;
        assert!(aud2wav(&s2, 1, 1).is_err());
    }

    fn vowel(f0: f64, f1: f64, f2: f64, seconds: f64) -> Waveform {
        let fs = CODEC_RATE as f64;
        let n = (seconds * fs) as usize;
        let resonance = |f: f64, fc: f64| 1.0 / (1.0 + ((f - fc) / 80.0).powi(2));
        let harmonics: Vec<(f64, f64)> = (1..)
            .map(|h| h as f64 * f0)
            .take_while(|&f| f < 3800.0)
            .map(|f| (f, resonance(f, f1) + 0.6 * resonance(f, f2)))
            .collect();
        let s = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                0.2 * harmonics
                    .iter()
                    .map(|(f, a)| a * (2.0 * std::f64::consts::PI * f * t).sin())
                    .sum::<f64>()
            })
            .collect();
        Waveform::new(s, CODEC_RATE).unwrap()
    }

    #[test]
    fn vowel_round_trip() {
        let p = AudSpecParams::default();
        let s = crate::audspec::wav2aud(&vowel(120.0, 700.0, 1200.0, 1.0), &p).unwrap();
        let r = aud2wav(&s, 50, 3).unwrap();
        let back = crate::audspec::wav2aud(&r.waveform, &p).unwrap();
        let c = crate::stats::pearson(back.data(), s.data()).unwrap();
        assert!(c >= 0.9);
        let r1 = aud2wav(&s, 1, 3).unwrap();
        assert!(r.corr2d >= r1.corr2d);
    }
}
