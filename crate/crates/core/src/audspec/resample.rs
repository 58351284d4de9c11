use std::f64::consts::PI;

use super::{AudSpecError, Result, Waveform};

/// Pass-band edge as a fraction of the target rate.
const CUTOFF_FRACTION: f64 = 0.45;
/// Sinc zero crossings kept on each side of the kernel center.
const ZERO_CROSSINGS: f64 = 16.0;

fn blackman(u: f64) -> f64 {
    // u in [-1, 1]
    0.42 + 0.5 * (PI * u).cos() + 0.08 * (2.0 * PI * u).cos()
}

/// Downsamples with a Blackman-windowed sinc low-pass at 0.45·`target_rate`,
/// evaluated directly at every output instant. Equal rates return the input.
pub fn resample(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if w.samples.is_empty() {
        return Err(AudSpecError::EmptyInput);
    }
    if target_rate == 0 {
        return Err(AudSpecError::InvalidParams("target rate must be positive".into()));
    }
    if target_rate > w.sample_rate {
        return Err(AudSpecError::Upsampling {
            from: w.sample_rate,
            to: target_rate,
        });
    }
    if target_rate == w.sample_rate {
        return Ok(w.clone());
    }
    let ratio = w.sample_rate as f64 / target_rate as f64;
    // cutoff in cycles per input sample
    let fc = CUTOFF_FRACTION * target_rate as f64 / w.sample_rate as f64;
    let half = ZERO_CROSSINGS / (2.0 * fc);
    let n_out = (w.samples.len() as f64 / ratio).round() as usize;
    let x = &w.samples;
    let out = (0..n_out)
        .map(|m| {
            let center = m as f64 * ratio;
            let lo = (center - half).ceil().max(0.0) as usize;
            let hi = ((center + half).floor() as usize).min(x.len() - 1);
            let mut acc = 0.0;
            for (n, &xn) in x.iter().enumerate().take(hi + 1).skip(lo) {
                let d = center - n as f64;
                let arg = 2.0 * fc * d;
                let sinc = if arg == 0.0 {
                    1.0
                } else {
                    (PI * arg).sin() / (PI * arg)
                };
                acc += xn * 2.0 * fc * sinc * blackman(d / half);
            }
            acc
        })
        .collect();
    Waveform::new(out, target_rate)
}
