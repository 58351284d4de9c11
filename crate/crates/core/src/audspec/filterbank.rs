//! Constant-Q cochlear filterbank evaluated in the frequency domain.
//!
//! Each channel is a 4th-order gammatone, the real part of a complex resonator
//! whose spectrum is `(1 + i(f - cf)/b)^-4`. Filtering is done by zero-padded
//! FFT convolution; the padding outlasts the slowest channel's impulse
//! response, so the result is the causal filter output up to a negligible tail.

use std::f64::consts::PI;
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{AudSpecParams, CODEC_RATE, N_CHANNELS};

/// 3 dB bandwidth of every channel, in octaves.
const BANDWIDTH_OCTAVES: f64 = 1.0 / 6.0;
/// Half-power half-width of a 4th-order resonator in units of its pole width: sqrt(2^(1/4) - 1).
const HALF_POWER_WIDTH: f64 = 0.435_275_281_648_062;
/// Time constant of the hair-cell membrane low-pass, ms.
const MEMBRANE_TC_MS: f64 = 0.5;
/// Channels above this fraction of Nyquist are silenced.
const MAX_CF_FRACTION: f64 = 0.95;
/// Padding in units of the slowest pole time constant; the gammatone envelope
/// has decayed below 1e-7 of its peak by then.
const TAIL_TIME_CONSTANTS: f64 = 25.0;
/// Relative Tikhonov weight in the least-squares resynthesis.
const SYNTH_REGULARIZATION: f64 = 1e-4;

/// Center frequency of channel `k` (0-based) in Hz: 440 · 2^((k − 31)/24 + shft).
pub fn center_frequency(k: usize, shft: i32) -> f64 {
    440.0 * 2f64.powf((k as f64 - 31.0) / 24.0 + shft as f64)
}

fn pole_width(cf: f64) -> f64 {
    let bw = cf * (2f64.powf(BANDWIDTH_OCTAVES / 2.0) - 2f64.powf(-BANDWIDTH_OCTAVES / 2.0));
    bw / (2.0 * HALF_POWER_WIDTH)
}

/// Smallest 2^a·3^b·5^c that is at least `n`.
fn fast_len(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p5 = 1;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut m = p35;
            while m < n {
                m *= 2;
            }
            best = best.min(m);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

/// The 128 analysis channels plus the one extra channel above them that the
/// top channel's lateral inhibition needs.
pub struct Filterbank {
    n_samples: usize,
    fft_len: usize,
    cf: Vec<f64>,
    active: Vec<bool>,
    /// Gammatone responses on bins 0..=fft_len/2, one row per filter.
    gammatone: Vec<Vec<Complex64>>,
    /// Membrane low-pass response on the same bins.
    membrane: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Filterbank {
    pub fn new(params: &AudSpecParams, n_samples: usize) -> Self {
        let fs = CODEC_RATE as f64;
        let cf: Vec<f64> = (0..=N_CHANNELS).map(|k| center_frequency(k, params.shft)).collect();
        let active: Vec<bool> = cf.iter().map(|&f| f <= MAX_CF_FRACTION * fs / 2.0).collect();
        let slowest = cf
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .map(|(&f, _)| pole_width(f))
            .fold(f64::INFINITY, f64::min);
        let pad = if slowest.is_finite() {
            (TAIL_TIME_CONSTANTS / (2.0 * PI * slowest) * fs).ceil() as usize
        } else {
            0
        };
        let fft_len = fast_len(n_samples + pad.max(16));
        let bins = fft_len / 2 + 1;
        let freq = |bin: usize| bin as f64 * fs / fft_len as f64;

        let gammatone = cf
            .iter()
            .zip(&active)
            .map(|(&c, &a)| {
                if !a {
                    return vec![Complex64::new(0.0, 0.0); bins];
                }
                let b = pole_width(c);
                let lobe = |f: f64| Complex64::new(1.0, (f - c) / b).powi(-4);
                (0..bins)
                    .map(|bin| {
                        let f = freq(bin);
                        lobe(f) + lobe(-f).conj()
                    })
                    .collect()
            })
            .collect();

        let beta = (-1.0 / (MEMBRANE_TC_MS * fs / 1000.0)).exp();
        let membrane = (0..bins)
            .map(|bin| {
                let w = 2.0 * PI * bin as f64 / fft_len as f64;
                Complex64::new(1.0 - beta, 0.0) / (Complex64::new(1.0, 0.0) - beta * Complex64::from_polar(1.0, -w))
            })
            .collect();

        let mut planner = FftPlanner::new();
        Filterbank {
            n_samples,
            fft_len,
            cf,
            active,
            gammatone,
            membrane,
            forward: planner.plan_fft_forward(fft_len),
            inverse: planner.plan_fft_inverse(fft_len),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Center frequencies of the 128 output channels.
    pub fn center_frequencies(&self) -> &[f64] {
        &self.cf[..N_CHANNELS]
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.active[k]
    }

    pub(crate) fn membrane_coefficient() -> f64 {
        (-1.0 / (MEMBRANE_TC_MS * CODEC_RATE as f64 / 1000.0)).exp()
    }

    /// Lateral-inhibition channel `k` seen as one linear filter: membrane
    /// low-pass applied to the difference of neighbouring gammatones.
    fn lateral_response(&self, k: usize, bin: usize) -> Complex64 {
        if !self.active[k] {
            return Complex64::new(0.0, 0.0);
        }
        let upper = if self.active[k + 1] {
            self.gammatone[k + 1][bin]
        } else {
            Complex64::new(0.0, 0.0)
        };
        self.membrane[bin] * (self.gammatone[k][bin] - upper)
    }

    fn spectrum(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n_samples, "filterbank built for another length");
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        buf
    }

    /// Filters `x` through `count` real filters given by their half-spectrum
    /// responses. Two real outputs share one complex inverse FFT.
    fn filter_many<R>(&self, x: &[f64], count: usize, keep: usize, response: R) -> Vec<Vec<f64>>
    where
        R: Fn(usize, usize) -> Complex64 + Sync,
    {
        let spec = self.spectrum(x);
        let m = self.fft_len;
        let half = m / 2;
        let scale = 1.0 / m as f64;
        let pair = |p: usize| -> (Vec<f64>, Vec<f64>) {
            let (a, b) = (2 * p, 2 * p + 1);
            let mut buf = vec![Complex64::new(0.0, 0.0); m];
            let i = Complex64::new(0.0, 1.0);
            for bin in 0..=half {
                let ya = spec[bin] * response(a, bin);
                let yb = if b < count {
                    spec[bin] * response(b, bin)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                if bin == 0 || bin == m - bin {
                    // self-conjugate bins of a real signal must be real
                    buf[bin] = Complex64::new(ya.re, yb.re);
                } else {
                    buf[bin] = ya + i * yb;
                    buf[m - bin] = ya.conj() + i * yb.conj();
                }
            }
            let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let ra = buf[..keep].iter().map(|c| c.re * scale).collect();
            let rb = buf[..keep].iter().map(|c| c.im * scale).collect();
            (ra, rb)
        };
        let n_pairs = count.div_ceil(2);
        #[cfg(feature = "parallel")]
        let pairs: Vec<_> = (0..n_pairs).into_par_iter().map(pair).collect();
        #[cfg(not(feature = "parallel"))]
        let pairs: Vec<_> = (0..n_pairs).map(pair).collect();
        let mut out = Vec::with_capacity(count);
        for (a, b) in pairs {
            out.push(a);
            if out.len() < count {
                out.push(b);
            }
        }
        out
    }

    /// Outputs of all 129 gammatone filters (zeros for silenced channels).
    pub fn cochlear_outputs(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.filter_many(x, N_CHANNELS + 1, self.n_samples, |k, bin| self.gammatone[k][bin])
    }

    /// Like [`cochlear_outputs`](Self::cochlear_outputs) but over the whole
    /// padded period. Samples past `n_samples` are the filter response at
    /// negative time, wrapped around; running a recursive stage through them
    /// first gives it the same initial state as circular filtering.
    pub(crate) fn cochlear_outputs_periodic(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.filter_many(x, N_CHANNELS + 1, self.fft_len, |k, bin| self.gammatone[k][bin])
    }

    /// Outputs of the 128 linear lateral-inhibition channels (before rectification).
    pub fn lateral_outputs(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.filter_many(x, N_CHANNELS, self.n_samples, |k, bin| self.lateral_response(k, bin))
    }

    /// Least-squares signal whose [`lateral_outputs`](Self::lateral_outputs)
    /// best match `channels`.
    pub fn synthesize(&self, channels: &[Vec<f64>]) -> Vec<f64> {
        assert_eq!(channels.len(), N_CHANNELS);
        let m = self.fft_len;
        let half = m / 2;
        let i = Complex64::new(0.0, 1.0);
        let pair = |p: usize| -> Vec<Complex64> {
            let (a, b) = (2 * p, 2 * p + 1);
            let mut buf = vec![Complex64::new(0.0, 0.0); m];
            for (j, slot) in buf.iter_mut().take(self.n_samples).enumerate() {
                *slot = Complex64::new(channels[a][j], channels[b][j]);
            }
            let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            (0..=half)
                .map(|bin| {
                    let p_pos = buf[bin];
                    let p_neg = buf[(m - bin) % m].conj();
                    let za = (p_pos + p_neg) * 0.5;
                    let zb = (p_pos - p_neg) / (2.0 * i);
                    self.lateral_response(a, bin).conj() * za + self.lateral_response(b, bin).conj() * zb
                })
                .collect()
        };
        #[cfg(feature = "parallel")]
        let parts: Vec<Vec<Complex64>> = (0..N_CHANNELS / 2).into_par_iter().map(pair).collect();
        #[cfg(not(feature = "parallel"))]
        let parts: Vec<Vec<Complex64>> = (0..N_CHANNELS / 2).map(pair).collect();

        let mut acc = vec![Complex64::new(0.0, 0.0); half + 1];
        for part in &parts {
            for (a, v) in acc.iter_mut().zip(part) {
                *a += v;
            }
        }
        let weight: Vec<f64> = (0..=half)
            .map(|bin| (0..N_CHANNELS).map(|k| self.lateral_response(k, bin).norm_sqr()).sum())
            .collect();
        let floor = SYNTH_REGULARIZATION * weight.iter().cloned().fold(0.0, f64::max);
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for bin in 0..=half {
            let v = acc[bin] / (weight[bin] + floor);
            if bin == 0 || bin == m - bin {
                buf[bin] = Complex64::new(v.re, 0.0);
            } else {
                buf[bin] = v;
                buf[m - bin] = v.conj();
            }
        }
        self.inverse.process(&mut buf);
        buf[..self.n_samples].iter().map(|c| c.re / m as f64).collect()
    }
}
