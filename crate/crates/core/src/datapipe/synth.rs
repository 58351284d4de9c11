//! Synthetic paired corpus: pseudo-phones rendered as vowel audio and as a
//! mouth ellipse whose opening and width follow the formants.

use std::f64::consts::PI;

use rand::Rng as _;

use crate::audspec::{Waveform, CODEC_RATE};
use crate::rng;

use super::frames::FrameSequence;
use super::{DataError, Result};

pub const FRAME_RATE: f64 = 25.0;
pub const FRAME_SIZE: usize = 128;
pub const PHONE_SECONDS: f64 = 0.2;
pub const SPEAKER_PITCH_HZ: [f64; 4] = [110.0, 146.0, 196.0, 233.0];

/// (F1, F2) of the eight pseudo-phones, Hz.
pub const PHONES: [(f64, f64); 8] = [
    (270.0, 2290.0),
    (390.0, 1990.0),
    (530.0, 1840.0),
    (660.0, 1720.0),
    (730.0, 1090.0),
    (570.0, 840.0),
    (440.0, 1020.0),
    (300.0, 870.0),
];

/// Per-instance relative formant jitter; the mouth follows the jittered values.
pub const FORMANT_JITTER: f64 = 0.08;
const FORMANT_BW: f64 = 80.0;
const MAX_HARMONIC_HZ: f64 = 3800.0;
const PHONE_RMS: f64 = 0.1;
const CROSSFADE_S: f64 = 0.01;

const SKIN: f64 = 0.7;
const LIP: f64 = 0.35;
const CAVITY: f64 = 0.1;

/// One generated utterance and the labels that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub frames: FrameSequence,
    pub audio: Waveform,
    pub speaker: usize,
    pub phones: Vec<usize>,
    /// (F1, F2) actually rendered for each phone.
    pub formants: Vec<(f64, f64)>,
}

/// Number of 200 ms phones in `duration_s`.
pub fn phone_count(duration_s: f64) -> Result<usize> {
    let n = duration_s / PHONE_SECONDS;
    if !(n.is_finite() && n >= 0.5) || (n - n.round()).abs() > 1e-6 {
        return Err(DataError::Invalid(format!(
            "duration {duration_s} s is not a positive multiple of {PHONE_SECONDS} s"
        )));
    }
    Ok(n.round() as usize)
}

pub fn synth_pair(seed: u64, duration_s: f64) -> Result<(FrameSequence, Waveform)> {
    let u = synth_utterance(seed, duration_s)?;
    Ok((u.frames, u.audio))
}

/// Random speaker and phone sequence from `seed`, then rendered.
pub fn synth_utterance(seed: u64, duration_s: f64) -> Result<Utterance> {
    let n = phone_count(duration_s)?;
    let mut r = rng::rng(seed);
    let speaker = r.random_range(0..SPEAKER_PITCH_HZ.len());
    let phones: Vec<usize> = (0..n).map(|_| r.random_range(0..PHONES.len())).collect();
    let formants = phones
        .iter()
        .map(|&p| {
            let (f1, f2) = PHONES[p];
            let j1: f64 = r.random_range(-FORMANT_JITTER..=FORMANT_JITTER);
            let j2: f64 = r.random_range(-FORMANT_JITTER..=FORMANT_JITTER);
            (f1 * (1.0 + j1), f2 * (1.0 + j2))
        })
        .collect();
    render_formants(speaker, &phones, formants)
}

/// Renders nominal phones without jitter.
pub fn render(speaker: usize, phones: &[usize]) -> Result<Utterance> {
    let formants = phones.iter().filter_map(|&p| PHONES.get(p).copied()).collect();
    render_formants(speaker, phones, formants)
}

fn render_formants(speaker: usize, phones: &[usize], formants: Vec<(f64, f64)>) -> Result<Utterance> {
    if speaker >= SPEAKER_PITCH_HZ.len() {
        return Err(DataError::Invalid(format!("speaker {speaker} out of range")));
    }
    if phones.is_empty() {
        return Err(DataError::Invalid("no phones".into()));
    }
    if let Some(p) = phones.iter().find(|&&p| p >= PHONES.len()) {
        return Err(DataError::Invalid(format!("phone {p} out of range")));
    }
    let per_phone = (PHONE_SECONDS * FRAME_RATE).round() as usize;
    let mut data = Vec::with_capacity(phones.len() * per_phone * FRAME_SIZE * FRAME_SIZE);
    for &fm in &formants {
        let img = mouth_image(fm, speaker);
        for _ in 0..per_phone {
            data.extend_from_slice(&img);
        }
    }
    let frames = FrameSequence::new(data, phones.len() * per_phone, FRAME_SIZE, FRAME_SIZE, FRAME_RATE)?;
    let audio = phone_audio(SPEAKER_PITCH_HZ[speaker], &formants);
    Ok(Utterance {
        frames,
        audio,
        speaker,
        phones: phones.to_vec(),
        formants,
    })
}

/// Half-height and half-width of the mouth opening in pixels, strictly
/// increasing in F1 and F2 respectively.
pub fn mouth_axes((f1, f2): (f64, f64)) -> (f64, f64) {
    (4.0 + (f1 - 250.0) / 500.0 * 22.0, 18.0 + (f2 - 800.0) / 1500.0 * 26.0)
}

/// Lip thickness in pixels identifies the speaker.
fn lip_thickness(speaker: usize) -> f64 {
    3.0 + 2.0 * speaker as f64
}

/// Fraction of a pixel inside the ellipse, from a one-pixel ramp across the boundary.
fn coverage(dx: f64, dy: f64, a: f64, b: f64) -> f64 {
    let r = ((dx / b).powi(2) + (dy / a).powi(2)).sqrt();
    ((1.0 - r) * a.min(b) + 0.5).clamp(0.0, 1.0)
}

pub fn mouth_image(formants: (f64, f64), speaker: usize) -> Vec<f64> {
    let (a, b) = mouth_axes(formants);
    let th = lip_thickness(speaker);
    let (cy, cx) = (FRAME_SIZE as f64 * 0.55, FRAME_SIZE as f64 * 0.5);
    let mut img = Vec::with_capacity(FRAME_SIZE * FRAME_SIZE);
    for y in 0..FRAME_SIZE {
        for x in 0..FRAME_SIZE {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            let outer = coverage(dx, dy, a + th, b + th);
            let inner = coverage(dx, dy, a, b);
            img.push(SKIN + (LIP - SKIN) * outer + (CAVITY - LIP) * inner);
        }
    }
    img
}

/// Harmonic amplitudes of a formant pair at pitch `f0`, scaled to a fixed RMS.
fn harmonic_amplitudes(f0: f64, (f1, f2): (f64, f64)) -> Vec<f64> {
    let resonance = |f: f64, fc: f64| 1.0 / (1.0 + ((f - fc) / FORMANT_BW).powi(2));
    let amps: Vec<f64> = (1..)
        .map(|h| h as f64 * f0)
        .take_while(|&f| f < MAX_HARMONIC_HZ)
        .map(|f| resonance(f, f1) + 0.6 * resonance(f, f2))
        .collect();
    let rms = (amps.iter().map(|a| a * a).sum::<f64>() / 2.0).sqrt();
    amps.into_iter().map(|a| a * PHONE_RMS / rms).collect()
}

/// Phase-continuous harmonic synthesis with short linear crossfades of the
/// amplitudes between phones.
fn phone_audio(f0: f64, phones: &[(f64, f64)]) -> Waveform {
    let fs = CODEC_RATE as f64;
    let seg = (PHONE_SECONDS * fs).round() as usize;
    let fade = (CROSSFADE_S * fs).round() as usize;
    let amps: Vec<Vec<f64>> = phones.iter().map(|&p| harmonic_amplitudes(f0, p)).collect();
    let n_h = amps[0].len();
    let mut out = Vec::with_capacity(seg * phones.len());
    let mut cur = vec![0.0; n_h];
    for i in 0..seg * phones.len() {
        let (j, k) = (i / seg, i % seg);
        if j > 0 && k < fade {
            let w = (k as f64 + 0.5) / fade as f64;
            for h in 0..n_h {
                cur[h] = amps[j - 1][h] * (1.0 - w) + amps[j][h] * w;
            }
        } else {
            cur.copy_from_slice(&amps[j]);
        }
        let t = i as f64 / fs;
        out.push(
            cur.iter()
                .enumerate()
                .map(|(h, a)| a * (2.0 * PI * (h + 1) as f64 * f0 * t).sin())
                .sum(),
        );
    }
    Waveform::new(out, CODEC_RATE).expect("finite synthesis")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mouth_shapes_are_distinct() {
        let imgs: Vec<_> = PHONES.iter().map(|&p| mouth_image(p, 0)).collect();
        for i in 0..imgs.len() {
            for j in i + 1..imgs.len() {
                assert_ne!(imgs[i], imgs[j], "{i} {j}");
            }
        }
        assert_ne!(mouth_image(PHONES[0], 0), mouth_image(PHONES[0], 1));
    }

    #[test]
    fn bad_durations() {
        assert!(phone_count(0.3).is_err());
        assert!(phone_count(0.0).is_err());
        assert_eq!(phone_count(3.0).unwrap(), 15);
    }
}
