use std::f64::consts::PI;
use std::io::Cursor;

use liplab::audspec::*;
use proptest::prelude::*;

fn tone(freq: f64, secs: f64, rate: u32) -> Waveform {
    let n = (secs * rate as f64) as usize;
    let s = (0..n).map(|i| 0.3 * (2.0 * PI * freq * i as f64 / rate as f64).sin()).collect();
    Waveform::new(s, rate).unwrap()
}

fn peak_channel(s: &AudSpec) -> usize {
    let mut energy = vec![0.0; N_CHANNELS];
    for t in 0..s.n_frames() {
        for (k, e) in energy.iter_mut().enumerate() {
            *e += s.at(t, k);
        }
    }
    (0..N_CHANNELS).max_by(|&a, &b| energy[a].total_cmp(&energy[b])).unwrap()
}

#[test]
fn center_frequencies_are_24_per_octave() {
    for shft in -1..=1 {
        for k in 0..N_CHANNELS - 24 {
            let r = center_frequency(k + 24, shft) / center_frequency(k, shft);
            assert!((r - 2.0).abs() < 1e-12);
        }
        assert!((center_frequency(31, shft) - 440.0 * 2f64.powi(shft)).abs() < 1e-9);
    }
}

#[test]
fn pure_tone_peaks_near_its_channel() {
    let p = AudSpecParams::default();
    for freq in [250.0, 500.0, 1000.0, 2000.0] {
        let s = wav2aud(&tone(freq, 0.3, CODEC_RATE), &p).unwrap();
        let k = peak_channel(&s);
        let cf = center_frequency(k, p.shft);
        // within a third of an octave
        assert!((cf / freq).log2().abs() < 1.0 / 3.0, "{freq} Hz peaked at {cf:.1} Hz");
    }
}

#[test]
fn frame_count_follows_frame_length() {
    let w = tone(440.0, 0.25, CODEC_RATE);
    for (frm, expected) in [(10.0, 25), (8.0, 31), (16.0, 15)] {
        let p = AudSpecParams { frm_len: frm, ..Default::default() };
        assert_eq!(wav2aud(&w, &p).unwrap().n_frames(), expected);
    }
}

#[test]
fn rejects_bad_inputs() {
    let p = AudSpecParams::default();
    assert!(matches!(
        wav2aud(&tone(440.0, 0.1, 16000), &p),
        Err(AudSpecError::WrongSampleRate { .. })
    ));
    let short = Waveform::new(vec![0.1; 40], CODEC_RATE).unwrap();
    assert!(matches!(wav2aud(&short, &p), Err(AudSpecError::TooShort { .. })));
    let bad = AudSpecParams { tc: 0.0, ..p };
    assert!(wav2aud(&tone(440.0, 0.1, CODEC_RATE), &bad).is_err());
    assert!(AudSpec::new(vec![-1.0; N_CHANNELS], 1, p).is_err());
    assert!(AudSpec::new(vec![0.0; N_CHANNELS + 1], 1, p).is_err());
}

#[test]
fn linear_path_matches_general_path() {
    let w = tone(700.0, 0.2, CODEC_RATE);
    let p = AudSpecParams::default();
    let a = wav2aud(&w, &p).unwrap();
    let b = wav2aud_linear(&w, &p).unwrap();
    assert_eq!(a.n_frames(), b.n_frames());
    let scale = a.data().iter().cloned().fold(0.0, f64::max);
    let diff = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-3 * scale, "{diff} vs peak {scale}");
}

#[test]
fn resample_keeps_duration_and_tone() {
    let w = tone(300.0, 0.5, 16000);
    let r = resample(&w, CODEC_RATE).unwrap();
    assert_eq!(r.sample_rate, CODEC_RATE);
    assert!((r.duration_s() - w.duration_s()).abs() < 1e-3);
    assert!((r.rms() - w.rms()).abs() < 0.01 * w.rms());
    assert!(matches!(resample(&r, 16000), Err(AudSpecError::Upsampling { .. })));
}

#[test]
fn resample_removes_content_above_nyquist() {
    let w = tone(5000.0, 0.5, 16000);
    let r = resample(&w, CODEC_RATE).unwrap();
    // skip the kernel edges
    let mid = &r.samples[200..r.samples.len() - 200];
    let rms = (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt();
    assert!(rms < 0.01 * w.rms(), "{rms}");
}

#[test]
fn inversion_recovers_the_spectrogram() {
    let s = wav2aud(&tone(600.0, 0.3, CODEC_RATE), &AudSpecParams::default()).unwrap();
    let rec = aud2wav(&s, 20, 3).unwrap();
    let again = wav2aud(&rec.waveform, &AudSpecParams::default()).unwrap();
    assert_eq!(again.n_frames(), s.n_frames());
    assert_eq!(peak_channel(&again), peak_channel(&s));
}

fn spectrogram() -> impl Strategy<Value = AudSpec> {
    (1usize..6).prop_flat_map(|t| {
        prop::collection::vec(0.0f32..10.0, t * N_CHANNELS)
            .prop_map(move |v| AudSpec::new(v.into_iter().map(f64::from).collect(), t, AudSpecParams::default()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compress_inverts(s in spectrogram()) {
        let back = decompress(&compress(&s));
        for (a, b) in back.data().iter().zip(s.data()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    // values are stored as f32, so f32-representable inputs survive exactly
    #[test]
    fn auds_round_trip_is_exact(s in spectrogram()) {
        let mut buf = Vec::new();
        write_auds(&mut buf, &s).unwrap();
        let back = read_auds(Cursor::new(buf)).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn slicing_keeps_rows(s in spectrogram(), a in 0usize..6, b in 0usize..6) {
        let (lo, hi) = (a.min(b).min(s.n_frames()), a.max(b).min(s.n_frames()));
        let part = s.slice_frames(lo, hi);
        prop_assert_eq!(part.n_frames(), hi - lo);
        for t in lo..hi {
            prop_assert_eq!(part.frame(t - lo), s.frame(t));
        }
    }

    #[test]
    fn wav_round_trip_within_one_step(v in prop::collection::vec(-1.0f64..1.0, 1..400)) {
        let w = Waveform::new(v, CODEC_RATE).unwrap();
        let mut buf = Vec::new();
        write_wav(&mut buf, &w).unwrap();
        let back = read_wav(Cursor::new(buf)).unwrap();
        prop_assert_eq!(back.sample_rate, CODEC_RATE);
        prop_assert_eq!(back.samples.len(), w.samples.len());
        for (a, b) in back.samples.iter().zip(&w.samples) {
            prop_assert!((a - b).abs() <= 1.0 / 32767.0);
        }
    }

    #[test]
    fn spectrogram_is_nonnegative_and_scales(amp in 0.05f64..1.0, freq in 150.0f64..3000.0) {
        let p = AudSpecParams::default();
        let base = wav2aud(&tone(freq, 0.1, CODEC_RATE), &p).unwrap();
        prop_assert!(base.data().iter().all(|&v| v >= 0.0 && v.is_finite()));
        // the linear hair cell makes the output scale with amplitude
        let w = tone(freq, 0.1, CODEC_RATE);
        let scaled = Waveform::new(w.samples.iter().map(|s| s * amp / 0.3).collect(), CODEC_RATE).unwrap();
        let s = wav2aud(&scaled, &p).unwrap();
        for (a, b) in s.data().iter().zip(base.data()) {
            prop_assert!((a - b * amp / 0.3).abs() <= 1e-9 * (1.0 + b));
        }
    }
}
