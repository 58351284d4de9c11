use liplab::audspec::N_CHANNELS;
use liplab_wasm::*;

#[test]
fn round_trip_correlates() {
    let rt = round_trip(3, 1, 20, 1).map_err(|_| ()).unwrap();
    assert!(rt.corr2d() > 0.8, "{}", rt.corr2d());
    let orig = rt.original();
    assert_eq!(orig.data().len(), orig.frames() * N_CHANNELS);
    assert_eq!(rt.reconstructed().frames(), orig.frames());
    assert!(!rt.samples().is_empty());
}

#[test]
fn vowel_lengths_follow_phone_count() {
    let one = vowel_spectrogram(0, 0, 1).map_err(|_| ()).unwrap();
    let three = vowel_spectrogram(0, 0, 3).map_err(|_| ()).unwrap();
    assert_eq!(three.frames(), 3 * one.frames());
    assert!(one.data().iter().all(|&v| v >= 0.0));
}

#[test]
fn loss_curve_rises_with_noise() {
    let c = loss_curve(1.0, 5, 0).map_err(|_| ()).unwrap();
    assert_eq!(c.len(), 20);
    assert_eq!(c[0], 0.0);
    assert!((c[1] + 1.0).abs() < 1e-12);
    let losses: Vec<f64> = c.chunks(4).map(|r| r[1]).collect();
    assert!(losses.windows(2).all(|w| w[1] > w[0]), "{losses:?}");
}
