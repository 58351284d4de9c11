use liplab::nets::{he_init, Autoencoder, LipReader, NetConfig};
use liplab::rng;
use liplab::tensor::{Mode, Tensor};
use rand::Rng;
use rand_distr::StandardNormal;

fn randn(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng::rng(seed);
    Tensor::from_fn(shape, |_| r.sample::<f64, _>(StandardNormal))
}

fn small_cfg() -> NetConfig {
    NetConfig {
        h: 32,
        w: 32,
        lstm_units: 16,
        mlp_hidden: 24,
        ..NetConfig::default()
    }
}

#[test]
fn lipreader_shape_chain_at_full_resolution() {
    let cfg = NetConfig::default();
    let m = LipReader::build(&cfg, 1).unwrap();
    let x = randn(&m.input_shape(1), 2);
    let trace = m.shape_trace(&x).unwrap();
    let get = |name: &str| trace.iter().find(|(n, _)| n == name).unwrap().1.clone();
    assert_eq!(get("input"), [3, 128, 128, 5]);
    assert_eq!(get("conv1"), [32, 128, 128, 5]);
    assert_eq!(get("pool1"), [32, 64, 64, 5]);
    assert_eq!(get("pool2"), [32, 32, 32, 5]);
    assert_eq!(get("pool3"), [32, 16, 16, 5]);
    assert_eq!(get("conv4"), [64, 16, 16, 5]);
    assert_eq!(get("pool5"), [64, 8, 8, 5]);
    assert_eq!(get("conv6"), [128, 8, 8, 5]);
    assert_eq!(get("pool7"), [128, 4, 4, 5]);
    assert_eq!(get("reshape"), [5, 2048]);
    assert_eq!(get("lstm"), [5, 512]);
    assert_eq!(get("flatten"), [2560]);
    assert_eq!(get("output"), [640]);
}

#[test]
fn lipreader_outputs_and_determinism() {
    let cfg = small_cfg();
    let m = LipReader::build(&cfg, 3).unwrap();
    let x = randn(&m.input_shape(2), 4);
    let a = m.predict(&x).unwrap();
    let b = m.predict(&x).unwrap();
    assert_eq!(a.shape(), &[2, 640]);
    assert_eq!(a.data(), b.data());
    assert!(a.data().iter().all(|&v| v > 0.0 && v < 1.0));

    let t1 = m.forward(&x, Mode::Train, 9).unwrap();
    let t2 = m.forward(&x, Mode::Train, 9).unwrap();
    assert_eq!(t1.data(), t2.data());
    assert_ne!(t1.data(), a.data());

    assert!(m.predict(&randn(&[1, 3, 16, 32, 5], 1)).is_err());
}

#[test]
fn lipreader_shape_chain_at_reduced_resolution() {
    let m = LipReader::build(&small_cfg(), 5).unwrap();
    let trace = m.shape_trace(&randn(&m.input_shape(1), 6)).unwrap();
    let pool7 = &trace.iter().find(|(n, _)| n == "pool7").unwrap().1;
    assert_eq!(pool7, &[128, 1, 1, 5]);
    assert_eq!(small_cfg().n_features(), 128);
}

#[test]
fn predictions_decode_to_spectrogram_slices() {
    let cfg = small_cfg();
    let lip = LipReader::build(&cfg, 7).unwrap();
    let ae = Autoencoder::build(&cfg, 8).unwrap();
    let y = lip.predict(&randn(&lip.input_shape(1), 9)).unwrap();
    let codes = y.into_reshaped(&[cfg.la, cfg.bottleneck]).unwrap();
    let spec = ae.decode(&codes).unwrap();
    assert_eq!(spec.shape(), &[20, 128]);
}

#[test]
fn autoencoder_parameter_count_audit() {
    for b in [16, 32, 64] {
        let cfg = NetConfig {
            bottleneck: b,
            ..NetConfig::default()
        };
        let m = Autoencoder::build(&cfg, 1).unwrap();
        let dense = |i: usize, o: usize| i * o + o;
        let norm = |f: usize| 2 * f;
        let expected = dense(128, 512)
            + norm(512)
            + dense(512, 128)
            + norm(128)
            + dense(128, 64)
            + norm(64)
            + dense(64, b)
            + dense(b, 64)
            + norm(64)
            + dense(64, 128);
        assert_eq!(m.store.count(), expected, "B={b}");
    }
}

#[test]
fn autoencoder_codes_are_deterministic_and_bounded() {
    let cfg = NetConfig::default();
    let m = Autoencoder::build(&cfg, 2).unwrap();
    let x = randn(&[8, 128], 3).map(|v| v * 10.0);
    let a = m.encode(&x).unwrap();
    assert_eq!(a.data(), m.encode(&x).unwrap().data());
    let (lo, hi) = a.data().iter().fold((1.0f64, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(lo > 0.0 && hi < 1.0);
    let half = m.decode(&Tensor::full(&[4, 32], 0.5)).unwrap();
    assert!(half.all_finite());
}

#[test]
fn he_init_statistics() {
    let t = he_init(&[100_000], 200, 11).unwrap();
    let n = t.len() as f64;
    let mean = t.sum() / n;
    let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((var - 0.01).abs() < 0.0005, "var {var}");
    assert!(mean.abs() < 3.0 * 0.1 / n.sqrt(), "mean {mean}");
    assert_eq!(he_init(&[10], 3, 5).unwrap(), he_init(&[10], 3, 5).unwrap());
    assert!(he_init(&[10], 0, 5).is_err());
}

#[test]
fn parameter_count_is_a_function_of_config() {
    let cfg = small_cfg();
    let a = LipReader::build(&cfg, 1).unwrap().store.count();
    let b = LipReader::build(&cfg, 2).unwrap().store.count();
    assert_eq!(a, b);
}

#[test]
fn checkpoint_restores_model() {
    let cfg = small_cfg();
    let ae = Autoencoder::build(&cfg, 4).unwrap();
    let ckpt = ae.to_checkpoint();
    let back = Autoencoder::from_checkpoint(&cfg, &ckpt).unwrap();
    let x = randn(&[2, 128], 5);
    let (a, b) = (ae.encode(&x).unwrap(), back.encode(&x).unwrap());
    for (u, v) in a.data().iter().zip(b.data()) {
        assert!((u - v).abs() < 1e-5);
    }
    let other = NetConfig {
        bottleneck: 16,
        ..cfg
    };
    let err = Autoencoder::from_checkpoint(&other, &ckpt).unwrap_err();
    assert!(err.to_string().contains("ae.code"), "{err}");
}
