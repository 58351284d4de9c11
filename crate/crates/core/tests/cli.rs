use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use liplab::audspec::{read_auds, read_wav, write_wav, Waveform};
use liplab::datapipe::{render, synth_pair, write_vfrm};
use liplab::rng;
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

fn liplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liplab"))
        .args(args)
        .env("LIPLAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = liplab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn fails(args: &[&str], code: i32) -> String {
    let out = liplab(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_wave(path: &Path, w: &Waveform) {
    write_wav(BufWriter::new(File::create(path).unwrap()), w).unwrap();
}

fn dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().into(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn synth_writes_reproducible_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let v = ok(&["synth", "--out", s(d), "--count", "5", "--seed", "9", "--duration", "0.4"]);
        assert_eq!(v["samples"], 5);
    }
    let files = dir_bytes(&a);
    assert_eq!(files.len(), 11);
    assert_eq!(files, dir_bytes(&b));
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let msg = fails(&["synth", "--out", s(&out), "--count", "0"], 2);
    assert!(msg.to_lowercase().contains("usage"), "{msg}");
    fails(&["synth", "--out", s(&out), "--count", "2", "--bogus"], 2);
    fails(&["synth", "--out", s(&out), "--count", "2", "--duration", "0.3"], 2);
    fails(&["predict", "--frames", "f", "--lip", "l", "--out", "o.wav"], 2);
    fails(&["audspec", "encode", "a.wav", "b.auds", "--fac", "-3"], 2);
    fails(&["frobnicate"], 2);
}

#[test]
fn audspec_encode_decode() {
    let tmp = tempfile::tempdir().unwrap();
    let (wav, auds, back) = (tmp.path().join("v.wav"), tmp.path().join("v.auds"), tmp.path().join("back.wav"));
    let (_, audio) = synth_pair(3, 3.0).unwrap();
    write_wave(&wav, &audio);
    let v = ok(&["audspec", "encode", s(&wav), s(&auds)]);
    assert_eq!(v["frames"], 300);
    assert_eq!(read_auds(File::open(&auds).unwrap()).unwrap().n_frames(), 300);

    let vowel = render(1, &[2; 5]).unwrap().audio;
    write_wave(&wav, &vowel);
    ok(&["audspec", "encode", s(&wav), s(&auds), "--fac", "-2", "--shft", "-1"]);
    let out = liplab(&["audspec", "decode", s(&auds), s(&back), "--iters", "50", "--seed", "7"]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let reported: f64 = stderr
        .split("Corr2D ")
        .nth(1)
        .and_then(|t| t.split_whitespace().next())
        .and_then(|t| t.parse().ok())
        .unwrap_or_else(|| panic!("no Corr2D on stderr: {stderr}"));
    assert!(reported >= 0.9, "{reported}");
    let w = read_wav(File::open(&back).unwrap()).unwrap();
    assert_eq!((w.sample_rate, w.samples.len()), (8000, vowel.samples.len()));

    fs::write(&wav, b"not a wave file at all").unwrap();
    let msg = fails(&["audspec", "encode", s(&wav), s(&auds)], 1);
    assert!(msg.contains("magic") && msg.contains("byte 0"), "{msg}");
    fails(&["audspec", "decode", s(&wav), s(&back)], 1);
    fails(&["audspec", "encode", s(&tmp.path().join("none.wav")), s(&auds)], 1);
}

const AE_CONFIG: &str = r#"{"epochs": 3, "batch_size": 64, "lr": 0.001}"#;
const LIP_CONFIG: &str = r#"{"epochs": 2, "batch_size": 8, "lr": 0.001,
    "net": {"h": 32, "w": 32, "lstm_units": 8, "mlp_hidden": 8}}"#;

#[test]
fn train_predict_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n);
    let data = p("data");
    ok(&["synth", "--out", s(&data), "--count", "6", "--seed", "2", "--duration", "3.0"]);
    fs::write(p("ae.json"), AE_CONFIG).unwrap();
    fs::write(p("lip.json"), LIP_CONFIG).unwrap();

    let v = ok(&["train", "ae", "--data", s(&data), "--config", s(&p("ae.json")), "--out", s(&p("ae.ckpt"))]);
    assert!(v["final_val_loss"].is_number() || v["final_val_loss"].is_null());
    let history = fs::read_to_string(p("ae.ckpt.history.csv")).unwrap();
    assert_eq!(history.lines().count(), 4);
    ok(&["train", "ae", "--data", s(&data), "--config", s(&p("ae.json")), "--out", s(&p("ae2.ckpt"))]);
    assert_eq!(fs::read(p("ae.ckpt")).unwrap(), fs::read(p("ae2.ckpt")).unwrap());
    assert_eq!(history, fs::read_to_string(p("ae2.ckpt.history.csv")).unwrap());

    fs::write(p("bad.json"), r#"{"net": {"bottleneck": 16}}"#).unwrap();
    let msg = fails(
        &["train", "lip", "--data", s(&data), "--config", s(&p("bad.json")), "--ae", s(&p("ae.ckpt")), "--out", s(&p("x.ckpt"))],
        1,
    );
    assert!(msg.contains("bottleneck"), "{msg}");
    fs::write(p("typo.json"), r#"{"epochz": 3}"#).unwrap();
    let msg = fails(&["train", "ae", "--data", s(&data), "--config", s(&p("typo.json")), "--out", s(&p("x.ckpt"))], 1);
    assert!(msg.contains("epochz"), "{msg}");

    let (lip_cfg, ae_ckpt) = (p("lip.json"), p("ae.ckpt"));
    let lip_args = ["train", "lip", "--data", s(&data), "--config", s(&lip_cfg), "--ae", s(&ae_ckpt)];
    ok(&[&lip_args[..], &["--out", s(&p("lip.ckpt"))]].concat());
    ok(&[&lip_args[..], &["--out", s(&p("lip2.ckpt"))]].concat());
    assert_eq!(fs::read(p("lip.ckpt")).unwrap(), fs::read(p("lip2.ckpt")).unwrap());
    assert_eq!(
        fs::read(p("lip.ckpt.history.csv")).unwrap(),
        fs::read(p("lip2.ckpt.history.csv")).unwrap()
    );

    let (frames, _) = synth_pair(77, 3.0).unwrap();
    assert_eq!(frames.n_frames, 75);
    write_vfrm(BufWriter::new(File::create(p("in.vfrm")).unwrap()), &frames).unwrap();
    let predict = |out: &str, auds: &str| {
        ok(&[
            "predict", "--frames", s(&p("in.vfrm")), "--lip", s(&p("lip.ckpt")), "--ae", s(&p("ae.ckpt")),
            "--out", s(&p(out)), "--auds", s(&p(auds)), "--iters", "5",
        ])
    };
    let v = predict("out.wav", "out.auds");
    assert_eq!(v["spectrogram_frames"], 300);
    assert_eq!(read_auds(File::open(p("out.auds")).unwrap()).unwrap().n_frames(), 300);
    let w = read_wav(File::open(p("out.wav")).unwrap()).unwrap();
    assert_eq!((w.sample_rate, w.samples.len()), (8000, 24000));
    predict("out2.wav", "out2.auds");
    assert_eq!(fs::read(p("out.wav")).unwrap(), fs::read(p("out2.wav")).unwrap());

    let msg = fails(
        &["predict", "--frames", s(&p("in.vfrm")), "--lip", s(&p("ae.ckpt")), "--ae", s(&p("ae.ckpt")), "--out", s(&p("o.wav"))],
        1,
    );
    assert!(!msg.is_empty());
}

fn noisy(w: &Waveform, sd: f64, seed: u64) -> Waveform {
    let mut r = rng::rng(seed);
    let samples = w.samples.iter().map(|x| x + sd * r.sample::<f64, _>(StandardNormal)).collect();
    Waveform::new(samples, w.sample_rate).unwrap()
}

#[test]
fn eval_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let (rdir, tdir, ndir) = (tmp.path().join("ref"), tmp.path().join("test"), tmp.path().join("noisy"));
    for d in [&rdir, &tdir, &ndir] {
        fs::create_dir(d).unwrap();
    }
    for i in 0..3u64 {
        let (_, audio) = synth_pair(40 + i, 1.0).unwrap();
        let name = format!("u{i}.wav");
        write_wave(&rdir.join(&name), &audio);
        write_wave(&tdir.join(&name), &audio);
        write_wave(&ndir.join(&name), &noisy(&audio, 0.05, i));
    }
    let report = tmp.path().join("self.json");
    ok(&["eval", "--ref", s(&rdir), "--test", s(&tdir), "--out", s(&report)]);
    let r: Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["per_sample"].as_array().unwrap().len(), 3);
    assert!((r["mean"]["corr2d"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((r["mean"]["stmi"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(r["mean"]["lsd_db"].as_f64().unwrap().abs() < 1e-12);

    let nreport = tmp.path().join("noisy.json");
    ok(&["eval", "--ref", s(&rdir), "--test", s(&ndir), "--out", s(&nreport)]);
    let n: Value = serde_json::from_slice(&fs::read(&nreport).unwrap()).unwrap();
    assert!(n["mean"]["corr2d"].as_f64().unwrap() < 1.0);
    assert!(n["mean"]["stmi"].as_f64().unwrap() < 1.0);
    assert!(n["mean"]["lsd_db"].as_f64().unwrap() > 0.0);

    let again = tmp.path().join("again.json");
    ok(&["eval", "--ref", s(&rdir), "--test", s(&ndir), "--out", s(&again)]);
    assert_eq!(fs::read(&nreport).unwrap(), fs::read(&again).unwrap());

    fs::remove_file(tdir.join("u1.wav")).unwrap();
    let msg = fails(&["eval", "--ref", s(&rdir), "--test", s(&tdir), "--out", s(&report)], 1);
    assert!(msg.contains("u1") && !msg.contains("u0"), "{msg}");
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    fails(&["eval", "--ref", s(&empty), "--test", s(&tdir), "--out", s(&report)], 1);
}
