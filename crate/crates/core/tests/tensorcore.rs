use liplab::rng;
use liplab::tensor::gradcheck::{grad_check, grad_check_inputs};
use liplab::tensor::ops::{maxpool3d_forward, LstmParams};
use liplab::tensor::{Graph, Mode, Tensor, Var};
use rand::Rng;
use rand_distr::StandardNormal;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn randn(shape: &[usize], seed: u64, scale: f64) -> Tensor {
    let mut r = rng::rng(seed);
    Tensor::from_fn(shape, |_| scale * r.sample::<f64, _>(StandardNormal))
}

/// Weighted sum so that every output coordinate carries a distinct gradient.
fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> liplab::tensor::Result<Var> {
    let w = g.constant(randn(g.shape(y), seed ^ 0xABCD, 1.0));
    let p = g.mul(y, w)?;
    g.sum(p)
}

#[test]
fn dense_matches_triple_loop() {
    let x = randn(&[4, 7], 1, 1.0);
    let w = randn(&[7, 5], 2, 1.0);
    let b = randn(&[5], 3, 1.0);
    let mut g = Graph::new();
    let (xv, wv, bv) = (g.constant(x.clone()), g.constant(w.clone()), g.constant(b.clone()));
    let y = g.dense(xv, wv, bv).unwrap();
    for n in 0..4 {
        for o in 0..5 {
            let mut acc = b.data()[o];
            for i in 0..7 {
                acc += x.at(&[n, i]) * w.at(&[i, o]);
            }
            assert!((g.value(y).at(&[n, o]) - acc).abs() < 1e-6);
        }
    }
}

#[test]
fn dense_gradients() {
    for seed in 0..20 {
        let inputs = [randn(&[3, 6], seed, 1.0), randn(&[6, 4], seed + 100, 1.0), randn(&[4], seed + 200, 1.0)];
        let err = grad_check_inputs(
            |g, v| {
                let y = g.dense(v[0], v[1], v[2])?;
                weighted_sum(g, y, seed)
            },
            &inputs,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "seed {seed}: {err}");
    }
}

#[test]
fn conv3d_gradients() {
    for seed in 0..20 {
        let inputs = [
            randn(&[2, 2, 4, 3, 3], seed, 1.0),
            randn(&[3, 2, 3, 3, 3], seed + 1, 0.5),
            randn(&[3], seed + 2, 1.0),
        ];
        let err = grad_check_inputs(
            |g, v| {
                let y = g.conv3d_same(v[0], v[1], v[2])?;
                weighted_sum(g, y, seed)
            },
            &inputs,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "seed {seed}: {err}");
    }
}

#[test]
fn maxpool_matches_window_scan_and_gradients() {
    let x = randn(&[2, 3, 4, 6, 2], 11, 1.0);
    let y = maxpool3d_forward(&x, [2, 2, 1]).unwrap();
    assert_eq!(y.shape(), &[2, 3, 2, 3, 2]);
    for n in 0..2 {
        for c in 0..3 {
            for i in 0..2 {
                for j in 0..3 {
                    for t in 0..2 {
                        let mut m = f64::NEG_INFINITY;
                        for a in 0..2 {
                            for b in 0..2 {
                                m = m.max(x.at(&[n, c, 2 * i + a, 2 * j + b, t]));
                            }
                        }
                        assert_eq!(y.at(&[n, c, i, j, t]), m);
                    }
                }
            }
        }
    }
    for seed in 0..20 {
        let x = randn(&[1, 2, 4, 4, 2], seed, 1.0);
        let err = grad_check(
            |g, v| {
                let y = g.maxpool3d(v, [2, 2, 1])?;
                weighted_sum(g, y, seed)
            },
            &x,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "seed {seed}: {err}");
    }
}

fn lstm_inputs(seed: u64, n: usize, t: usize, i: usize, u: usize) -> [Tensor; 4] {
    [
        randn(&[n, t, i], seed, 1.0),
        randn(&[i, 4 * u], seed + 1, 0.4),
        randn(&[u, 4 * u], seed + 2, 0.4),
        randn(&[4 * u], seed + 3, 0.4),
    ]
}

#[test]
fn lstm_zero_everything_gives_zero() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::zeros(&[2, 3, 4]));
    let p = LstmParams {
        w_ih: g.constant(Tensor::zeros(&[4, 20])),
        w_hh: g.constant(Tensor::zeros(&[5, 20])),
        bias: g.constant(Tensor::zeros(&[20])),
    };
    let h = g.lstm_seq(x, p).unwrap();
    assert_eq!(g.shape(h), &[2, 3, 5]);
    assert!(g.value(h).data().iter().all(|&v| v == 0.0));
}

#[test]
fn lstm_single_step_matches_scalar_oracle() {
    let (i_dim, u) = (3, 4);
    let [x, w_ih, w_hh, b] = lstm_inputs(5, 1, 1, i_dim, u);
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let p = LstmParams {
        w_ih: g.constant(w_ih.clone()),
        w_hh: g.constant(w_hh),
        bias: g.constant(b.clone()),
    };
    let h = g.lstm_seq(xv, p).unwrap();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    for k in 0..u {
        let pre = |gate: usize| {
            let col = gate * u + k;
            let mut acc = b.data()[col];
            for j in 0..i_dim {
                acc += x.data()[j] * w_ih.at(&[j, col]);
            }
            acc
        };
        let ig = sig(pre(0));
        let cg = pre(2).tanh();
        let og = sig(pre(3));
        let c = ig * cg; // c_prev = 0, forget gate irrelevant
        let expect = og * c.tanh();
        assert!((g.value(h).data()[k] - expect).abs() < 1e-6);
    }
}

#[test]
fn lstm_gradients() {
    for seed in 0..20 {
        let inputs = lstm_inputs(seed * 10, 2, 3, 3, 4);
        let err = grad_check_inputs(
            |g, v| {
                let h = g.lstm_seq(
                    v[0],
                    LstmParams {
                        w_ih: v[1],
                        w_hh: v[2],
                        bias: v[3],
                    },
                )?;
                g.sum(h)
            },
            &inputs,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "seed {seed}: {err}");
    }
}

#[test]
fn batchnorm_gradients_both_modes() {
    for seed in 0..20 {
        let inputs = [randn(&[4, 3, 2], seed, 1.0), randn(&[3], seed + 1, 1.0), randn(&[3], seed + 2, 1.0)];
        let rm = randn(&[3], seed + 3, 0.1);
        let rv = randn(&[3], seed + 4, 0.1).map(|v| 1.0 + v.abs());
        for mode in [Mode::Train, Mode::Infer] {
            let err = grad_check_inputs(
                |g, v| {
                    let o = g.batchnorm(v[0], v[1], v[2], &rm, &rv, mode)?;
                    weighted_sum(g, o.out, seed)
                },
                &inputs,
                EPS,
            )
            .unwrap();
            assert!(err < TOL, "seed {seed} {mode:?}: {err}");
        }
    }
}

#[test]
fn activation_gradients() {
    for seed in 0..20 {
        let x = randn(&[30], seed, 2.0);
        for which in 0..4 {
            let err = grad_check(
                |g, v| {
                    let y = match which {
                        0 => g.leaky_relu(v, 0.01)?,
                        1 => g.elu(v, 1.0)?,
                        2 => g.sigmoid(v)?,
                        _ => g.tanh(v)?,
                    };
                    weighted_sum(g, y, seed)
                },
                &x,
                EPS,
            )
            .unwrap();
            assert!(err < TOL, "seed {seed} act {which}: {err}");
        }
    }
}

#[test]
fn stochastic_layer_gradients() {
    for seed in 0..20 {
        let x = randn(&[40], seed, 1.0);
        let err = grad_check(
            |g, v| {
                let y = g.dropout(v, 0.3, Mode::Train, seed)?;
                let y = g.gaussian_noise(y, 0.1, Mode::Train, seed + 1)?;
                weighted_sum(g, y, seed)
            },
            &x,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "seed {seed}: {err}");
    }
}

#[test]
fn composed_stack_gradients() {
    // conv -> pool -> time-major -> lstm -> reshape -> dense -> sigmoid
    for seed in 0..5 {
        let inputs = [
            randn(&[2, 1, 4, 4, 3], seed, 1.0),
            randn(&[2, 1, 3, 3, 3], seed + 1, 0.5),
            randn(&[2], seed + 2, 0.1),
            randn(&[8, 12], seed + 3, 0.3),
            randn(&[3, 12], seed + 4, 0.3),
            randn(&[12], seed + 5, 0.1),
            randn(&[9, 4], seed + 6, 0.3),
            randn(&[4], seed + 7, 0.1),
        ];
        let err = grad_check_inputs(
            |g, v| {
                let y = g.conv3d_same(v[0], v[1], v[2])?;
                let y = g.leaky_relu(y, 0.01)?;
                let y = g.maxpool3d(y, [2, 2, 1])?;
                let y = g.time_major(y)?;
                let h = g.lstm_seq(
                    y,
                    LstmParams {
                        w_ih: v[3],
                        w_hh: v[4],
                        bias: v[5],
                    },
                )?;
                let h = g.elu(h, 1.0)?;
                let f = g.reshape(h, &[2, 9])?;
                let o = g.dense(f, v[6], v[7])?;
                let o = g.sigmoid(o)?;
                weighted_sum(g, o, seed)
            },
            &inputs,
            EPS,
        )
        .unwrap();
        assert!(err < TOL, "seed {seed}: {err}");
    }
}

#[test]
fn stochastic_layers_are_reproducible() {
    let x = randn(&[100], 1, 1.0);
    let run = || {
        let mut g = Graph::new();
        let v = g.constant(x.clone());
        let y = g.dropout(v, 0.25, Mode::Train, 77).unwrap();
        let y = g.gaussian_noise(y, 0.05, Mode::Train, 78).unwrap();
        g.value(y).clone()
    };
    assert_eq!(run(), run());
}
