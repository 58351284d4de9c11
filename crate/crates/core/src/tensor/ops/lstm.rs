//! Single-layer LSTM over a whole sequence, fused into one graph node.
//!
//! Gate layout along the 4U axis is `[input, forget, candidate, output]`.
//! Returns the full hidden sequence (N, T, U); the initial state is zero.

use super::activation::sigmoid;
use crate::tensor::linalg::{gemm, Mat};
use crate::tensor::{Backward, BackwardCtx, Graph, Result, Tensor, TensorError, Var};

/// Graph handles of an LSTM's weights: `w_ih` (I, 4U), `w_hh` (U, 4U), `bias` (4U).
#[derive(Debug, Clone, Copy)]
pub struct LstmParams {
    pub w_ih: Var,
    pub w_hh: Var,
    pub bias: Var,
}

struct LstmBack {
    n: usize,
    t: usize,
    i: usize,
    u: usize,
    /// Activated gates, (T, N, 4U).
    gates: Vec<f64>,
    /// Cell states, (T, N, U).
    cells: Vec<f64>,
}

impl Backward for LstmBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let (n, tl, i_dim, u) = (self.n, self.t, self.i, self.u);
        let g4 = 4 * u;
        let x = ctx.inputs[0].data();
        let w_ih = ctx.inputs[1].data();
        let w_hh = ctx.inputs[2].data();
        let h = ctx.output.data();
        let grad = ctx.grad.data();

        let mut gx = vec![0.0; if ctx.needs[0] { x.len() } else { 0 }];
        let mut gw_ih = vec![0.0; i_dim * g4];
        let mut gw_hh = vec![0.0; u * g4];
        let mut gb = vec![0.0; g4];
        let mut dh_next = vec![0.0; n * u];
        let mut dc_next = vec![0.0; n * u];
        let mut dgates = vec![0.0; n * g4];

        for t in (0..tl).rev() {
            let acts = &self.gates[t * n * g4..(t + 1) * n * g4];
            let cells = &self.cells[t * n * u..(t + 1) * n * u];
            for b in 0..n {
                let a = &acts[b * g4..(b + 1) * g4];
                let d = &mut dgates[b * g4..(b + 1) * g4];
                for k in 0..u {
                    let (ig, fg, cg, og) = (a[k], a[u + k], a[2 * u + k], a[3 * u + k]);
                    let c = cells[b * u + k];
                    let c_prev = if t > 0 {
                        self.cells[((t - 1) * n + b) * u + k]
                    } else {
                        0.0
                    };
                    let tc = c.tanh();
                    let dh = grad[(b * tl + t) * u + k] + dh_next[b * u + k];
                    let dc = dh * og * (1.0 - tc * tc) + dc_next[b * u + k];
                    d[k] = dc * cg * ig * (1.0 - ig);
                    d[u + k] = dc * c_prev * fg * (1.0 - fg);
                    d[2 * u + k] = dc * ig * (1.0 - cg * cg);
                    d[3 * u + k] = dh * tc * og * (1.0 - og);
                    dc_next[b * u + k] = dc * fg;
                }
            }
            let dg = Mat::new(&dgates, n, g4);
            gemm(
                Mat::strided(&x[t * i_dim..], n, i_dim, tl * i_dim).t(),
                dg,
                &mut gw_ih,
                g4,
                1.0,
            );
            if t > 0 {
                gemm(
                    Mat::strided(&h[(t - 1) * u..], n, u, tl * u).t(),
                    dg,
                    &mut gw_hh,
                    g4,
                    1.0,
                );
            }
            for row in dgates.chunks_exact(g4) {
                for (acc, v) in gb.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            if ctx.needs[0] {
                gemm(
                    dg,
                    Mat::new(w_ih, i_dim, g4).t(),
                    &mut gx[t * i_dim..],
                    tl * i_dim,
                    0.0,
                );
            }
            gemm(dg, Mat::new(w_hh, u, g4).t(), &mut dh_next, u, 0.0);
        }

        vec![
            ctx.needs[0].then(|| Tensor::new(ctx.inputs[0].shape(), gx).unwrap()),
            ctx.needs[1].then(|| Tensor::new(&[i_dim, g4], gw_ih).unwrap()),
            ctx.needs[2].then(|| Tensor::new(&[u, g4], gw_hh).unwrap()),
            ctx.needs[3].then(|| Tensor::new(&[g4], gb).unwrap()),
        ]
    }
}

impl Graph {
    pub fn lstm_seq(&mut self, x: Var, p: LstmParams) -> Result<Var> {
        let (xs, wi, wh, bs) = (
            self.shape(x),
            self.shape(p.w_ih),
            self.shape(p.w_hh),
            self.shape(p.bias),
        );
        let ok = xs.len() == 3
            && wi.len() == 2
            && wh.len() == 2
            && bs.len() == 1
            && wi[0] == xs[2]
            && wi[1] % 4 == 0
            && wh[0] * 4 == wi[1]
            && wh[1] == wi[1]
            && bs[0] == wi[1];
        if !ok {
            return Err(TensorError::shape(
                "lstm_seq",
                format!("x {xs:?}, w_ih {wi:?}, w_hh {wh:?}, bias {bs:?}"),
            ));
        }
        let (n, tl, i_dim, u) = (xs[0], xs[1], xs[2], wh[0]);
        let g4 = 4 * u;
        let x_d = self.value(x).data();
        let w_ih = self.value(p.w_ih).data();
        let w_hh = self.value(p.w_hh).data();
        let bias = self.value(p.bias).data();

        let mut h = vec![0.0; n * tl * u];
        let mut gates = vec![0.0; tl * n * g4];
        let mut cells = vec![0.0; tl * n * u];
        for t in 0..tl {
            let pre = &mut gates[t * n * g4..(t + 1) * n * g4];
            for row in pre.chunks_exact_mut(g4) {
                row.copy_from_slice(bias);
            }
            gemm(
                Mat::strided(&x_d[t * i_dim..], n, i_dim, tl * i_dim),
                Mat::new(w_ih, i_dim, g4),
                pre,
                g4,
                1.0,
            );
            if t > 0 {
                gemm(
                    Mat::strided(&h[(t - 1) * u..], n, u, tl * u),
                    Mat::new(w_hh, u, g4),
                    pre,
                    g4,
                    1.0,
                );
            }
            for b in 0..n {
                let a = &mut pre[b * g4..(b + 1) * g4];
                for k in 0..u {
                    a[k] = sigmoid(a[k]);
                    a[u + k] = sigmoid(a[u + k]);
                    a[2 * u + k] = a[2 * u + k].tanh();
                    a[3 * u + k] = sigmoid(a[3 * u + k]);
                    let c_prev = if t > 0 {
                        cells[((t - 1) * n + b) * u + k]
                    } else {
                        0.0
                    };
                    let c = a[u + k] * c_prev + a[k] * a[2 * u + k];
                    cells[(t * n + b) * u + k] = c;
                    h[(b * tl + t) * u + k] = a[3 * u + k] * c.tanh();
                }
            }
        }
        let v = Tensor::new(&[n, tl, u], h)?;
        let back = LstmBack {
            n,
            t: tl,
            i: i_dim,
            u,
            gates,
            cells,
        };
        self.apply(v, &[x, p.w_ih, p.w_hh, p.bias], Box::new(back))
    }
}
