//! 3-D cross-correlation with zero "same" padding, lowered to GEMM via im2col.
//!
//! Layouts: input (N, C, H, W, T), kernel (F, C, kh, kw, kt), bias (F),
//! output (N, F, H, W, T). Stride is 1 and every kernel extent must be odd.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::tensor::linalg::{gemm, Mat};
use crate::tensor::{Backward, BackwardCtx, Graph, Result, Tensor, TensorError, Var};

/// Upper bound on im2col columns materialized at once.
const CHUNK_COLUMNS: usize = 8192;

#[derive(Clone, Copy)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    t: usize,
    f: usize,
    kh: usize,
    kw: usize,
    kt: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.c * self.kh * self.kw * self.kt
    }

    fn positions(&self) -> usize {
        self.h * self.w * self.t
    }

    /// Output rows [h0, h1) processed per chunk.
    fn row_chunk(&self) -> usize {
        (CHUNK_COLUMNS / (self.w * self.t)).max(1)
    }
}

fn check(x: &[usize], k: &[usize], b: &[usize]) -> Result<Geometry> {
    if x.len() != 5 || k.len() != 5 || b.len() != 1 {
        return Err(TensorError::shape(
            "conv3d_same",
            format!("x {x:?}, kernel {k:?}, bias {b:?}"),
        ));
    }
    if k[1] != x[1] {
        return Err(TensorError::shape(
            "conv3d_same",
            format!("kernel expects {} channels, input has {}", k[1], x[1]),
        ));
    }
    if b[0] != k[0] {
        return Err(TensorError::shape(
            "conv3d_same",
            format!("bias length {} for {} filters", b[0], k[0]),
        ));
    }
    if k[2].is_multiple_of(2) || k[3].is_multiple_of(2) || k[4].is_multiple_of(2) {
        return Err(TensorError::invalid(
            "conv3d_same",
            format!("kernel extents must be odd, got {:?}", &k[2..]),
        ));
    }
    Ok(Geometry {
        c: x[1],
        h: x[2],
        w: x[3],
        t: x[4],
        f: k[0],
        kh: k[2],
        kw: k[3],
        kt: k[4],
    })
}

/// Fills `cols` (rows × (h1-h0)·W·T) with the receptive fields of output rows [h0, h1).
fn im2col(x: &[f64], g: &Geometry, h0: usize, h1: usize, cols: &mut [f64]) {
    let (ph, pw, pt) = (g.kh / 2, g.kw / 2, g.kt / 2);
    let pc = (h1 - h0) * g.w * g.t;
    let mut row = 0;
    for c in 0..g.c {
        let xc = &x[c * g.h * g.w * g.t..(c + 1) * g.h * g.w * g.t];
        for dh in 0..g.kh {
            for dw in 0..g.kw {
                for dt in 0..g.kt {
                    let dst = &mut cols[row * pc..(row + 1) * pc];
                    let mut o = 0;
                    for h in h0..h1 {
                        let sh = h as isize + dh as isize - ph as isize;
                        if sh < 0 || sh >= g.h as isize {
                            dst[o..o + g.w * g.t].fill(0.0);
                            o += g.w * g.t;
                            continue;
                        }
                        for w in 0..g.w {
                            let sw = w as isize + dw as isize - pw as isize;
                            if sw < 0 || sw >= g.w as isize {
                                dst[o..o + g.t].fill(0.0);
                                o += g.t;
                                continue;
                            }
                            let base = (sh as usize * g.w + sw as usize) * g.t;
                            for t in 0..g.t {
                                let st = t as isize + dt as isize - pt as isize;
                                dst[o] = if st < 0 || st >= g.t as isize {
                                    0.0
                                } else {
                                    xc[base + st as usize]
                                };
                                o += 1;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Scatter-adds `cols` back onto the input gradient; adjoint of [`im2col`].
fn col2im(cols: &[f64], g: &Geometry, h0: usize, h1: usize, gx: &mut [f64]) {
    let (ph, pw, pt) = (g.kh / 2, g.kw / 2, g.kt / 2);
    let pc = (h1 - h0) * g.w * g.t;
    let mut row = 0;
    for c in 0..g.c {
        let gc = &mut gx[c * g.h * g.w * g.t..(c + 1) * g.h * g.w * g.t];
        for dh in 0..g.kh {
            for dw in 0..g.kw {
                for dt in 0..g.kt {
                    let src = &cols[row * pc..(row + 1) * pc];
                    let mut o = 0;
                    for h in h0..h1 {
                        let sh = h as isize + dh as isize - ph as isize;
                        if sh < 0 || sh >= g.h as isize {
                            o += g.w * g.t;
                            continue;
                        }
                        for w in 0..g.w {
                            let sw = w as isize + dw as isize - pw as isize;
                            if sw < 0 || sw >= g.w as isize {
                                o += g.t;
                                continue;
                            }
                            let base = (sh as usize * g.w + sw as usize) * g.t;
                            for t in 0..g.t {
                                let st = t as isize + dt as isize - pt as isize;
                                if st >= 0 && st < g.t as isize {
                                    gc[base + st as usize] += src[o];
                                }
                                o += 1;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

fn forward_one(x: &[f64], k: &[f64], b: &[f64], g: &Geometry, out: &mut [f64]) {
    let p = g.positions();
    let j = g.rows();
    for (fi, row) in out.chunks_exact_mut(p).enumerate() {
        row.fill(b[fi]);
    }
    let step = g.row_chunk();
    let mut cols = vec![0.0; j * step * g.w * g.t];
    let mut h0 = 0;
    while h0 < g.h {
        let h1 = (h0 + step).min(g.h);
        let pc = (h1 - h0) * g.w * g.t;
        im2col(x, g, h0, h1, &mut cols[..j * pc]);
        let off = h0 * g.w * g.t;
        gemm(
            Mat::new(k, g.f, j),
            Mat::new(&cols[..j * pc], j, pc),
            &mut out[off..],
            p,
            1.0,
        );
        h0 = h1;
    }
}

/// Returns the kernel-gradient contribution of one sample; writes its input gradient.
fn backward_one(
    x: &[f64],
    k: &[f64],
    grad: &[f64],
    g: &Geometry,
    gx: Option<&mut [f64]>,
    want_k: bool,
) -> Vec<f64> {
    let p = g.positions();
    let j = g.rows();
    let step = g.row_chunk();
    let mut gk = if want_k { vec![0.0; g.f * j] } else { Vec::new() };
    let mut cols = vec![0.0; j * step * g.w * g.t];
    let mut gx = gx;
    let mut h0 = 0;
    while h0 < g.h {
        let h1 = (h0 + step).min(g.h);
        let pc = (h1 - h0) * g.w * g.t;
        let off = h0 * g.w * g.t;
        let g_chunk = Mat::strided(&grad[off..], g.f, pc, p);
        if want_k {
            im2col(x, g, h0, h1, &mut cols[..j * pc]);
            gemm(g_chunk, Mat::new(&cols[..j * pc], j, pc).t(), &mut gk, j, 1.0);
        }
        if let Some(gx) = gx.as_deref_mut() {
            gemm(Mat::new(k, g.f, j).t(), g_chunk, &mut cols[..j * pc], pc, 0.0);
            col2im(&cols[..j * pc], g, h0, h1, gx);
        }
        h0 = h1;
    }
    gk
}

/// Same-padded 3-D convolution without graph bookkeeping.
pub fn conv3d_same_forward(x: &Tensor, k: &Tensor, b: &Tensor) -> Result<Tensor> {
    let g = check(x.shape(), k.shape(), b.shape())?;
    let n = x.shape()[0];
    let in_sz = g.c * g.positions();
    let out_sz = g.f * g.positions();
    let mut out = vec![0.0; n * out_sz];
    let (xd, kd, bd) = (x.data(), k.data(), b.data());
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(out_sz)
        .enumerate()
        .for_each(|(i, o)| forward_one(&xd[i * in_sz..(i + 1) * in_sz], kd, bd, &g, o));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(out_sz)
        .enumerate()
        .for_each(|(i, o)| forward_one(&xd[i * in_sz..(i + 1) * in_sz], kd, bd, &g, o));
    Tensor::new(&[n, g.f, g.h, g.w, g.t], out)
}

struct ConvBack(Geometry);

impl Backward for ConvBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let g = &self.0;
        let (x, k) = (ctx.inputs[0], ctx.inputs[1]);
        let n = x.shape()[0];
        let p = g.positions();
        let in_sz = g.c * p;
        let out_sz = g.f * p;
        let grad = ctx.grad.data();
        let (want_x, want_k) = (ctx.needs[0], ctx.needs[1]);

        let mut gx = vec![0.0; if want_x { x.len() } else { 0 }];
        let run = |i: usize, gxi: Option<&mut [f64]>| {
            backward_one(
                &x.data()[i * in_sz..(i + 1) * in_sz],
                k.data(),
                &grad[i * out_sz..(i + 1) * out_sz],
                g,
                gxi,
                want_k,
            )
        };
        let partials: Vec<Vec<f64>> = if want_x {
            #[cfg(feature = "parallel")]
            let it = gx.par_chunks_mut(in_sz).enumerate();
            #[cfg(not(feature = "parallel"))]
            let it = gx.chunks_mut(in_sz).enumerate();
            it.map(|(i, c)| run(i, Some(c))).collect()
        } else {
            #[cfg(feature = "parallel")]
            let it = (0..n).into_par_iter();
            #[cfg(not(feature = "parallel"))]
            let it = 0..n;
            it.map(|i| run(i, None)).collect()
        };

        let gk = want_k.then(|| {
            let mut acc = vec![0.0; k.len()];
            for part in &partials {
                for (a, v) in acc.iter_mut().zip(part) {
                    *a += v;
                }
            }
            Tensor::new(k.shape(), acc).unwrap()
        });
        let gb = ctx.needs[2].then(|| {
            let mut acc = vec![0.0; g.f];
            for s in grad.chunks_exact(out_sz) {
                for (fi, row) in s.chunks_exact(p).enumerate() {
                    acc[fi] += row.iter().sum::<f64>();
                }
            }
            Tensor::new(&[g.f], acc).unwrap()
        });
        let gx = want_x.then(|| Tensor::new(x.shape(), gx).unwrap());
        vec![gx, gk, gb]
    }
}

impl Graph {
    pub fn conv3d_same(&mut self, x: Var, k: Var, b: Var) -> Result<Var> {
        let g = check(self.shape(x), self.shape(k), self.shape(b))?;
        let v = conv3d_same_forward(self.value(x), self.value(k), self.value(b))?;
        self.apply(v, &[x, k, b], Box::new(ConvBack(g)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct summation over every kernel offset.
    fn naive(x: &Tensor, k: &Tensor, b: &Tensor) -> Tensor {
        let xs = x.shape();
        let ks = k.shape();
        let (n, c, h, w, t) = (xs[0], xs[1], xs[2], xs[3], xs[4]);
        let (f, kh, kw, kt) = (ks[0], ks[2], ks[3], ks[4]);
        let mut out = Tensor::zeros(&[n, f, h, w, t]);
        for ni in 0..n {
            for fi in 0..f {
                for hi in 0..h {
                    for wi in 0..w {
                        for ti in 0..t {
                            let mut acc = b.data()[fi];
                            for ci in 0..c {
                                for a in 0..kh {
                                    for bb in 0..kw {
                                        for cc in 0..kt {
                                            let sh = hi as isize + a as isize - (kh / 2) as isize;
                                            let sw = wi as isize + bb as isize - (kw / 2) as isize;
                                            let st = ti as isize + cc as isize - (kt / 2) as isize;
                                            if sh < 0
                                                || sw < 0
                                                || st < 0
                                                || sh >= h as isize
                                                || sw >= w as isize
                                                || st >= t as isize
                                            {
                                                continue;
                                            }
                                            acc += k.at(&[fi, ci, a, bb, cc])
                                                * x.at(&[ni, ci, sh as usize, sw as usize, st as usize]);
                                        }
                                    }
                                }
                            }
                            out.set(&[ni, fi, hi, wi, ti], acc);
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn all_ones_interior_and_corner() {
        let x = Tensor::ones(&[1, 1, 4, 4, 2]);
        let k = Tensor::ones(&[1, 1, 3, 3, 3]);
        let b = Tensor::zeros(&[1]);
        let y = conv3d_same_forward(&x, &k, &b).unwrap();
        let expect = naive(&x, &k, &b);
        assert_eq!(y, expect);
        assert_eq!(y.at(&[0, 0, 1, 1, 0]), 18.0);
        assert_eq!(y.at(&[0, 0, 0, 0, 0]), 8.0);
    }

    #[test]
    fn matches_direct_summation_with_chunking() {
        // wide enough that the im2col chunking splits rows
        let x = Tensor::from_fn(&[2, 2, 7, 40, 3], |i| ((i * 37 % 101) as f64 / 50.0) - 1.0);
        let k = Tensor::from_fn(&[3, 2, 3, 3, 1], |i| ((i * 13 % 17) as f64 / 8.0) - 1.0);
        let b = Tensor::new(&[3], vec![0.1, -0.2, 0.3]).unwrap();
        let y = conv3d_same_forward(&x, &k, &b).unwrap();
        let expect = naive(&x, &k, &b);
        for (a, e) in y.data().iter().zip(expect.data()) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_even_kernels_and_channel_mismatch() {
        let x = Tensor::zeros(&[1, 2, 4, 4, 3]);
        let b = Tensor::zeros(&[1]);
        assert!(conv3d_same_forward(&x, &Tensor::zeros(&[1, 2, 2, 3, 3]), &b).is_err());
        assert!(conv3d_same_forward(&x, &Tensor::zeros(&[1, 3, 3, 3, 3]), &b).is_err());
    }
}
