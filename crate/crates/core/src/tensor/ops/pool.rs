use crate::tensor::{Backward, BackwardCtx, Graph, Result, Tensor, TensorError, Var};

fn check(shape: &[usize], window: [usize; 3]) -> Result<[usize; 5]> {
    if shape.len() != 5 {
        return Err(TensorError::shape(
            "maxpool3d",
            format!("expected (N, C, H, W, T), got {shape:?}"),
        ));
    }
    if window.contains(&0) {
        return Err(TensorError::invalid("maxpool3d", "zero window extent"));
    }
    for (d, w) in shape[2..].iter().zip(window) {
        if d % w != 0 {
            return Err(TensorError::shape(
                "maxpool3d",
                format!("dims {:?} not divisible by window {window:?}", &shape[2..]),
            ));
        }
    }
    Ok([shape[0], shape[1], shape[2], shape[3], shape[4]])
}

/// Returns pooled values and, for each output, the flat input index of its
/// maximum (first in scan order on ties).
fn pool(x: &Tensor, window: [usize; 3]) -> Result<(Tensor, Vec<usize>)> {
    let [n, c, h, w, t] = check(x.shape(), window)?;
    let [ph, pw, pt] = window;
    let (oh, ow, ot) = (h / ph, w / pw, t / pt);
    let xd = x.data();
    let mut out = Vec::with_capacity(n * c * oh * ow * ot);
    let mut arg = Vec::with_capacity(out.capacity());
    for plane in 0..n * c {
        let base = plane * h * w * t;
        for i in 0..oh {
            for j in 0..ow {
                for k in 0..ot {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for a in 0..ph {
                        for b in 0..pw {
                            for d in 0..pt {
                                let idx = base + ((i * ph + a) * w + j * pw + b) * t + k * pt + d;
                                if xd[idx] > best {
                                    best = xd[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                    }
                    out.push(best);
                    arg.push(best_idx);
                }
            }
        }
    }
    Ok((Tensor::new(&[n, c, oh, ow, ot], out)?, arg))
}

pub fn maxpool3d_forward(x: &Tensor, window: [usize; 3]) -> Result<Tensor> {
    pool(x, window).map(|(v, _)| v)
}

struct PoolBack(Vec<usize>);

impl Backward for PoolBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let mut gx = Tensor::zeros(ctx.inputs[0].shape());
        let d = gx.data_mut();
        for (&idx, &g) in self.0.iter().zip(ctx.grad.data()) {
            d[idx] += g;
        }
        vec![Some(gx)]
    }
}

impl Graph {
    /// Max pooling over (H, W, T) windows with stride equal to the window.
    pub fn maxpool3d(&mut self, x: Var, window: [usize; 3]) -> Result<Var> {
        let (v, arg) = pool(self.value(x), window)?;
        self.apply(v, &[x], Box::new(PoolBack(arg)))
    }
}
