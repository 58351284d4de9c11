use crate::tensor::linalg::{gemm, Mat};
use crate::tensor::{Backward, BackwardCtx, Graph, Result, Tensor, TensorError, Var};

struct DenseBack;

impl Backward for DenseBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let (x, w) = (ctx.inputs[0], ctx.inputs[1]);
        let (n, i) = (x.shape()[0], x.shape()[1]);
        let o = w.shape()[1];
        let g = ctx.grad.data();

        let gx = ctx.needs[0].then(|| {
            let mut out = vec![0.0; n * i];
            gemm(Mat::new(g, n, o), Mat::new(w.data(), i, o).t(), &mut out, i, 0.0);
            Tensor::new(&[n, i], out).unwrap()
        });
        let gw = ctx.needs[1].then(|| {
            let mut out = vec![0.0; i * o];
            gemm(Mat::new(x.data(), n, i).t(), Mat::new(g, n, o), &mut out, o, 0.0);
            Tensor::new(&[i, o], out).unwrap()
        });
        let gb = ctx.needs[2].then(|| {
            let mut out = vec![0.0; o];
            for row in g.chunks_exact(o) {
                for (acc, v) in out.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            Tensor::new(&[o], out).unwrap()
        });
        vec![gx, gw, gb]
    }
}

impl Graph {
    /// `y = x·W + b` for x: (N, I), W: (I, O), b: (O).
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 || xs[1] != ws[0] || bs[0] != ws[1] {
            return Err(TensorError::shape(
                "dense",
                format!("x {xs:?}, W {ws:?}, b {bs:?}"),
            ));
        }
        let (n, i, o) = (xs[0], xs[1], ws[1]);
        let mut out = Vec::with_capacity(n * o);
        for _ in 0..n {
            out.extend_from_slice(self.value(b).data());
        }
        gemm(
            Mat::new(self.value(x).data(), n, i),
            Mat::new(self.value(w).data(), i, o),
            &mut out,
            o,
            1.0,
        );
        let v = Tensor::new(&[n, o], out)?;
        self.apply(v, &[x, w, b], Box::new(DenseBack))
    }
}
