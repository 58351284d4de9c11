use crate::tensor::{Backward, BackwardCtx, Graph, Result, Tensor, TensorError, Var};

struct AddBack;
impl Backward for AddBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        vec![Some(ctx.grad.clone()), Some(ctx.grad.clone())]
    }
}

struct SubBack;
impl Backward for SubBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        vec![Some(ctx.grad.clone()), Some(ctx.grad.map(|g| -g))]
    }
}

struct MulBack;
impl Backward for MulBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let (a, b) = (ctx.inputs[0], ctx.inputs[1]);
        let ga = ctx.needs[0].then(|| ctx.grad.zip_map(b, |g, y| g * y).unwrap());
        let gb = ctx.needs[1].then(|| ctx.grad.zip_map(a, |g, x| g * x).unwrap());
        vec![ga, gb]
    }
}

struct ScaleBack(f64);
impl Backward for ScaleBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        vec![Some(ctx.grad.map(|g| g * self.0))]
    }
}

struct SumBack;
impl Backward for SumBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let g = ctx.grad.item();
        vec![Some(Tensor::full(ctx.inputs[0].shape(), g))]
    }
}

struct SumSquaresBack;
impl Backward for SumSquaresBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let g = ctx.grad.item();
        vec![Some(ctx.inputs[0].map(|x| 2.0 * x * g))]
    }
}

struct ReshapeBack;
impl Backward for ReshapeBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        vec![Some(ctx.grad.reshape(ctx.inputs[0].shape()).unwrap())]
    }
}

/// (N, C, H, W, T) -> (N, T, C·H·W).
fn to_time_major(x: &Tensor) -> Tensor {
    let s = x.shape();
    let (n, c, h, w, t) = (s[0], s[1], s[2], s[3], s[4]);
    let f = c * h * w;
    let mut out = vec![0.0; x.len()];
    let xd = x.data();
    for b in 0..n {
        for fi in 0..f {
            let src = (b * f + fi) * t;
            for ti in 0..t {
                out[(b * t + ti) * f + fi] = xd[src + ti];
            }
        }
    }
    Tensor::new(&[n, t, f], out).unwrap()
}

struct TimeMajorBack;
impl Backward for TimeMajorBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let s = ctx.inputs[0].shape();
        let (n, t) = (s[0], s[4]);
        let f = s[1] * s[2] * s[3];
        let gd = ctx.grad.data();
        let mut out = vec![0.0; gd.len()];
        for b in 0..n {
            for ti in 0..t {
                for fi in 0..f {
                    out[(b * f + fi) * t + ti] = gd[(b * t + ti) * f + fi];
                }
            }
        }
        vec![Some(Tensor::new(s, out).unwrap())]
    }
}

impl Graph {
    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        self.apply(v, &[a, b], Box::new(AddBack))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        self.apply(v, &[a, b], Box::new(SubBack))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        self.apply(v, &[a, b], Box::new(MulBack))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x * factor);
        self.apply(v, &[a], Box::new(ScaleBack(factor)))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let v = Tensor::scalar(self.value(a).sum());
        self.apply(v, &[a], Box::new(SumBack))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len() as f64;
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n)
    }

    pub fn sum_squares(&mut self, a: Var) -> Result<Var> {
        let v = Tensor::scalar(self.value(a).data().iter().map(|x| x * x).sum());
        self.apply(v, &[a], Box::new(SumSquaresBack))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let v = self
            .value(a)
            .reshape(shape)
            .map_err(|_| TensorError::shape("reshape", format!("{:?} -> {shape:?}", self.shape(a))))?;
        self.apply(v, &[a], Box::new(ReshapeBack))
    }

    /// Moves the trailing time axis of an (N, C, H, W, T) tensor forward and
    /// flattens the rest: (N, T, C·H·W).
    pub fn time_major(&mut self, a: Var) -> Result<Var> {
        if self.shape(a).len() != 5 {
            return Err(TensorError::shape(
                "time_major",
                format!("expected 5-D input, got {:?}", self.shape(a)),
            ));
        }
        let v = to_time_major(self.value(a));
        self.apply(v, &[a], Box::new(TimeMajorBack))
    }
}
