use crate::tensor::{Backward, BackwardCtx, Graph, Result, Tensor, Var};

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn elu(x: f64, alpha: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        alpha * x.exp_m1()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct LeakyBack(f64);
impl Backward for LeakyBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let g = ctx
            .grad
            .zip_map(ctx.inputs[0], |g, x| if x >= 0.0 { g } else { g * self.0 })
            .unwrap();
        vec![Some(g)]
    }
}

struct EluBack(f64);
impl Backward for EluBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        // for x < 0, d/dx alpha(e^x - 1) = y + alpha
        let d = ctx
            .inputs[0]
            .zip_map(ctx.output, |x, y| if x >= 0.0 { 1.0 } else { y + self.0 })
            .unwrap();
        vec![Some(ctx.grad.zip_map(&d, |g, d| g * d).unwrap())]
    }
}

struct SigmoidBack;
impl Backward for SigmoidBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let g = ctx.grad.zip_map(ctx.output, |g, y| g * y * (1.0 - y)).unwrap();
        vec![Some(g)]
    }
}

struct TanhBack;
impl Backward for TanhBack {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>> {
        let g = ctx.grad.zip_map(ctx.output, |g, y| g * (1.0 - y * y)).unwrap();
        vec![Some(g)]
    }
}

impl Graph {
    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        let v = self.value(x).map(|v| leaky_relu(v, slope));
        self.apply(v, &[x], Box::new(LeakyBack(slope)))
    }

    pub fn elu(&mut self, x: Var, alpha: f64) -> Result<Var> {
        let v = self.value(x).map(|v| elu(v, alpha));
        self.apply(v, &[x], Box::new(EluBack(alpha)))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(sigmoid);
        self.apply(v, &[x], Box::new(SigmoidBack))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(f64::tanh);
        self.apply(v, &[x], Box::new(TanhBack))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ops::LEAKY_SLOPE;

    #[test]
    fn definitions() {
        assert_eq!(leaky_relu(-1.0, LEAKY_SLOPE), -0.01);
        assert_eq!(leaky_relu(2.0, LEAKY_SLOPE), 2.0);
        assert_eq!(elu(0.0, 1.0), 0.0);
        assert!((elu(-50.0, 1.0) + 1.0).abs() < 1e-15);
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
