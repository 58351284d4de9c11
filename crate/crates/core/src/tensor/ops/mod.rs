//! Graph operations. Each submodule adds methods to [`Graph`](super::Graph).

mod activation;
mod conv;
mod dense;
mod elementwise;
mod lstm;
mod norm;
mod pool;
mod stochastic;

pub use conv::conv3d_same_forward;
pub use lstm::LstmParams;
pub use norm::{BatchNormOutput, BatchStats, BN_EPSILON, BN_MOMENTUM};
pub use pool::maxpool3d_forward;

/// Default negative slope of LeakyReLU.
pub const LEAKY_SLOPE: f64 = 0.01;
