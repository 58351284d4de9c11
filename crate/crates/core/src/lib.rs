pub mod audspec;
pub mod cli;
pub mod datapipe;
pub mod metrics;
pub mod nets;
pub mod rng;
pub mod stats;
pub mod tensor;
pub mod training;
