//! Minimal neural-network building blocks: parameters, layers, optimizer.

pub mod layers;
pub mod optim;
pub mod params;

pub use optim::{Adam, AdamConfig};
pub use params::{Grads, ParamId, ParamSet};
