//! Generator, discriminator, implicit-conditioning merge and checkpoints.

mod block;
pub mod checkpoint;
pub mod discriminator;
pub mod generator;
pub mod merge;

pub use checkpoint::Checkpoint;
pub use discriminator::{Discriminator, DiscriminatorSpec, DiscriminatorTape};
pub use generator::{Generator, GeneratorSpec, GeneratorTape};
pub use merge::ic_merge;
