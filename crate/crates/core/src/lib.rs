//! Missing-modality MRI synthesis and evaluation.
//!
//! A single encoder–decoder generator fills in any subset of the four MRI
//! modalities (T1, T2, T1c, T2f) from the remaining ones. It is trained
//! adversarially with a curriculum over how many modalities are dropped, and
//! with implicit conditioning: present modalities replace the generator's
//! output before the discriminator sees it. Around the model sit BraTS
//! ingest and sharding, a synthesis sweep over all missing-modality
//! scenarios, MSE/PSNR/SSIM and Dice evaluation, and report rendering.
//!
//! Numeric code is generic over [`Scalar`] (`f32` and `f64`); the aliases at
//! the crate root name the common instantiations.

pub mod error;
pub mod eval;
pub mod image;
pub mod model;
pub mod nifti_io;
pub mod nn;
pub mod preprocess;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod scenario;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
pub use image::{BoundingBox, Box2d, Image, Volume};
pub use scalar::Scalar;
pub use scenario::{
    apply_scenario, enumerate_scenarios, sample_scenario, CurriculumSchedule, Modality, ScenarioMask,
};

pub type Image32 = Image<f32>;
pub type Image64 = Image<f64>;
pub type Volume32 = Volume<f32>;
pub type Generator32 = model::Generator<f32>;
pub type Generator64 = model::Generator<f64>;
pub type Discriminator32 = model::Discriminator<f32>;
pub type Discriminator64 = model::Discriminator<f64>;
pub type Trainer32 = train::Trainer<f32>;
pub type Trainer64 = train::Trainer<f64>;
