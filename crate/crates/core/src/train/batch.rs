use rand::Rng;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::preprocess::SliceSample;
use crate::scalar::Scalar;
use crate::scenario::{apply_scenario, sample_scenario, ScenarioMask};

/// Masked inputs, untouched originals and the scenario applied to each sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<F> {
    pub inputs: Vec<Image<F>>,
    pub originals: Vec<Image<F>>,
    pub masks: Vec<ScenarioMask>,
}

impl<F: Scalar> Batch<F> {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Builds a batch from explicit masks.
    pub fn with_masks(originals: Vec<Image<F>>, masks: Vec<ScenarioMask>) -> Result<Self> {
        if originals.len() != masks.len() {
            return Err(Error::Shape(format!(
                "{} samples but {} masks",
                originals.len(),
                masks.len()
            )));
        }
        let inputs = originals
            .iter()
            .zip(&masks)
            .map(|(o, &m)| apply_scenario(o, m))
            .collect::<Result<_>>()?;
        Ok(Self {
            inputs,
            originals,
            masks,
        })
    }

    pub fn scenario_labels(&self) -> Vec<String> {
        self.masks.iter().map(|m| m.to_bit_string()).collect()
    }
}

/// Samples scenarios under the curriculum limit `max_drop` and masks the images.
///
/// With `full_random` every sample draws its own scenario; otherwise one draw
/// is shared by the whole batch.
pub fn make_batch_from_images<F: Scalar, R: Rng + ?Sized>(
    originals: Vec<Image<F>>,
    full_random: bool,
    max_drop: usize,
    rng: &mut R,
) -> Result<Batch<F>> {
    if originals.is_empty() {
        return Err(Error::Contract("cannot build an empty batch".into()));
    }
    let masks = if full_random {
        (0..originals.len())
            .map(|_| sample_scenario(max_drop, rng))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![sample_scenario(max_drop, rng)?; originals.len()]
    };
    Batch::with_masks(originals, masks)
}

pub fn make_batch<F: Scalar, R: Rng + ?Sized>(
    records: &[SliceSample<F>],
    config: &super::TrainConfig,
    epoch: usize,
    rng: &mut R,
) -> Result<Batch<F>> {
    let max_drop = config.schedule()?.max_drop(epoch)?;
    make_batch_from_images(
        records.iter().map(|r| r.channels.clone()).collect(),
        config.full_random,
        max_drop,
        rng,
    )
}
