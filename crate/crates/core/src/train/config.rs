use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiscriminatorSpec, GeneratorSpec};
use crate::nn::AdamConfig;
use crate::preprocess::{FoldRole, GeometryMode};
use crate::scenario::{parse_scenario_list, CurriculumSchedule, ScenarioMask};

/// Training parameters. Loaded from a flat TOML file; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub total_epochs: usize,
    pub batch_size: usize,
    /// Independent scenario per sample (`true`) or one scenario per batch (`false`).
    pub full_random: bool,
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda_rec: f64,
    pub lambda_adv: f64,
    pub seed: u64,
    pub train_role: FoldRole,
    pub val_role: FoldRole,
    /// When set, must match the manifest's geometry mode.
    pub geometry_mode: Option<GeometryMode>,
    /// Write a checkpoint every this many epochs (the final epoch is always saved).
    pub checkpoint_every: usize,
    /// `all`, `all+full`, or comma-separated scenario strings.
    pub val_scenarios: String,
    /// Cap on validation slices per epoch; 0 uses every validation record.
    pub val_max_slices: usize,
    pub generator_depth: usize,
    pub generator_width: usize,
    pub discriminator_width: usize,
    /// Epochs at which phases 2 and 3 start; defaults to thirds.
    pub phase_boundaries: Option<[usize; 2]>,
    pub shuffle_buffer: usize,
    pub prefetch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            total_epochs: 60,
            batch_size: 8,
            full_random: true,
            lr_g: adam.lr,
            lr_d: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            lambda_rec: 100.0,
            lambda_adv: 1.0,
            seed: 0,
            train_role: FoldRole::Train,
            val_role: FoldRole::Val,
            geometry_mode: None,
            checkpoint_every: 1,
            val_scenarios: "all".into(),
            val_max_slices: 0,
            generator_depth: 5,
            generator_width: 64,
            discriminator_width: 64,
            phase_boundaries: None,
            shuffle_buffer: 256,
            prefetch: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_rec > 0.0) {
            return Err(Error::Config("lambda_rec must be positive".into()));
        }
        if !(self.lambda_adv >= 0.0) {
            return Err(Error::Config("lambda_adv must be nonnegative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every must be at least 1".into()));
        }
        if !(self.lr_g > 0.0 && self.lr_d > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.train_role == self.val_role {
            return Err(Error::Config("train_role and val_role must differ".into()));
        }
        self.schedule()?;
        self.generator_spec().validate()?;
        self.validation_scenarios()?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<CurriculumSchedule> {
        match self.phase_boundaries {
            Some(b) => CurriculumSchedule::with_boundaries(self.total_epochs, b),
            None => CurriculumSchedule::new(self.total_epochs),
        }
    }

    pub fn generator_spec(&self) -> GeneratorSpec {
        GeneratorSpec::tiny(self.generator_depth, self.generator_width)
    }

    pub fn discriminator_spec(&self) -> DiscriminatorSpec {
        DiscriminatorSpec::tiny(self.discriminator_width)
    }

    pub fn adam_g(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr_g,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }

    pub fn adam_d(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr_d,
            ..self.adam_g()
        }
    }

    pub fn validation_scenarios(&self) -> Result<Vec<ScenarioMask>> {
        parse_scenario_list(&self.val_scenarios).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_are_enforced() {
        let ok = TrainConfig::default();
        ok.validate().unwrap();
        for bad in [
            TrainConfig { lambda_rec: 0.0, ..ok.clone() },
            TrainConfig { lambda_adv: -1.0, ..ok.clone() },
            TrainConfig { batch_size: 0, ..ok.clone() },
            TrainConfig { total_epochs: 0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn flat_key_values_parse_and_reject_unknown_keys() {
        let c = TrainConfig::from_toml_str(
            "total_epochs = 4\nfull_random = false # comment\nlr_g = 1e-3\ntrain_role = \"train\"\nphase_boundaries = [1, 2]\n",
        )
        .unwrap();
        assert_eq!(c.total_epochs, 4);
        assert!(!c.full_random);
        assert_eq!(c.lr_g, 1e-3);
        assert_eq!(c.phase_boundaries, Some([1, 2]));
        assert!(TrainConfig::from_toml_str("bogus = 1").is_err());
    }
}
