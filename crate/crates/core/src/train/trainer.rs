use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::model::{ic_merge, Checkpoint, Discriminator, DiscriminatorSpec, Generator, GeneratorSpec};
use crate::nn::{Adam, AdamConfig, Grads, ParamSet};
use crate::preprocess::SliceSample;
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::scenario::ScenarioMask;

use super::batch::Batch;
use super::loss::{
    missing_pixel_count, reconstruction_grad_into, squared_error_grad, squared_error_sum,
};
use super::TrainConfig;

pub(crate) const GENERATOR_INIT_STREAM: u64 = 10;
pub(crate) const DISCRIMINATOR_INIT_STREAM: u64 = 11;
const CHECKPOINT_KIND: &str = "mmsynth-trainer";

/// Losses of one optimization step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub d_loss: f64,
    pub g_loss: f64,
    pub rec_loss: f64,
    pub adv_loss: f64,
}

/// Per-scenario validation errors on the canvas, over missing channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioValidation {
    pub mae: f64,
    pub mse: f64,
    pub samples: usize,
}

/// Generator, discriminator and both optimizers, plus the training position.
#[derive(Debug, Clone)]
pub struct Trainer<F> {
    pub config: TrainConfig,
    pub generator: Generator<F>,
    pub discriminator: Discriminator<F>,
    pub opt_g: Adam<F>,
    pub opt_d: Adam<F>,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed optimization steps.
    pub step: u64,
    /// Manifest the trainer was fitted on, when known.
    pub manifest: Option<PathBuf>,
}

/// Runs `f` for every index, at most one rayon wave at a time, and sums the
/// gradients in index order so results do not depend on scheduling.
fn summed_grads<F, T, G>(n: usize, zero: impl Fn() -> Grads<F>, f: G) -> Result<(Grads<F>, Vec<T>)>
where
    F: Scalar,
    T: Send,
    G: Fn(usize) -> Result<(Grads<F>, T)> + Sync,
{
    let wave = rayon::current_num_threads().max(1);
    let mut acc = zero();
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let end = (start + wave).min(n);
        let parts: Vec<_> = (start..end).into_par_iter().map(&f).collect::<Result<_>>()?;
        for (g, t) in parts {
            acc.add_assign(&g);
            out.push(t);
        }
        start = end;
    }
    Ok((acc, out))
}

impl<F: Scalar> Trainer<F> {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let generator = Generator::new(
            config.generator_spec(),
            &mut stream_rng(config.seed, GENERATOR_INIT_STREAM),
        )?;
        let discriminator = Discriminator::new(
            config.discriminator_spec(),
            &mut stream_rng(config.seed, DISCRIMINATOR_INIT_STREAM),
        )?;
        let opt_g = Adam::new(config.adam_g(), generator.params());
        let opt_d = Adam::new(config.adam_d(), discriminator.params());
        Ok(Self {
            config,
            generator,
            discriminator,
            opt_g,
            opt_d,
            epoch: 0,
            step: 0,
            manifest: None,
        })
    }

    fn check_finite(&self, value: f64, what: &str, batch: &Batch<F>) -> Result<()> {
        if value.is_finite() {
            return Ok(());
        }
        Err(Error::NonFinite {
            step: self.step,
            scenarios: batch.scenario_labels().join(","),
            detail: format!("{what} = {value}"),
        })
    }

    /// The image the discriminator judges as fake for sample `i`: generator output merged with the original.
    pub fn fake_input(&self, batch: &Batch<F>, i: usize) -> Result<Image<F>> {
        let out = self.generator.forward(&batch.inputs[i])?;
        ic_merge(&out, &batch.originals[i], batch.masks[i])
    }

    /// Discriminator objective and its parameter gradients, generated images held fixed.
    pub fn discriminator_gradients(&self, batch: &Batch<F>) -> Result<(f64, Grads<F>)> {
        if batch.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let (_, h, w) = batch.originals[0].shape();
        let (gh, gw) = self.discriminator.spec().grid_shape(h, w);
        let scale = 0.5 / (batch.len() * gh * gw) as f64;
        let this = self;
        let (grads, sums) = summed_grads(
            batch.len(),
            || this.discriminator.params().zero_grads(),
            |i| {
                let d = &this.discriminator;
                let mut grads = d.params().zero_grads();
                let (real, tape) = d.forward_tape(&batch.originals[i])?;
                d.backward(&tape, &squared_error_grad(&real, 1.0, scale), Some(&mut grads), false);
                let real_sum = squared_error_sum(&real, 1.0);
                drop(tape);
                let (fake, tape) = d.forward_tape(&this.fake_input(batch, i)?)?;
                d.backward(&tape, &squared_error_grad(&fake, 0.0, scale), Some(&mut grads), false);
                Ok((grads, real_sum + squared_error_sum(&fake, 0.0)))
            },
        )?;
        Ok((scale * sums.iter().sum::<f64>(), grads))
    }

    /// One update of the discriminator with generated images held fixed.
    pub fn discriminator_step(&mut self, batch: &Batch<F>) -> Result<f64> {
        let (loss, grads) = self.discriminator_gradients(batch)?;
        self.check_finite(loss, "discriminator loss", batch)?;
        self.opt_d.update(self.discriminator.params_mut(), &grads);
        Ok(loss)
    }

    /// Generator objective `(total, reconstruction, adversarial)` and the
    /// gradients of the total with respect to generator parameters.
    pub fn generator_gradients(&self, batch: &Batch<F>) -> Result<((f64, f64, f64), Grads<F>)> {
        if batch.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let (_, h, w) = batch.originals[0].shape();
        let (gh, gw) = self.discriminator.spec().grid_shape(h, w);
        let count = missing_pixel_count(&batch.originals, &batch.masks);
        let lambda_rec = self.config.lambda_rec;
        let lambda_adv = self.config.lambda_adv;
        let adv_scale = lambda_adv / (batch.len() * gh * gw) as f64;
        let rec_scale = if count == 0 { 0.0 } else { lambda_rec / count as f64 };
        let this = self;
        let (grads, sums) = summed_grads(
            batch.len(),
            || this.generator.params().zero_grads(),
            |i| {
                let (g, d) = (&this.generator, &this.discriminator);
                let (orig, mask) = (&batch.originals[i], batch.masks[i]);
                let (out, gtape) = g.forward_tape(&batch.inputs[i])?;
                let merged = ic_merge(&out, orig, mask)?;
                let (scores, dtape) = d.forward_tape(&merged)?;
                let adv_sum = squared_error_sum(&scores, 1.0);
                let mut grad_out = d
                    .backward(&dtape, &squared_error_grad(&scores, 1.0, adv_scale), None, true)
                    .expect("input gradient");
                drop(dtape);
                // present channels are copied from the original, so they carry no gradient
                for m in mask.present() {
                    grad_out.channel_mut(m.ordinal()).fill(F::zero());
                }
                reconstruction_grad_into(&out, orig, mask, F::of(rec_scale), &mut grad_out);
                let mut rec_sum = 0.0;
                for m in mask.missing() {
                    let c = m.ordinal();
                    rec_sum += out
                        .channel(c)
                        .iter()
                        .zip(orig.channel(c))
                        .map(|(&a, &b)| (a - b).abs().as_f64())
                        .sum::<f64>();
                }
                let mut grads = g.params().zero_grads();
                g.backward(&gtape, &grad_out, &mut grads);
                Ok((grads, (rec_sum, adv_sum)))
            },
        )?;
        let rec = if count == 0 {
            0.0
        } else {
            sums.iter().map(|s| s.0).sum::<f64>() / count as f64
        };
        let adv = sums.iter().map(|s| s.1).sum::<f64>() / (batch.len() * gh * gw) as f64;
        Ok(((lambda_rec * rec + lambda_adv * adv, rec, adv), grads))
    }

    /// One update of the generator against the current discriminator.
    ///
    /// Returns `(total, reconstruction, adversarial)` generator losses.
    pub fn generator_step(&mut self, batch: &Batch<F>) -> Result<(f64, f64, f64)> {
        let (losses, grads) = self.generator_gradients(batch)?;
        self.check_finite(losses.0, "generator loss", batch)?;
        self.opt_g.update(self.generator.params_mut(), &grads);
        Ok(losses)
    }

    /// Discriminator update followed by generator update on the same batch.
    pub fn train_step(&mut self, batch: &Batch<F>) -> Result<StepStats> {
        let d_loss = self.discriminator_step(batch)?;
        let (g_loss, rec_loss, adv_loss) = self.generator_step(batch)?;
        self.step += 1;
        Ok(StepStats {
            d_loss,
            g_loss,
            rec_loss,
            adv_loss,
        })
    }

    /// Synthesis error of every scenario over `records`, on the canvas.
    pub fn validate(
        &self,
        records: &[SliceSample<F>],
        scenarios: &[ScenarioMask],
    ) -> Result<BTreeMap<ScenarioMask, ScenarioValidation>> {
        let mut out = BTreeMap::new();
        for &mask in scenarios {
            let parts = records
                .par_iter()
                .map(|r| {
                    let input = crate::scenario::apply_scenario(&r.channels, mask)?;
                    let pred = if mask.missing_count() == 0 {
                        input
                    } else {
                        self.generator.generate(&input, mask)?
                    };
                    let (mut abs, mut sq, mut n) = (0.0, 0.0, 0usize);
                    for m in mask.missing() {
                        let c = m.ordinal();
                        for (&a, &b) in pred.channel(c).iter().zip(r.channels.channel(c)) {
                            let d = (a - b).as_f64();
                            abs += d.abs();
                            sq += d * d;
                            n += 1;
                        }
                    }
                    Ok((abs, sq, n))
                })
                .collect::<Result<Vec<_>>>()?;
            let n: usize = parts.iter().map(|p| p.2).sum();
            let denom = n.max(1) as f64;
            out.insert(
                mask,
                ScenarioValidation {
                    mae: parts.iter().map(|p| p.0).sum::<f64>() / denom,
                    mse: parts.iter().map(|p| p.1).sum::<f64>() / denom,
                    samples: records.len(),
                },
            );
        }
        Ok(out)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let opt_meta = |o: &Adam<F>| json!({ "step": o.step, "config": o.config });
        let mut ck = Checkpoint {
            meta: json!({
                "kind": CHECKPOINT_KIND,
                "scalar": std::any::type_name::<F>(),
                "generator": self.generator.spec(),
                "discriminator": self.discriminator.spec(),
                "config": self.config,
                "epoch": self.epoch,
                "step": self.step,
                "opt_g": opt_meta(&self.opt_g),
                "opt_d": opt_meta(&self.opt_d),
                "manifest": self.manifest,
            }),
            tensors: Vec::new(),
        };
        let (gp, dp) = (self.generator.params(), self.discriminator.params());
        ck.push_params("generator", gp);
        ck.push_params("discriminator", dp);
        ck.push_buffers("opt_g.m", gp, &self.opt_g.first_moment);
        ck.push_buffers("opt_g.v", gp, &self.opt_g.second_moment);
        ck.push_buffers("opt_d.m", dp, &self.opt_d.first_moment);
        ck.push_buffers("opt_d.v", dp, &self.opt_d.second_moment);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.meta.get("kind").and_then(|k| k.as_str()) != Some(CHECKPOINT_KIND) {
            return Err(Error::Data("checkpoint is not a trainer checkpoint".into()));
        }
        let field = |k: &str| {
            ck.meta
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Data(format!("checkpoint meta lacks {k:?}")))
        };
        let config: TrainConfig = serde_json::from_value(field("config")?)?;
        let mut trainer = Self::new(config)?;
        let gspec: GeneratorSpec = serde_json::from_value(field("generator")?)?;
        let dspec: DiscriminatorSpec = serde_json::from_value(field("discriminator")?)?;
        if &gspec != trainer.generator.spec() || &dspec != trainer.discriminator.spec() {
            return Err(Error::Data("checkpoint specs disagree with its config".into()));
        }
        trainer.generator.params_mut().load(&ck.group("generator"))?;
        trainer.discriminator.params_mut().load(&ck.group("discriminator"))?;
        restore_adam(&mut trainer.opt_g, ck, "opt_g", field("opt_g")?, trainer.generator.params())?;
        restore_adam(
            &mut trainer.opt_d,
            ck,
            "opt_d",
            field("opt_d")?,
            trainer.discriminator.params(),
        )?;
        trainer.epoch = serde_json::from_value(field("epoch")?)?;
        trainer.step = serde_json::from_value(field("step")?)?;
        trainer.manifest = serde_json::from_value(field("manifest")?)?;
        Ok(trainer)
    }
}

fn restore_adam<F: Scalar>(
    opt: &mut Adam<F>,
    ck: &Checkpoint,
    prefix: &str,
    meta: serde_json::Value,
    params: &ParamSet<F>,
) -> Result<()> {
    #[derive(Deserialize)]
    struct Meta {
        step: u64,
        config: AdamConfig,
    }
    let m: Meta = serde_json::from_value(meta)?;
    let load = |suffix: &str| -> Result<Vec<Vec<F>>> {
        let mut p = params.clone();
        p.load(&ck.group(&format!("{prefix}.{suffix}")))?;
        Ok(p.values().to_vec())
    };
    opt.step = m.step;
    opt.config = m.config;
    opt.first_moment = load("m")?;
    opt.second_moment = load("v")?;
    Ok(())
}

/// Loads only the generator from a trainer checkpoint.
pub fn load_generator<F: Scalar>(ck: &Checkpoint) -> Result<Generator<F>> {
    let spec: GeneratorSpec = serde_json::from_value(
        ck.meta
            .get("generator")
            .cloned()
            .ok_or_else(|| Error::Data("checkpoint meta lacks generator spec".into()))?,
    )?;
    let mut g = Generator::new(spec, &mut stream_rng(0, GENERATOR_INIT_STREAM))?;
    g.params_mut().load(&ck.group("generator"))?;
    Ok(g)
}
