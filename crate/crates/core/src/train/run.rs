use std::collections::VecDeque;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::Checkpoint;
use crate::preprocess::{FoldRole, ShardManifest, ShardReader, SliceSample};
use crate::rng::stream_rng;
use crate::scalar::Scalar;

use super::batch::make_batch_from_images;
use super::{Trainer, TrainConfig};

pub const LOG_FILE: &str = "train_log.jsonl";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const FINAL_CHECKPOINT: &str = "final.mmck";

const EPOCH_STREAM_BASE: u64 = 1000;

pub fn data_stream(epoch: usize) -> u64 {
    EPOCH_STREAM_BASE + 2 * epoch as u64
}

pub fn scenario_stream(epoch: usize) -> u64 {
    data_stream(epoch) + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub epochs_completed: usize,
    pub steps: u64,
    pub final_checkpoint: PathBuf,
    pub log: PathBuf,
}

pub fn epoch_checkpoint_name(epoch: usize) -> String {
    format!("epoch-{epoch:04}.mmck")
}

fn role_shards(manifest: &ShardManifest, dir: &Path, role: FoldRole) -> Vec<PathBuf> {
    manifest
        .shards_with_role(role)
        .map(|s| manifest.shard_path(dir, s))
        .collect()
}

/// Streams the records of `shards` in a seeded order from a background thread.
///
/// Shard order is permuted, then records pass through a shuffle buffer of
/// `buffer` slots. The channel holds at most `prefetch` records.
pub fn shuffled_records<F: Scalar>(
    shards: Vec<PathBuf>,
    seed: u64,
    stream: u64,
    buffer: usize,
    prefetch: usize,
) -> Receiver<Result<SliceSample<F>>> {
    let (tx, rx) = sync_channel(prefetch.max(1));
    thread::spawn(move || {
        let mut rng = stream_rng(seed, stream);
        let mut order = shards;
        order.shuffle(&mut rng);
        let mut pool: VecDeque<SliceSample<F>> = VecDeque::with_capacity(buffer.max(1));
        for path in order {
            let reader = match ShardReader::<F>::open(&path) {
                Ok(r) => r,
                Err(e) => {
                    let _ = tx.send(Err(e));
                    return;
                }
            };
            for rec in reader {
                match rec {
                    Ok(s) => pool.push_back(s),
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        return;
                    }
                }
                if pool.len() >= buffer.max(1) {
                    let i = rng.gen_range(0..pool.len());
                    let s = pool.swap_remove_back(i).expect("index in range");
                    if tx.send(Ok(s)).is_err() {
                        return;
                    }
                }
            }
        }
        while !pool.is_empty() {
            let i = rng.gen_range(0..pool.len());
            let s = pool.swap_remove_back(i).expect("index in range");
            if tx.send(Ok(s)).is_err() {
                return;
            }
        }
    });
    rx
}

fn load_validation<F: Scalar>(shards: &[PathBuf], cap: usize) -> Result<Vec<SliceSample<F>>> {
    let mut out = Vec::new();
    for path in shards {
        for rec in ShardReader::<F>::open(path)? {
            if cap > 0 && out.len() >= cap {
                return Ok(out);
            }
            out.push(rec?);
        }
    }
    Ok(out)
}

fn write_line(log: &mut impl Write, path: &Path, value: serde_json::Value) -> Result<()> {
    writeln!(log, "{value}")
        .and_then(|_| log.flush())
        .map_err(|e| Error::io(path, e))
}

/// Trains on the manifest's training shards, writing a JSONL log and checkpoints to `out_dir`.
///
/// With `resume`, training continues from a checkpoint written by an earlier
/// run; its configuration replaces `config` except for `total_epochs`.
pub fn train<F: Scalar>(
    config: &TrainConfig,
    manifest_path: &Path,
    out_dir: &Path,
    resume: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let manifest = ShardManifest::read(manifest_path)?;
    let manifest_dir = manifest_path.parent().unwrap_or(Path::new("."));
    if let Some(mode) = config.geometry_mode {
        if mode != manifest.preprocessing.geometry_mode {
            return Err(Error::Config(format!(
                "config geometry mode {mode} differs from the manifest's {}",
                manifest.preprocessing.geometry_mode
            )));
        }
    }
    let train_shards = role_shards(&manifest, manifest_dir, config.train_role);
    let train_records: usize = manifest
        .shards_with_role(config.train_role)
        .map(|s| s.records)
        .sum();
    if train_records == 0 {
        return Err(Error::Config(format!(
            "manifest has no {} records",
            config.train_role
        )));
    }
    let val_shards = role_shards(&manifest, manifest_dir, config.val_role);

    let mut trainer = match resume {
        Some(path) => {
            let mut t = Trainer::<F>::from_checkpoint(&Checkpoint::load(path)?)?;
            t.config.total_epochs = config.total_epochs;
            t.config.validate()?;
            t
        }
        None => Trainer::<F>::new(config.clone())?,
    };
    trainer.manifest = Some(fs::canonicalize(manifest_path).map_err(|e| Error::io(manifest_path, e))?);
    let cfg = trainer.config.clone();
    let schedule = cfg.schedule()?;
    let val_scenarios = cfg.validation_scenarios()?;
    let val_records = load_validation::<F>(&val_shards, cfg.val_max_slices)?;

    let ck_dir = out_dir.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ck_dir).map_err(|e| Error::io(&ck_dir, e))?;
    let log_path = out_dir.join(LOG_FILE);
    let file = if resume.is_some() {
        OpenOptions::new().create(true).append(true).open(&log_path)
    } else {
        File::create(&log_path)
    }
    .map_err(|e| Error::io(&log_path, e))?;
    let mut log = BufWriter::new(file);

    let mut last_checkpoint = None;
    while trainer.epoch < cfg.total_epochs {
        let epoch = trainer.epoch;
        let max_drop = schedule.max_drop(epoch)?;
        let rx = shuffled_records::<F>(
            train_shards.clone(),
            cfg.seed,
            data_stream(epoch),
            cfg.shuffle_buffer,
            cfg.prefetch,
        );
        let mut scen_rng = stream_rng(cfg.seed, scenario_stream(epoch));
        let mut pending = Vec::with_capacity(cfg.batch_size);
        let mut records = rx.into_iter();
        loop {
            pending.clear();
            for rec in records.by_ref().take(cfg.batch_size) {
                pending.push(rec?.channels);
            }
            if pending.is_empty() {
                break;
            }
            let batch =
                make_batch_from_images(std::mem::take(&mut pending), cfg.full_random, max_drop, &mut scen_rng)?;
            let stats = trainer.train_step(&batch)?;
            write_line(
                &mut log,
                &log_path,
                json!({
                    "type": "step",
                    "epoch": epoch,
                    "step": trainer.step,
                    "max_drop": max_drop,
                    "scenarios": batch.scenario_labels(),
                    "d_loss": stats.d_loss,
                    "g_loss": stats.g_loss,
                    "rec_loss": stats.rec_loss,
                    "adv_loss": stats.adv_loss,
                }),
            )?;
            log::debug!("epoch {epoch} step {} g {:.5} d {:.5}", trainer.step, stats.g_loss, stats.d_loss);
        }
        trainer.epoch += 1;

        if !val_records.is_empty() {
            let result = trainer.validate(&val_records, &val_scenarios)?;
            let rows: Vec<_> = val_scenarios
                .iter()
                .map(|m| {
                    let r = &result[m];
                    json!({ "scenario": m.to_bit_string(), "mae": r.mae, "mse": r.mse })
                })
                .collect();
            let mean_mae = rows.iter().filter_map(|r| r["mae"].as_f64()).sum::<f64>() / rows.len() as f64;
            log::info!("epoch {} validation mae {mean_mae:.5}", trainer.epoch);
            write_line(
                &mut log,
                &log_path,
                json!({
                    "type": "validation",
                    "epoch": epoch,
                    "samples": val_records.len(),
                    "mean_mae": mean_mae,
                    "scenarios": rows,
                }),
            )?;
        }

        if trainer.epoch % cfg.checkpoint_every == 0 || trainer.epoch == cfg.total_epochs {
            let path = ck_dir.join(epoch_checkpoint_name(trainer.epoch));
            trainer.to_checkpoint().save(&path)?;
            last_checkpoint = Some(path);
        }
    }

    let final_path = out_dir.join(FINAL_CHECKPOINT);
    match last_checkpoint {
        Some(p) => {
            fs::copy(&p, &final_path).map_err(|e| Error::io(&final_path, e))?;
        }
        None => trainer.to_checkpoint().save(&final_path)?,
    }
    Ok(TrainOutcome {
        epochs_completed: trainer.epoch,
        steps: trainer.step,
        final_checkpoint: final_path,
        log: log_path,
    })
}
