use std::path::{Path, PathBuf};

use mmsynth::eval::{
    evaluate_backend, evaluate_sweep, read_dice_csv, read_metrics_csv, synth_sweep, write_dice_csv, write_json,
    write_metrics_csv, DiceRecord, MetricsRecord, Region, SynthIndex, SYNTH_INDEX_FILE,
};
use mmsynth::model::Checkpoint;
use mmsynth::preprocess::{preprocess_dataset, FoldRole, GeometryMode, ShardSettings, MANIFEST_FILE};
use mmsynth::report::{published_dice, published_metrics, render_comparison, render_dice_comparison, PUBLISHED_PREFIX};
use mmsynth::scenario::parse_scenario_list;
use mmsynth::train::{load_generator, train as run_training, TrainConfig};
use mmsynth::{Error, ScenarioMask};

use crate::settings::{self, Precision, Resolved};
use crate::{CliResult, EvalDiceArgs, EvalMetricsArgs, PreprocessArgs, ReportArgs, SynthArgs, TrainArgs};

const DEFAULT_SHARDS: usize = 5;
const DEFAULT_SEED: u64 = 0;
const DEFAULT_METHOD: &str = "mmDM";

fn scenarios(spec: &str) -> CliResult<Vec<ScenarioMask>> {
    parse_scenario_list(spec).map_err(|e| Error::Config(format!("--scenarios {spec:?}: {e}")))
}

/// Missing inputs are user errors, not I/O failures.
fn require(path: &Path, flag: &str) -> CliResult {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{flag} {} does not exist", path.display())))
    }
}

pub fn preprocess(config: Option<&Path>, a: &PreprocessArgs) -> CliResult {
    require(&a.root, "--root")?;
    let file: settings::PreprocessFile = settings::read_file(config)?;
    let shards = a.shards.or(file.shards).unwrap_or(DEFAULT_SHARDS);
    if shards == 0 {
        return Err(Error::Config("--shards must be at least 1".into()));
    }
    let seed = a.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let mode = a.mode.or(file.mode).unwrap_or(GeometryMode::Padding);
    let mut s = ShardSettings::new(shards, seed, mode);
    if let Some(n) = a.normalization.or(file.normalization) {
        s.normalization = n;
    }
    s.skip_empty_slices = a.skip_empty_slices || file.skip_empty_slices.unwrap_or(false);
    if let Some(roles) = file.roles {
        if roles.len() != shards {
            return Err(Error::Config(format!("{} roles given for {shards} shards", roles.len())));
        }
        s.roles = roles;
    }
    Resolved::Preprocess {
        root: a.root.clone(),
        out: a.out.clone(),
        settings: s.clone(),
    }
    .write(&a.out)?;
    let manifest = preprocess_dataset(&a.root, &s, &a.out)?;
    log::info!(
        "wrote {} records from {} patients into {} shards ({} excluded)",
        manifest.total_records(),
        manifest.patients.len(),
        manifest.shards.len(),
        manifest.excluded.len()
    );
    Ok(())
}

pub fn train(config: Option<&Path>, a: &TrainArgs) -> CliResult {
    require(&a.manifest, "--manifest")?;
    if let Some(r) = &a.resume {
        require(r, "--resume")?;
    }
    let file = settings::read_train_file(config)?;
    let mut cfg = file.config;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(e) = a.epochs {
        cfg.total_epochs = e;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    let requested = a.precision.or(file.precision);
    let precision = match &a.resume {
        None => requested.unwrap_or_default(),
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            let stored = Precision::of_checkpoint(&ck)?;
            if requested.is_some_and(|p| p != stored) {
                return Err(Error::Config(format!(
                    "checkpoint was trained in {}; cannot resume in another precision",
                    stored.type_name()
                )));
            }
            let mut resumed: TrainConfig = serde_json::from_value(
                ck.meta
                    .get("config")
                    .cloned()
                    .ok_or_else(|| Error::Data("checkpoint meta lacks the training config".into()))?,
            )?;
            if a.epochs.is_some() || file.sets_total_epochs {
                resumed.total_epochs = cfg.total_epochs;
            }
            if resumed.seed != cfg.seed && a.seed.is_some() {
                log::warn!("--seed is ignored on resume; the checkpoint's seed {} is kept", resumed.seed);
            }
            cfg = resumed;
            stored
        }
    };
    cfg.validate()?;
    Resolved::Train {
        manifest: a.manifest.clone(),
        out: a.out.clone(),
        resume: a.resume.clone(),
        precision,
        config: cfg.clone(),
    }
    .write(&a.out)?;
    let outcome = match precision {
        Precision::F32 => run_training::<f32>(&cfg, &a.manifest, &a.out, a.resume.as_deref())?,
        Precision::F64 => run_training::<f64>(&cfg, &a.manifest, &a.out, a.resume.as_deref())?,
    };
    log::info!(
        "trained {} epochs ({} steps); final checkpoint {}",
        outcome.epochs_completed,
        outcome.steps,
        outcome.final_checkpoint.display()
    );
    Ok(())
}

pub fn synth(config: Option<&Path>, a: &SynthArgs) -> CliResult {
    let file: settings::SynthFile = settings::read_file(config)?;
    let fold = a.fold.or(file.fold).unwrap_or(FoldRole::Test);
    let spec = a.scenarios.clone().or(file.scenarios).unwrap_or_else(|| "all".into());
    let list = scenarios(&spec)?;
    require(&a.checkpoint, "--checkpoint")?;
    let ck = Checkpoint::load(&a.checkpoint)?;
    let precision = Precision::of_checkpoint(&ck)?;
    let manifest: PathBuf = match &a.manifest {
        Some(m) => m.clone(),
        None => ck
            .meta
            .get("manifest")
            .cloned()
            .map(serde_json::from_value::<Option<PathBuf>>)
            .transpose()?
            .flatten()
            .ok_or_else(|| Error::Config("checkpoint records no manifest; pass --manifest".into()))?,
    };
    let manifest = if manifest.is_dir() { manifest.join(MANIFEST_FILE) } else { manifest };
    Resolved::Synth {
        checkpoint: a.checkpoint.clone(),
        manifest: manifest.clone(),
        precision,
        fold,
        scenarios: list.clone(),
        out: a.out.clone(),
    }
    .write(&a.out)?;
    let index = match precision {
        Precision::F32 => synth_sweep(&load_generator::<f32>(&ck)?, &manifest, fold, &list, &a.out)?,
        Precision::F64 => synth_sweep(&load_generator::<f64>(&ck)?, &manifest, fold, &list, &a.out)?,
    };
    log::info!("synthesized {} scenarios for {} patients", list.len(), index.patients.len());
    Ok(())
}

fn read_index(dir: &Path) -> CliResult<SynthIndex> {
    require(&dir.join(SYNTH_INDEX_FILE), "--synth")?;
    SynthIndex::read(&dir.join(SYNTH_INDEX_FILE))
}

pub fn eval_metrics(config: Option<&Path>, a: &EvalMetricsArgs) -> CliResult {
    let file: settings::EvalMetricsFile = settings::read_file(config)?;
    let aggregation = a.aggregation.or(file.aggregation).unwrap_or_default();
    let index = read_index(&a.synth)?;
    Resolved::EvalMetrics {
        synth: a.synth.clone(),
        aggregation,
        out: a.out.clone(),
    }
    .write(&a.out)?;
    let rows = evaluate_sweep(&a.synth, &index, aggregation)?;
    write_metrics_csv(&a.out.join("metrics.csv"), &rows)?;
    write_json(&a.out.join("metrics.json"), &rows)?;
    if let Some(mean) = rows.iter().find(|r| r.is_mean()) {
        log::info!("mean mse {:.6} psnr {:.4} ssim {:.4}", mean.mse, mean.psnr, mean.ssim);
    }
    Ok(())
}

pub fn eval_dice(config: Option<&Path>, a: &EvalDiceArgs) -> CliResult {
    let file: settings::EvalDiceFile = settings::read_file(config)?;
    let method = a.method.clone().or(file.method).unwrap_or_else(|| DEFAULT_METHOD.into());
    let spec = a.scenarios.clone().or(file.scenarios).unwrap_or_else(|| "all+full".into());
    let list = scenarios(&spec)?;
    require(&a.labels, "--labels")?;
    let index = read_index(&a.synth)?;
    Resolved::EvalDice {
        synth: a.synth.clone(),
        labels: a.labels.clone(),
        method: method.clone(),
        scenarios: list.clone(),
        out: a.out.clone(),
    }
    .write(&a.out)?;
    let rows = evaluate_backend(&index, &a.labels, &list, &method)?;
    write_dice_csv(&a.out.join("dice.csv"), &rows)?;
    write_json(&a.out.join("dice.json"), &rows)?;
    Ok(())
}

fn load_metrics(source: &str) -> CliResult<Vec<MetricsRecord>> {
    if source.starts_with(PUBLISHED_PREFIX) {
        published_metrics(source)
    } else {
        require(Path::new(source), "--metrics/--baseline")?;
        read_metrics_csv(Path::new(source))
    }
}

fn load_dice(source: &str) -> CliResult<Vec<DiceRecord>> {
    if source.starts_with(PUBLISHED_PREFIX) {
        published_dice(source)
    } else {
        require(Path::new(source), "--dice")?;
        read_dice_csv(Path::new(source))
    }
}

pub fn report(config: Option<&Path>, a: &ReportArgs) -> CliResult {
    let _: settings::ReportFile = settings::read_file(config)?;
    if a.metrics.is_none() && a.dice.is_empty() {
        return Err(Error::Config("nothing to report: pass --metrics/--baseline or --dice".into()));
    }
    Resolved::Report {
        metrics: a.metrics.clone(),
        baseline: a.baseline.clone(),
        dice: a.dice.clone(),
        out: a.out.clone(),
    }
    .write(&a.out)?;
    if let (Some(ours), Some(baseline)) = (&a.metrics, &a.baseline) {
        let comparison = render_comparison(&load_metrics(ours)?, &load_metrics(baseline)?)?;
        let m = comparison.mean();
        log::info!(
            "mean differences (positive = ours better): mse {:.4} psnr {:.4} ssim {:.4}",
            m.mse_diff,
            m.psnr_diff,
            m.ssim_diff
        );
        comparison.write(&a.out)?;
    }
    if !a.dice.is_empty() {
        let mut records = Vec::new();
        for source in &a.dice {
            records.extend(load_dice(source)?);
        }
        let table = render_dice_comparison(&records)?;
        for method in &table.methods {
            let avgs = Region::ALL
                .iter()
                .map(|&r| table.average(method, r).map(|v| format!("{} {v:.2}", r.name())))
                .collect::<CliResult<Vec<_>>>()?;
            log::info!("{method} avg: {}", avgs.join(", "));
        }
        table.write(&a.out)?;
    }
    Ok(())
}
