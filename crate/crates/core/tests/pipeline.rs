use std::fs;
use std::path::Path;

use mmsynth::eval::{evaluate_sweep, read_exported, synth_sweep, Aggregation};
use mmsynth::model::Checkpoint;
use mmsynth::preprocess::{preprocess_dataset, FoldRole, GeometryMode, ShardSettings, MANIFEST_FILE};
use mmsynth::synthetic::{write_synthetic_dataset, SyntheticSpec};
use mmsynth::train::{load_generator, train, TrainConfig};
use mmsynth::{enumerate_scenarios, ScenarioMask};

fn tiny_config() -> TrainConfig {
    TrainConfig {
        total_epochs: 2,
        batch_size: 2,
        generator_depth: 3,
        generator_width: 4,
        discriminator_width: 4,
        val_max_slices: 2,
        seed: 4,
        ..TrainConfig::default()
    }
}

fn prepare(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("data");
    write_synthetic_dataset(&data, &SyntheticSpec::new(3, [40, 36, 4], 8)).unwrap();
    let shards = dir.join("shards");
    preprocess_dataset(&data, &ShardSettings::new(3, 7, GeometryMode::Padding), &shards).unwrap();
    shards.join(MANIFEST_FILE)
}

#[test]
fn resume_matches_uninterrupted_training() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = prepare(dir.path());
    let full = dir.path().join("full");
    let outcome = train::<f32>(&tiny_config(), &manifest, &full, None).unwrap();
    assert_eq!(outcome.epochs_completed, 2);

    let resumed = dir.path().join("resumed");
    let mid = full.join("checkpoints").join("epoch-0001.mmck");
    train::<f32>(&tiny_config(), &manifest, &resumed, Some(&mid)).unwrap();
    let a = fs::read(full.join("final.mmck")).unwrap();
    let b = fs::read(resumed.join("final.mmck")).unwrap();
    assert!(a == b, "resumed checkpoint differs");
}

#[test]
fn sweep_passes_present_channels_through_and_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = prepare(dir.path());
    let run = dir.path().join("run");
    let outcome = train::<f32>(&TrainConfig { total_epochs: 1, ..tiny_config() }, &manifest, &run, None).unwrap();
    let generator = load_generator::<f32>(&Checkpoint::load(&outcome.final_checkpoint).unwrap()).unwrap();

    let out = dir.path().join("synth");
    let scenarios = enumerate_scenarios(false);
    let index = synth_sweep(&generator, &manifest, FoldRole::Test, &scenarios, &out).unwrap();
    assert_eq!(index.patients.len(), 1);
    let pid = &index.patients[0].patient_id;
    let truth = read_exported(&out, pid, ScenarioMask::FULL).unwrap();
    for &mask in &scenarios {
        let synth = read_exported(&out, pid, mask).unwrap();
        for m in mask.present() {
            assert_eq!(synth[m.ordinal()], truth[m.ordinal()], "{mask} {}", m.name());
        }
        for m in mask.missing() {
            assert_eq!(synth[m.ordinal()].dims(), truth[m.ordinal()].dims());
            assert_ne!(synth[m.ordinal()], truth[m.ordinal()]);
        }
    }
    let rows = evaluate_sweep(&out, &index, Aggregation::PerSlice).unwrap();
    assert_eq!(rows.len(), 15);
    assert_eq!(rows[14].scenario, "mean");
    for r in &rows {
        assert!(r.mse >= 0.0 && r.ssim <= 1.0 && r.n_samples >= 1);
    }
    let again = evaluate_sweep(&out, &index, Aggregation::PerSlice).unwrap();
    assert_eq!(rows, again);
}
