use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mmsynth::eval::{label_file_name, read_dice_csv, SynthIndex, SYNTH_INDEX_FILE};
use mmsynth::synthetic::{write_synthetic_dataset, SyntheticSpec};
use mmsynth::ScenarioMask;
use serde_json::Value;

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mmsynth"));
    cmd.args(args).env("RUST_LOG", "warn").env_remove("MMSYNTH_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn resolved(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("resolved_config.json")).unwrap()).unwrap()
}

fn dataset(dir: &Path) -> PathBuf {
    let root = dir.join("data");
    write_synthetic_dataset(&root, &SyntheticSpec::new(3, [40, 36, 4], 8)).unwrap();
    root
}

#[test]
fn help_documents_every_flag() {
    let cases: [(&str, &[&str]); 6] = [
        ("preprocess", &["--root", "--out", "--shards", "--seed", "--mode", "--normalization", "--skip-empty-slices"]),
        ("train", &["--manifest", "--out", "--resume", "--seed", "--epochs", "--batch-size", "--precision"]),
        ("synth", &["--checkpoint", "--manifest", "--fold", "--scenarios", "--out"]),
        ("eval-metrics", &["--synth", "--aggregation", "--out"]),
        ("eval-dice", &["--synth", "--labels", "--method", "--scenarios", "--out"]),
        ("report", &["--metrics", "--baseline", "--dice", "--out"]),
    ];
    for (sub, flags) in cases {
        let out = run(&[sub, "--help"], &[]);
        assert_eq!(out.status.code(), Some(0));
        let text = String::from_utf8_lossy(&out.stdout);
        for f in flags.iter().chain(&["--config"]) {
            assert!(text.contains(f), "{sub} --help lacks {f}");
        }
    }
}

#[test]
fn usage_errors_exit_2_with_one_line() {
    for args in [
        vec!["frobnicate"],
        vec!["preprocess", "--root", "x", "--out", "y", "--bogus"],
        vec!["preprocess", "--root", "x", "--out", "y", "--mode", "diagonal"],
        vec!["synth", "--out", "y"],
        vec!["report", "--metrics", "a.csv", "--out", "y"],
    ] {
        let out = run(&args, &[]);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = stderr(&out);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("error[usage]: "), "{err}");
    }
}

#[test]
fn validation_errors_exit_1_with_category() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = s(&dir.path().join("out"));
    let missing = s(&dir.path().join("missing"));
    let out = run(&["preprocess", "--root", &missing, "--out", &out_dir], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[config]: "));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "learning_rate = 0.1\n").unwrap();
    let manifest = s(&dir.path().join("manifest.json"));
    fs::write(&manifest, "{}").unwrap();
    let out = run(&["--config", &s(&cfg), "train", "--manifest", &manifest, "--out", &out_dir], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("learning_rate"), "{}", stderr(&out));

    let out = run(&["report", "--dice", "published:acn", "--out", &out_dir], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[data]: "), "{}", stderr(&out));

    let out = run(&["report", "--out", &out_dir], &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn report_renders_published_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let args = [
        "report",
        "--metrics",
        "published:ours",
        "--baseline",
        "published:org",
        "--dice",
        "published:acn",
        "--dice",
        "published:mmdm",
        "--out",
        &s(&out),
    ];
    let o = run(&args, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["comparison.csv", "differences.csv", "difference_psnr.svg", "dice_comparison.csv", "dice_et.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let cmp = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let mean = cmp.lines().find(|l| l.starts_with("mean,")).unwrap();
    assert!(mean.contains("-0.1953"), "{mean}");
    let r = resolved(&out);
    assert_eq!(r["command"], "report");
    assert_eq!(r["dice"][1], "published:mmdm");
}

#[test]
fn seed_resolution_prefers_flag_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    let root = s(&dataset(dir.path()));
    let cfg = dir.path().join("pre.toml");
    fs::write(&cfg, "seed = 3\nshards = 3\nmode = \"crop\"\n").unwrap();
    let cfg = s(&cfg);
    let seed_of = |name: &str, extra: &[&str], envs: &[(&str, &str)], config: bool| {
        let out = dir.path().join(name);
        let mut args: Vec<&str> = Vec::new();
        if config {
            args.extend(["--config", &cfg]);
        }
        let out_s = s(&out);
        args.extend(["preprocess", "--root", &root, "--out", &out_s]);
        args.extend(extra);
        let o = run(&args, envs);
        assert!(o.status.success(), "{}", stderr(&o));
        let r = resolved(&out);
        (r["settings"]["seed"].as_u64().unwrap(), r["settings"]["geometry_mode"].as_str().unwrap().to_string())
    };
    let env = [("MMSYNTH_SEED", "5")];
    assert_eq!(seed_of("a", &["--seed", "7"], &env, true), (7, "crop".into()));
    assert_eq!(seed_of("b", &[], &env, true), (5, "crop".into()));
    assert_eq!(seed_of("c", &[], &[], true), (3, "crop".into()));
    assert_eq!(seed_of("d", &["--mode", "padding"], &[], true), (3, "padding".into()));
    assert_eq!(seed_of("e", &["--shards", "3"], &[], false), (0, "padding".into()));
    let shards = fs::read_dir(dir.path().join("e")).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".mms")
    });
    assert_eq!(shards.count(), 3);
}

#[test]
fn synthesis_and_dice_round_trip_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let root = s(&dataset(dir.path()));
    let p = |n: &str| s(&dir.path().join(n));
    let ok = |args: &[&str]| {
        let o = run(args, &[]);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    };
    ok(&["preprocess", "--root", &root, "--shards", "3", "--seed", "2", "--out", &p("shards")]);
    let cfg = dir.path().join("train.toml");
    fs::write(&cfg, "generator_depth = 3\ngenerator_width = 4\ndiscriminator_width = 4\nbatch_size = 2\nprecision = \"f64\"\n")
        .unwrap();
    let manifest = s(&dir.path().join("shards").join("manifest.json"));
    ok(&["--config", &s(&cfg), "train", "--manifest", &manifest, "--epochs", "1", "--out", &p("run")]);
    assert_eq!(resolved(&dir.path().join("run"))["precision"], "f64");

    let ck = s(&dir.path().join("run").join("final.mmck"));
    ok(&["synth", "--checkpoint", &ck, "--scenarios", "0111,1110", "--out", &p("synth")]);
    let index = SynthIndex::read(&dir.path().join("synth").join(SYNTH_INDEX_FILE)).unwrap();
    assert_eq!(index.patients.len(), 1);
    assert_eq!(resolved(&dir.path().join("synth"))["precision"], "f64");

    let labels = dir.path().join("labels");
    fs::create_dir_all(&labels).unwrap();
    let masks: Vec<ScenarioMask> = ["0111", "1110", "1111"].iter().map(|m| m.parse().unwrap()).collect();
    for pt in &index.patients {
        for &m in &masks {
            fs::copy(pt.label_path.as_ref().unwrap(), labels.join(label_file_name(&pt.patient_id, m))).unwrap();
        }
    }
    let dice_args = |method: &'static str, out: String| {
        let synth = p("synth");
        let labels = s(&labels);
        ok(&[
            "eval-dice", "--synth", &synth, "--labels", &labels, "--scenarios", "0111,1110,1111", "--method", method,
            "--out", &out,
        ]);
    };
    dice_args("oracle", p("dice-a"));
    dice_args("copy", p("dice-b"));
    let rows = read_dice_csv(&dir.path().join("dice-a").join("dice.csv")).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.values(), [100.0; 3], "{}", r.scenario);
    }
    let a = s(&dir.path().join("dice-a").join("dice.csv"));
    let b = s(&dir.path().join("dice-b").join("dice.csv"));
    ok(&["report", "--dice", &a, "--dice", &b, "--out", &p("report")]);
    assert!(dir.path().join("report").join("dice_comparison.csv").is_file());

    fs::remove_file(labels.join(label_file_name(&index.patients[0].patient_id, masks[0]))).unwrap();
    let o = run(
        &["eval-dice", "--synth", &p("synth"), "--labels", &s(&labels), "--scenarios", "0111", "--out", &p("dice-c")],
        &[],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
