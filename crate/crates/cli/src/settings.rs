use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use mmsynth::eval::Aggregation;
use mmsynth::model::Checkpoint;
use mmsynth::preprocess::{FoldRole, GeometryMode, NormalizationMode};
use mmsynth::train::TrainConfig;
use mmsynth::{Error, Result};

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";

/// clap value parser for serde string enums (`padding`, `per-modality`, `f64`, ...).
pub fn parse_serde<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn type_name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }

    /// Scalar type recorded in a trainer checkpoint.
    pub fn of_checkpoint(ck: &Checkpoint) -> Result<Self> {
        match ck.meta.get("scalar").and_then(|v| v.as_str()) {
            Some("f32") => Ok(Precision::F32),
            Some("f64") => Ok(Precision::F64),
            Some(other) => Err(Error::Data(format!("checkpoint scalar type {other:?} is not supported"))),
            None => Err(Error::Data("checkpoint meta lacks the scalar type".into())),
        }
    }
}

fn read_toml(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn from_table<T: DeserializeOwned>(path: &Path, table: toml::Table) -> Result<T> {
    table
        .try_into()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Reads a subcommand's config file, or its defaults when none was given.
pub fn read_file<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => from_table(p, read_toml(p)?),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessFile {
    pub shards: Option<usize>,
    pub seed: Option<u64>,
    pub mode: Option<GeometryMode>,
    pub normalization: Option<NormalizationMode>,
    pub skip_empty_slices: Option<bool>,
    /// One role per shard; defaults to train…train, val, test.
    pub roles: Option<Vec<FoldRole>>,
}

/// Training keys are those of [`TrainConfig`] plus `precision`.
#[derive(Debug, Default)]
pub struct TrainFile {
    pub config: TrainConfig,
    pub precision: Option<Precision>,
    pub sets_total_epochs: bool,
}

pub fn read_train_file(path: Option<&Path>) -> Result<TrainFile> {
    let Some(p) = path else {
        return Ok(TrainFile::default());
    };
    let mut table = read_toml(p)?;
    let precision = match table.remove("precision") {
        Some(v) => Some(
            v.try_into()
                .map_err(|e| Error::Config(format!("{}: precision: {e}", p.display())))?,
        ),
        None => None,
    };
    let sets_total_epochs = table.contains_key("total_epochs");
    Ok(TrainFile {
        config: from_table(p, table)?,
        precision,
        sets_total_epochs,
    })
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFile {
    pub fold: Option<FoldRole>,
    pub scenarios: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalMetricsFile {
    pub aggregation: Option<Aggregation>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalDiceFile {
    pub method: Option<String>,
    pub scenarios: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {}

#[derive(Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Resolved {
    Preprocess {
        root: PathBuf,
        out: PathBuf,
        settings: mmsynth::preprocess::ShardSettings,
    },
    Train {
        manifest: PathBuf,
        out: PathBuf,
        resume: Option<PathBuf>,
        precision: Precision,
        config: TrainConfig,
    },
    Synth {
        checkpoint: PathBuf,
        manifest: PathBuf,
        precision: Precision,
        fold: FoldRole,
        scenarios: Vec<mmsynth::ScenarioMask>,
        out: PathBuf,
    },
    EvalMetrics {
        synth: PathBuf,
        aggregation: Aggregation,
        out: PathBuf,
    },
    EvalDice {
        synth: PathBuf,
        labels: PathBuf,
        method: String,
        scenarios: Vec<mmsynth::ScenarioMask>,
        out: PathBuf,
    },
    Report {
        metrics: Option<String>,
        baseline: Option<String>,
        dice: Vec<String>,
        out: PathBuf,
    },
}

impl Resolved {
    /// Creates `out_dir` and writes the resolved settings into it.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        mmsynth::eval::write_json(&out_dir.join(RESOLVED_CONFIG_FILE), self)
    }
}
