use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::canvas::GeometryMode;
use super::dataset::{PatientDescriptor, ScanWarning};
use super::normalize::NormalizationMode;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldRole {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for FoldRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(FoldRole::Train),
            "val" | "validation" => Ok(FoldRole::Val),
            "test" => Ok(FoldRole::Test),
            other => Err(Error::Config(format!("unknown fold role {other:?}"))),
        }
    }
}

impl std::fmt::Display for FoldRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FoldRole::Train => "train",
            FoldRole::Val => "val",
            FoldRole::Test => "test",
        })
    }
}

/// Default fold roles: last shard test, the one before it validation, the rest training.
pub fn default_roles(shard_count: usize) -> Vec<FoldRole> {
    (0..shard_count)
        .map(|i| match (shard_count, shard_count - 1 - i) {
            (1, _) => FoldRole::Train,
            (_, 0) => FoldRole::Test,
            (3.., 1) => FoldRole::Val,
            _ => FoldRole::Train,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessSettings {
    pub geometry_mode: GeometryMode,
    pub normalization: NormalizationMode,
    pub normalization_version: String,
    pub skip_empty_slices: bool,
    pub canvas_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardEntry {
    pub index: usize,
    pub file: String,
    pub role: FoldRole,
    pub patients: Vec<String>,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientEntry {
    pub patient_id: String,
    pub shard: usize,
    pub dims: [usize; 3],
    pub slices: usize,
    pub has_labels: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source: Option<PatientDescriptor>,
}

/// Patient-to-shard assignment, fold roles and the settings that produced the shards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub format_version: u32,
    pub seed: u64,
    pub shard_count: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dataset_root: Option<PathBuf>,
    pub assignment: BTreeMap<String, usize>,
    pub fold_roles: BTreeMap<usize, FoldRole>,
    pub preprocessing: PreprocessSettings,
    pub shards: Vec<ShardEntry>,
    pub patients: Vec<PatientEntry>,
    #[serde(default)]
    pub excluded: Vec<ScanWarning>,
}

impl ShardManifest {
    pub fn total_records(&self) -> usize {
        self.shards.iter().map(|s| s.records).sum()
    }

    pub fn shards_with_role(&self, role: FoldRole) -> impl Iterator<Item = &ShardEntry> {
        self.shards.iter().filter(move |s| s.role == role)
    }

    pub fn patients_with_role(&self, role: FoldRole) -> Vec<&PatientEntry> {
        self.patients
            .iter()
            .filter(|p| self.fold_roles.get(&p.shard) == Some(&role))
            .collect()
    }

    /// Shard file paths, resolved relative to the manifest's directory.
    pub fn shard_path(&self, manifest_dir: &Path, shard: &ShardEntry) -> PathBuf {
        manifest_dir.join(&shard.file)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: ShardManifest = serde_json::from_str(&text)?;
        if m.format_version != MANIFEST_VERSION {
            return Err(Error::Data(format!(
                "manifest version {} unsupported (expected {MANIFEST_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roles_layout() {
        use FoldRole::*;
        assert_eq!(default_roles(1), vec![Train]);
        assert_eq!(default_roles(2), vec![Train, Test]);
        assert_eq!(default_roles(5), vec![Train, Train, Train, Val, Test]);
    }
}
