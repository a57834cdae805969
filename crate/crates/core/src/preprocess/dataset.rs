//! BraTS-layout dataset discovery and case loading.

use std::borrow::Borrow;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Volume;
use crate::nifti_io::{self, GeometryHeader};
use crate::scalar::Scalar;
use crate::scenario::{Modality, MODALITY_COUNT};

/// File locations for one patient; no voxel data is loaded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientDescriptor {
    pub patient_id: String,
    /// Indexed by modality ordinal (T1, T2, T1c, T2f).
    pub modality_paths: [PathBuf; MODALITY_COUNT],
    pub label_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanWarning {
    pub patient_id: String,
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanReport {
    pub patients: Vec<PatientDescriptor>,
    /// Patients excluded because a modality file is missing.
    pub warnings: Vec<ScanWarning>,
}

/// One patient's four co-registered volumes plus optional labels.
#[derive(Debug, Clone)]
pub struct PatientCase<F> {
    pub patient_id: String,
    pub volumes: [Volume<F>; MODALITY_COUNT],
    pub labels: Option<Volume<u8>>,
    pub geometry: Option<GeometryHeader>,
}

impl<F: Scalar> PatientCase<F> {
    pub fn new(
        patient_id: impl Into<String>,
        volumes: [Volume<F>; MODALITY_COUNT],
        labels: Option<Volume<u8>>,
    ) -> Result<Self> {
        let case = Self {
            patient_id: patient_id.into(),
            volumes,
            labels,
            geometry: None,
        };
        case.validate()?;
        Ok(case)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.volumes[0].dims()
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims();
        for (m, v) in Modality::ALL.iter().zip(&self.volumes) {
            if v.dims() != dims {
                return Err(Error::Shape(format!(
                    "{}: {m} volume {:?} differs from {dims:?}",
                    self.patient_id,
                    v.dims()
                )));
            }
        }
        if let Some(l) = &self.labels {
            if l.dims() != dims {
                return Err(Error::Shape(format!(
                    "{}: label volume {:?} differs from {dims:?}",
                    self.patient_id,
                    l.dims()
                )));
            }
        }
        Ok(())
    }
}

/// Splits `Brats18_X_t1ce.nii.gz` into its suffix (`t1ce`).
fn file_suffix(name: &str) -> Option<&str> {
    let stem = name
        .strip_suffix(".nii.gz")
        .or_else(|| name.strip_suffix(".nii"))?;
    stem.rsplit_once('_').map(|(_, s)| s)
}

/// Lists patient directories under `root` in lexicographic order.
pub fn scan_dataset(root: &Path) -> Result<ScanReport> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    let mut report = ScanReport::default();
    for dir in dirs {
        let patient_id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut paths: [Option<PathBuf>; MODALITY_COUNT] = Default::default();
        let mut label_path = None;
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        files.sort();
        for f in files {
            let Some(name) = f.file_name().map(|n| n.to_string_lossy().into_owned()) else {
                continue;
            };
            match file_suffix(&name) {
                Some("seg") => label_path = Some(f),
                Some(s) => {
                    if let Some(m) = Modality::from_file_suffix(s) {
                        paths[m.ordinal()] = Some(f);
                    }
                }
                None => {}
            }
        }
        let missing: Vec<String> = Modality::ALL
            .iter()
            .filter(|m| paths[m.ordinal()].is_none())
            .map(|m| format!("_{}", m.file_suffix()))
            .collect();
        if !missing.is_empty() {
            warn!("excluding {patient_id}: missing {}", missing.join(", "));
            report.warnings.push(ScanWarning {
                patient_id,
                missing,
            });
            continue;
        }
        report.patients.push(PatientDescriptor {
            patient_id,
            modality_paths: paths.map(|p| p.expect("checked above")),
            label_path,
        });
    }
    Ok(report)
}

pub fn load_case<F: Scalar>(desc: &PatientDescriptor) -> Result<PatientCase<F>> {
    let mut header = None;
    let mut vols = Vec::with_capacity(MODALITY_COUNT);
    for path in &desc.modality_paths {
        let (v, h) = nifti_io::read_volume(path)?;
        if v.data().iter().any(|&x| x < 0.0) {
            log::debug!("{} has negative intensities", path.display());
        }
        header.get_or_insert(h);
        vols.push(v.map(|&x| F::of(x as f64)));
    }
    let labels = desc
        .label_path
        .as_deref()
        .map(nifti_io::read_labels)
        .transpose()?;
    let volumes: [Volume<F>; MODALITY_COUNT] = vols.try_into().expect("four modalities");
    let case = PatientCase {
        patient_id: desc.patient_id.clone(),
        volumes,
        labels,
        geometry: header,
    };
    case.validate()?;
    Ok(case)
}

/// Source of patient cases for the preprocessing pipeline; each call to
/// [`CaseLoader::load`] yields one exclusively-owned case.
pub trait CaseLoader: Sync {
    type Case: Borrow<PatientCase<f32>> + Send;

    fn len(&self) -> usize;

    fn patient_id(&self, index: usize) -> String;

    fn load(&self, index: usize) -> Result<Self::Case>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl CaseLoader for [PatientDescriptor] {
    type Case = PatientCase<f32>;

    fn len(&self) -> usize {
        <[PatientDescriptor]>::len(self)
    }

    fn patient_id(&self, index: usize) -> String {
        self[index].patient_id.clone()
    }

    fn load(&self, index: usize) -> Result<PatientCase<f32>> {
        load_case(&self[index])
    }
}

impl CaseLoader for [PatientCase<f32>] {
    type Case = PatientCase<f32>;

    fn len(&self) -> usize {
        <[PatientCase<f32>]>::len(self)
    }

    fn patient_id(&self, index: usize) -> String {
        self[index].patient_id.clone()
    }

    fn load(&self, index: usize) -> Result<PatientCase<f32>> {
        Ok(self[index].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffix_parsing() {
        assert_eq!(file_suffix("Brats18_A_1_t1ce.nii.gz"), Some("t1ce"));
        assert_eq!(file_suffix("P_flair.nii"), Some("flair"));
        assert_eq!(file_suffix("notes.txt"), None);
        assert_eq!(Modality::from_file_suffix("flair").unwrap().ordinal(), 3);
        assert_eq!(Modality::from_file_suffix("t1ce"), Some(Modality::T1c));
    }

    #[test]
    fn empty_root_scans_to_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let r = scan_dataset(dir.path()).unwrap();
        assert!(r.patients.is_empty() && r.warnings.is_empty());
    }
}
