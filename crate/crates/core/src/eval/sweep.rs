//! Scenario sweep over a fold, NIfTI export for segmentation backends, and
//! evaluation of the exported volumes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Volume};
use crate::model::Generator;
use crate::nifti_io::{read_labels, read_volume, write_volume, GeometryHeader};
use crate::preprocess::{
    from_canvas, load_case, prepare_case, FoldRole, GeometryMode, NormalizationMode, PreparedCase,
    ShardManifest,
};
use crate::scalar::Scalar;
use crate::scenario::{apply_scenario, Modality, ScenarioMask, MODALITY_COUNT};

use super::segmentation::{region_dice, DiceAccumulator, DiceRecord};
use super::synthesis::{case_metrics, Aggregation, MetricsRecord, SynthesisAccumulator};
use super::metrics::SsimParams;

pub const SYNTH_INDEX_FILE: &str = "synth_index.json";
pub const SYNTH_INDEX_VERSION: u32 = 1;

/// `<patient>__<scenario>_<t1|t2|t1ce|flair>.nii.gz`
pub fn volume_file_name(patient_id: &str, mask: ScenarioMask, modality: Modality) -> String {
    format!("{patient_id}__{mask}_{}.nii.gz", modality.file_suffix())
}

/// `<patient>__<scenario>_seg.nii.gz`
pub fn label_file_name(patient_id: &str, mask: ScenarioMask) -> String {
    format!("{patient_id}__{mask}_seg.nii.gz")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepPatient {
    pub patient_id: String,
    pub dims: [usize; 3],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label_path: Option<PathBuf>,
}

/// Contents of a sweep directory. Reference volumes are stored as scenario 1111.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthIndex {
    pub format_version: u32,
    pub manifest: PathBuf,
    pub role: FoldRole,
    pub geometry_mode: GeometryMode,
    pub normalization: NormalizationMode,
    pub scenarios: Vec<ScenarioMask>,
    pub patients: Vec<SweepPatient>,
}

impl SynthIndex {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let index: SynthIndex = serde_json::from_str(&text)?;
        if index.format_version != SYNTH_INDEX_VERSION {
            return Err(Error::Data(format!(
                "{} has unsupported version {}",
                path.display(),
                index.format_version
            )));
        }
        Ok(index)
    }
}

/// Writes four modality volumes in BraTS layout, keeping the source geometry.
pub fn export_for_backend(
    out_dir: &Path,
    patient_id: &str,
    mask: ScenarioMask,
    volumes: &[Volume<f32>; MODALITY_COUNT],
    geometry: Option<&GeometryHeader>,
) -> Result<()> {
    let header = geometry.ok_or_else(|| {
        Error::Contract(format!("{patient_id}: geometry header lost, refusing to export"))
    })?;
    for (m, v) in Modality::ALL.iter().zip(volumes) {
        write_volume(&out_dir.join(volume_file_name(patient_id, mask, *m)), v, header)?;
    }
    Ok(())
}

pub fn read_exported(dir: &Path, patient_id: &str, mask: ScenarioMask) -> Result<[Volume<f32>; MODALITY_COUNT]> {
    let read = |m: Modality| read_volume(&dir.join(volume_file_name(patient_id, mask, m))).map(|(v, _)| v);
    Ok([
        read(Modality::T1)?,
        read(Modality::T2)?,
        read(Modality::T1c)?,
        read(Modality::T2f)?,
    ])
}

/// Synthesizes every scenario for one prepared case.
///
/// Missing channels come from the generator mapped back to the native frame;
/// present channels are the normalized inputs, untouched.
pub fn synthesize_case<F: Scalar>(
    generator: &Generator<F>,
    prepared: &PreparedCase<f32>,
    mode: GeometryMode,
    mask: ScenarioMask,
) -> Result<[Volume<f32>; MODALITY_COUNT]> {
    let mut out = prepared.case.volumes.clone();
    if mask.missing_count() == 0 {
        return Ok(out);
    }
    let z = prepared.case.dims()[2];
    let planes: Vec<Image<f32>> = (0..z)
        .into_par_iter()
        .map(|k| {
            let sample = prepared.slice(k, mode)?;
            let input = apply_scenario(&sample.channels.cast::<F>(), mask)?;
            let canvas = generator.generate(&input, mask)?.cast::<f32>();
            from_canvas(&canvas, Some(&sample.geometry))
        })
        .collect::<Result<_>>()?;
    for (k, plane) in planes.iter().enumerate() {
        for m in mask.missing() {
            let c = m.ordinal();
            out[c].axial_mut(k).copy_from_slice(plane.channel(c));
        }
    }
    Ok(out)
}

/// Runs the scenario sweep over the patients of `role` and exports the results to `out_dir`.
pub fn synth_sweep<F: Scalar>(
    generator: &Generator<F>,
    manifest_path: &Path,
    role: FoldRole,
    scenarios: &[ScenarioMask],
    out_dir: &Path,
) -> Result<SynthIndex> {
    let manifest = ShardManifest::read(manifest_path)?;
    let patients = manifest.patients_with_role(role);
    if patients.is_empty() {
        return Err(Error::Config(format!("manifest has no {role} patients")));
    }
    if scenarios.iter().any(|m| m.present_count() == 0) {
        return Err(Error::Contract("scenario 0000 has no input modality".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let settings = &manifest.preprocessing;
    let mut entries = Vec::new();
    for p in patients {
        let source = p.source.as_ref().ok_or_else(|| {
            Error::Data(format!("manifest has no source paths for {}", p.patient_id))
        })?;
        let case = load_case::<f32>(source)?;
        let prepared = prepare_case(&case, settings.normalization)?;
        let header = case.geometry.as_ref();
        export_for_backend(out_dir, &p.patient_id, ScenarioMask::FULL, &prepared.case.volumes, header)?;
        for &mask in scenarios.iter().filter(|m| m.missing_count() > 0) {
            let synth = synthesize_case(generator, &prepared, settings.geometry_mode, mask)?;
            export_for_backend(out_dir, &p.patient_id, mask, &synth, header)?;
        }
        log::info!("synthesized {} scenarios for {}", scenarios.len(), p.patient_id);
        entries.push(SweepPatient {
            patient_id: p.patient_id.clone(),
            dims: case.dims(),
            label_path: source.label_path.clone(),
        });
    }
    let index = SynthIndex {
        format_version: SYNTH_INDEX_VERSION,
        manifest: manifest_path.to_path_buf(),
        role,
        geometry_mode: settings.geometry_mode,
        normalization: settings.normalization,
        scenarios: scenarios.to_vec(),
        patients: entries,
    };
    super::synthesis::write_json(&out_dir.join(SYNTH_INDEX_FILE), &index)?;
    Ok(index)
}

/// Synthesis metrics of a sweep directory against its stored references.
pub fn evaluate_sweep(dir: &Path, index: &SynthIndex, aggregation: Aggregation) -> Result<Vec<MetricsRecord>> {
    let scenarios: Vec<_> = index.scenarios.iter().copied().filter(|m| m.missing_count() > 0).collect();
    let mut acc = SynthesisAccumulator::new();
    for p in &index.patients {
        let truth = read_exported(dir, &p.patient_id, ScenarioMask::FULL)?;
        let cases = scenarios
            .par_iter()
            .map(|&mask| {
                let synth = read_exported(dir, &p.patient_id, mask)?;
                case_metrics(mask, &synth, &truth, aggregation, SsimParams::default())
            })
            .collect::<Result<Vec<_>>>()?;
        for (&mask, c) in scenarios.iter().zip(&cases) {
            acc.add(mask, c);
        }
    }
    acc.finish(&index.scenarios)
}

/// Label files found for a sweep, plus every expected file that was absent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BackendImport {
    pub entries: BTreeMap<(String, ScenarioMask), PathBuf>,
    pub missing: Vec<String>,
}

impl BackendImport {
    pub fn require_complete(self) -> Result<Self> {
        if self.missing.is_empty() {
            return Ok(self);
        }
        Err(Error::Data(format!(
            "{} segmentation files missing: {}",
            self.missing.len(),
            self.missing.join(", ")
        )))
    }
}

/// Locates backend label maps named `<patient>__<scenario>_seg.nii.gz` in `dir`.
pub fn import_backend_labels(dir: &Path, patients: &[String], scenarios: &[ScenarioMask]) -> BackendImport {
    let mut out = BackendImport::default();
    for pid in patients {
        for &mask in scenarios {
            let name = label_file_name(pid, mask);
            let path = dir.join(&name);
            if path.is_file() {
                out.entries.insert((pid.clone(), mask), path);
            } else {
                out.missing.push(name);
            }
        }
    }
    out
}

/// Dice of backend segmentations against the sweep patients' ground-truth labels.
pub fn evaluate_backend(
    index: &SynthIndex,
    labels_dir: &Path,
    scenarios: &[ScenarioMask],
    method: &str,
) -> Result<Vec<DiceRecord>> {
    let ids: Vec<String> = index.patients.iter().map(|p| p.patient_id.clone()).collect();
    let found = import_backend_labels(labels_dir, &ids, scenarios).require_complete()?;
    let mut acc = DiceAccumulator::new();
    for p in &index.patients {
        let gt_path = p.label_path.as_ref().ok_or_else(|| {
            Error::Data(format!("{} has no ground-truth segmentation", p.patient_id))
        })?;
        let gt = read_labels(gt_path)?;
        let rows = scenarios
            .par_iter()
            .map(|&mask| {
                let pred = read_labels(&found.entries[&(p.patient_id.clone(), mask)])?;
                region_dice(&pred, &gt)
            })
            .collect::<Result<Vec<_>>>()?;
        for (&mask, v) in scenarios.iter().zip(rows) {
            acc.add(mask, &p.patient_id, v);
        }
    }
    acc.finish(scenarios, method)
}
