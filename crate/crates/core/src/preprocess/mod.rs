//! Dataset ingest: scanning, normalization, canvas geometry and compressed shards.

pub mod canvas;
pub mod dataset;
pub mod manifest;
pub mod normalize;
pub mod shard;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{stack_axial, BoundingBox, Image};
use crate::rng::stream_rng;
use crate::scalar::Scalar;

pub use canvas::{from_canvas, to_canvas, Geometry, GeometryMode, CANVAS_SIZE};
pub use dataset::{load_case, scan_dataset, CaseLoader, PatientCase, PatientDescriptor, ScanReport};
pub use manifest::{FoldRole, PatientEntry, PreprocessSettings, ShardEntry, ShardManifest, MANIFEST_FILE};
pub use normalize::{brain_bounding_box, normalize_case, NormalizationMode};
pub use shard::{read_shard, ShardReader, ShardWriter};

/// One axial slice on the model canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSample<F> {
    pub patient_id: String,
    pub z_index: usize,
    pub channels: Image<F>,
    pub geometry: Geometry,
    pub has_tumor: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardSettings {
    pub shard_count: usize,
    pub seed: u64,
    pub roles: Vec<FoldRole>,
    pub geometry_mode: GeometryMode,
    pub normalization: NormalizationMode,
    /// Keep only slices inside the brain box's axial extent.
    pub skip_empty_slices: bool,
}

impl ShardSettings {
    pub fn new(shard_count: usize, seed: u64, geometry_mode: GeometryMode) -> Self {
        Self {
            shard_count,
            seed,
            roles: manifest::default_roles(shard_count.max(1)),
            geometry_mode,
            normalization: NormalizationMode::PerModality,
            skip_empty_slices: false,
        }
    }

    pub fn preprocessing(&self) -> PreprocessSettings {
        PreprocessSettings {
            geometry_mode: self.geometry_mode,
            normalization: self.normalization,
            normalization_version: self.normalization.version_tag().to_string(),
            skip_empty_slices: self.skip_empty_slices,
            canvas_size: CANVAS_SIZE,
        }
    }
}

/// A normalized case with its brain box, ready to be sliced.
#[derive(Debug, Clone)]
pub struct PreparedCase<F> {
    pub case: PatientCase<F>,
    pub bbox: BoundingBox,
}

pub fn prepare_case<F: Scalar>(case: &PatientCase<F>, mode: NormalizationMode) -> Result<PreparedCase<F>> {
    let bbox = brain_bounding_box(case)?;
    let case = normalize_case(case, &bbox, mode)?;
    Ok(PreparedCase { case, bbox })
}

impl<F: Scalar> PreparedCase<F> {
    /// Axial indices to export; with `skip_empty` only the brain box's z-range.
    pub fn slice_indices(&self, skip_empty: bool) -> std::ops::Range<usize> {
        if skip_empty {
            self.bbox.min[2]..self.bbox.max[2] + 1
        } else {
            0..self.case.dims()[2]
        }
    }

    pub fn slice(&self, z: usize, mode: GeometryMode) -> Result<SliceSample<F>> {
        let native = stack_axial(&self.case.volumes, z);
        let (channels, geometry) = to_canvas(&native, mode, Some(self.bbox.axial()))?;
        let has_tumor = self
            .case
            .labels
            .as_ref()
            .map(|l| l.axial(z).iter().any(|&v| v != 0));
        Ok(SliceSample {
            patient_id: self.case.patient_id.clone(),
            z_index: z,
            channels,
            geometry,
            has_tumor,
        })
    }
}

struct Spill {
    path: PathBuf,
    /// (offset, length) of each record, in z order.
    records: Vec<(u64, usize)>,
    dims: [usize; 3],
    has_labels: bool,
}

fn spill_case<L: CaseLoader + ?Sized>(
    loader: &L,
    index: usize,
    settings: &ShardSettings,
    spill_dir: &Path,
) -> Result<Spill> {
    let loaded = loader.load(index)?;
    let case: &PatientCase<f32> = std::borrow::Borrow::borrow(&loaded);
    let prepared = prepare_case(case, settings.normalization)?;
    let path = spill_dir.join(format!("{index:06}.raw"));
    let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
    let mut records = Vec::new();
    let mut offset = 0u64;
    for z in prepared.slice_indices(settings.skip_empty_slices) {
        let payload = shard::encode_record(&prepared.slice(z, settings.geometry_mode)?);
        out.write_all(&payload).map_err(|e| Error::io(&path, e))?;
        records.push((offset, payload.len()));
        offset += payload.len() as u64;
    }
    out.flush().map_err(|e| Error::io(&path, e))?;
    Ok(Spill {
        path,
        records,
        dims: case.dims(),
        has_labels: case.labels.is_some(),
    })
}

fn shard_file_name(index: usize) -> String {
    format!("shard-{index:03}.mms")
}

/// Preprocesses every case into `settings.shard_count` shards under `out_dir`.
///
/// Patients are assigned to shards by a seeded permutation. Each worker holds one
/// case at a time and spills its canvases to disk. Each shard is then written by a
/// single writer in a seeded cross-patient order.
pub fn write_shards<L: CaseLoader + ?Sized>(
    loader: &L,
    settings: &ShardSettings,
    out_dir: &Path,
) -> Result<ShardManifest> {
    let n = loader.len();
    if settings.shard_count == 0 {
        return Err(Error::Config("shard_count must be at least 1".into()));
    }
    if settings.shard_count > n {
        return Err(Error::Config(format!(
            "{} shards requested for {n} patients",
            settings.shard_count
        )));
    }
    if settings.roles.len() != settings.shard_count {
        return Err(Error::Config(format!(
            "{} roles given for {} shards",
            settings.roles.len(),
            settings.shard_count
        )));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(settings.seed, 1));
    let mut shard_of = vec![0usize; n];
    for (pos, &patient) in order.iter().enumerate() {
        shard_of[patient] = pos % settings.shard_count;
    }

    let spill_dir = out_dir.join(".spill");
    fs::create_dir_all(&spill_dir).map_err(|e| Error::io(&spill_dir, e))?;
    let spills: Vec<Spill> = (0..n)
        .into_par_iter()
        .map(|i| spill_case(loader, i, settings, &spill_dir))
        .collect::<Result<_>>()?;

    let shards: Vec<ShardEntry> = (0..settings.shard_count)
        .into_par_iter()
        .map(|s| -> Result<ShardEntry> {
            let members: Vec<usize> = (0..n).filter(|&p| shard_of[p] == s).collect();
            let mut keys: Vec<(usize, usize)> = members
                .iter()
                .flat_map(|&p| (0..spills[p].records.len()).map(move |r| (p, r)))
                .collect();
            let mut rng: ChaCha8Rng = stream_rng(settings.seed, 100 + s as u64);
            keys.shuffle(&mut rng);

            let file = shard_file_name(s);
            let path = out_dir.join(&file);
            let mut writer = ShardWriter::create(&path)?;
            let mut handles: BTreeMap<usize, File> = BTreeMap::new();
            let mut buf = Vec::new();
            for (p, r) in keys {
                let spill = &spills[p];
                let f = match handles.entry(p) {
                    std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::btree_map::Entry::Vacant(e) => e.insert(
                        File::open(&spill.path).map_err(|err| Error::io(&spill.path, err))?,
                    ),
                };
                let (offset, len) = spill.records[r];
                buf.resize(len, 0);
                f.seek(SeekFrom::Start(offset))
                    .and_then(|_| f.read_exact(&mut buf))
                    .map_err(|e| Error::io(&spill.path, e))?;
                writer.write_payload(&buf)?;
            }
            let records = writer.finish()?;
            Ok(ShardEntry {
                index: s,
                file,
                role: settings.roles[s],
                patients: members.iter().map(|&p| loader.patient_id(p)).collect(),
                records,
            })
        })
        .collect::<Result<_>>()?;

    fs::remove_dir_all(&spill_dir).map_err(|e| Error::io(&spill_dir, e))?;

    let patients = (0..n)
        .map(|p| PatientEntry {
            patient_id: loader.patient_id(p),
            shard: shard_of[p],
            dims: spills[p].dims,
            slices: spills[p].records.len(),
            has_labels: spills[p].has_labels,
            source: None,
        })
        .collect();
    let manifest = ShardManifest {
        format_version: manifest::MANIFEST_VERSION,
        seed: settings.seed,
        shard_count: settings.shard_count,
        dataset_root: None,
        assignment: (0..n).map(|p| (loader.patient_id(p), shard_of[p])).collect(),
        fold_roles: settings.roles.iter().copied().enumerate().collect(),
        preprocessing: settings.preprocessing(),
        shards,
        patients,
        excluded: Vec::new(),
    };
    manifest.write(&out_dir.join(manifest::MANIFEST_FILE))?;
    Ok(manifest)
}

/// Scans a BraTS-layout directory and writes shards plus `manifest.json`.
pub fn preprocess_dataset(root: &Path, settings: &ShardSettings, out_dir: &Path) -> Result<ShardManifest> {
    let report = scan_dataset(root)?;
    let mut manifest = write_shards(report.patients.as_slice(), settings, out_dir)?;
    manifest.dataset_root = Some(root.to_path_buf());
    for (entry, desc) in manifest.patients.iter_mut().zip(&report.patients) {
        entry.source = Some(desc.clone());
    }
    manifest.excluded = report.warnings;
    manifest.write(&out_dir.join(manifest::MANIFEST_FILE))?;
    Ok(manifest)
}
