//! Small BraTS-layout datasets with known structure, for tests and demos.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::Volume;
use crate::nifti_io::{default_header, write_labels, write_volume};
use crate::preprocess::{PatientCase, PatientDescriptor};
use crate::rng::stream_rng;
use crate::scenario::{Modality, MODALITY_COUNT};

const SYNTHETIC_STREAM: u64 = 7000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub patients: usize,
    /// Volume size `[x, y, z]`.
    pub dims: [usize; 3],
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(patients: usize, dims: [usize; 3], seed: u64) -> Self {
        Self { patients, dims, seed }
    }
}

pub fn patient_name(index: usize) -> String {
    format!("Synth_{index:03}_1")
}

/// An ellipsoidal head with a layered tumor; all four modalities are smooth
/// functions of the same anatomy, so any one is predictable from the others.
pub fn synthetic_case(index: usize, spec: &SyntheticSpec) -> PatientCase<f32> {
    let mut rng = stream_rng(spec.seed, SYNTHETIC_STREAM + index as u64);
    let [nx, ny, nz] = spec.dims;
    let (cx, cy, cz) = (nx as f64 / 2.0, ny as f64 / 2.0, nz as f64 / 2.0);
    let radii = [
        nx as f64 * rng.gen_range(0.30..0.38),
        ny as f64 * rng.gen_range(0.34..0.42),
        nz as f64 * rng.gen_range(0.36..0.44),
    ];
    let tumor = [
        cx + rng.gen_range(-0.12..0.12) * nx as f64,
        cy + rng.gen_range(-0.12..0.12) * ny as f64,
        cz + rng.gen_range(-0.10..0.10) * nz as f64,
    ];
    let tumor_r = nx.min(ny) as f64 * rng.gen_range(0.08..0.13);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let freq: f64 = rng.gen_range(0.15..0.3);

    let brain = |x: usize, y: usize, z: usize| {
        let d = ((x as f64 + 0.5 - cx) / radii[0]).powi(2)
            + ((y as f64 + 0.5 - cy) / radii[1]).powi(2)
            + ((z as f64 + 0.5 - cz) / radii[2]).powi(2);
        d <= 1.0
    };
    let tumor_dist = |x: usize, y: usize, z: usize| {
        (((x as f64 - tumor[0]).powi(2) + (y as f64 - tumor[1]).powi(2) + (z as f64 - tumor[2]).powi(2))
            .sqrt())
            / tumor_r
    };
    let label = |x: usize, y: usize, z: usize| -> u8 {
        if !brain(x, y, z) {
            return 0;
        }
        match tumor_dist(x, y, z) {
            d if d < 0.35 => 1,
            d if d < 0.6 => 4,
            d if d < 1.0 => 2,
            _ => 0,
        }
    };
    let labels = Volume::from_fn(spec.dims, label);
    let tissue = |x: usize, y: usize, z: usize| {
        0.5 + 0.25 * ((x as f64 * freq + phase).sin() * (y as f64 * freq * 0.8).cos())
            + 0.1 * (z as f64 * 0.2).sin()
    };
    // base intensity, tissue gain, and response to labels 1, 2, 4
    let profile = [
        (300.0, 200.0, [-80.0, -40.0, 20.0]),
        (400.0, 300.0, [150.0, 250.0, 100.0]),
        (320.0, 180.0, [-60.0, -20.0, 400.0]),
        (350.0, 150.0, [80.0, 300.0, 120.0]),
    ];
    let volumes: Vec<Volume<f32>> = profile
        .iter()
        .map(|&(base, gain, resp)| {
            Volume::from_fn(spec.dims, |x, y, z| {
                if !brain(x, y, z) {
                    return 0.0;
                }
                let t = match labels.get(x, y, z) {
                    1 => resp[0],
                    2 => resp[1],
                    4 => resp[2],
                    _ => 0.0,
                };
                (base + gain * tissue(x, y, z) + t) as f32
            })
        })
        .collect();
    let volumes: [Volume<f32>; MODALITY_COUNT] = volumes.try_into().expect("four modalities");
    PatientCase::new(patient_name(index), volumes, Some(labels)).expect("consistent synthetic case")
}

/// Writes `spec.patients` cases under `root/<patient>/<patient>_<suffix>.nii.gz`.
pub fn write_synthetic_dataset(root: &Path, spec: &SyntheticSpec) -> Result<Vec<PatientDescriptor>> {
    if spec.patients == 0 {
        return Err(Error::Config("synthetic dataset needs at least one patient".into()));
    }
    let header = default_header(spec.dims);
    (0..spec.patients)
        .map(|i| {
            let case = synthetic_case(i, spec);
            let dir = root.join(&case.patient_id);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let path = |suffix: &str| -> PathBuf { dir.join(format!("{}_{suffix}.nii.gz", case.patient_id)) };
            let mut modality_paths: [PathBuf; MODALITY_COUNT] = Default::default();
            for (m, v) in Modality::ALL.iter().zip(&case.volumes) {
                let p = path(m.file_suffix());
                write_volume(&p, v, &header)?;
                modality_paths[m.ordinal()] = p;
            }
            let label_path = path("seg");
            write_labels(&label_path, case.labels.as_ref().expect("labels"), &header)?;
            Ok(PatientDescriptor {
                patient_id: case.patient_id,
                modality_paths,
                label_path: Some(label_path),
            })
        })
        .collect()
}
