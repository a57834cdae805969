use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use mmsynth::image::stack_axial;
use mmsynth::preprocess::canvas::{from_canvas, to_canvas};
use mmsynth::preprocess::normalize::box_mean;
use mmsynth::preprocess::{
    prepare_case, preprocess_dataset, read_shard, scan_dataset, write_shards, CaseLoader, GeometryMode,
    NormalizationMode, PatientCase, ShardManifest, ShardSettings, SliceSample, MANIFEST_FILE,
};
use mmsynth::synthetic::{synthetic_case, write_synthetic_dataset, SyntheticSpec};
use mmsynth::{Box2d, Image};

const SPEC: SyntheticSpec = SyntheticSpec { patients: 3, dims: [48, 44, 6], seed: 21 };

fn dataset(dir: &Path) -> std::path::PathBuf {
    let root = dir.join("data");
    write_synthetic_dataset(&root, &SPEC).unwrap();
    root
}

#[test]
fn normalized_box_means_are_one() {
    for i in 0..SPEC.patients {
        let prepared = prepare_case(&synthetic_case(i, &SPEC), NormalizationMode::PerModality).unwrap();
        for v in &prepared.case.volumes {
            assert!((box_mean(v, &prepared.bbox) - 1.0).abs() <= 1e-6);
        }
    }
}

#[test]
fn crop_round_trip_of_smooth_bump_is_close() {
    let (h, w) = (240, 240);
    let bump = Image::<f64>::from_fn(4, h, w, |c, y, x| {
        let (dy, dx) = (y as f64 - 118.0 - c as f64, x as f64 - 121.0);
        3.0 * (-(dy * dy + dx * dx) / (2.0 * 35.0f64.powi(2))).exp()
    });
    let b = Box2d { y0: 30, y1: 209, x0: 25, x1: 214 };
    let (canvas, g) = to_canvas(&bump, GeometryMode::Crop, Some(b)).unwrap();
    let back = from_canvas(&canvas, Some(&g)).unwrap();
    for c in 0..4 {
        let plane = bump.channel(c);
        let r = plane.iter().cloned().fold(f64::MIN, f64::max) - plane.iter().cloned().fold(f64::MAX, f64::min);
        for y in b.y0..=b.y1 {
            for x in b.x0..=b.x1 {
                assert!((back.get(c, y, x) - bump.get(c, y, x)).abs() <= 0.05 * r);
            }
        }
    }
}

#[test]
fn padding_round_trip_is_exact() {
    let case = synthetic_case(0, &SyntheticSpec { dims: [240, 240, 2], ..SPEC });
    for z in 0..2 {
        let slice = stack_axial(&case.volumes, z);
        let (canvas, g) = to_canvas(&slice, GeometryMode::Padding, None).unwrap();
        assert_eq!(from_canvas(&canvas, Some(&g)).unwrap(), slice);
    }
}

fn shard_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn shards_reproduce_every_slice_and_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let root = dataset(dir.path());
    for mode in [GeometryMode::Padding, GeometryMode::Crop] {
        let a = dir.path().join(format!("a-{mode}"));
        let b = dir.path().join(format!("b-{mode}"));
        let settings = ShardSettings::new(3, 7, mode);
        let manifest = preprocess_dataset(&root, &settings, &a).unwrap();
        preprocess_dataset(&root, &settings, &b).unwrap();
        assert_eq!(shard_bytes(&a), shard_bytes(&b));
        assert_eq!(ShardManifest::read(&a.join(MANIFEST_FILE)).unwrap(), manifest);

        let mut seen: BTreeMap<(String, usize), SliceSample<f32>> = BTreeMap::new();
        for entry in &manifest.shards {
            let records = read_shard::<f32>(&manifest.shard_path(&a, entry)).unwrap();
            assert_eq!(records.len(), entry.records);
            for r in records {
                assert_eq!(manifest.assignment[&r.patient_id], entry.index);
                assert!(seen.insert((r.patient_id.clone(), r.z_index), r).is_none());
            }
        }
        let scanned = scan_dataset(&root).unwrap();
        for desc in &scanned.patients {
            let case = mmsynth::preprocess::load_case::<f32>(desc).unwrap();
            let prepared = prepare_case(&case, settings.normalization).unwrap();
            for z in prepared.slice_indices(settings.skip_empty_slices) {
                let expected = prepared.slice(z, mode).unwrap();
                assert_eq!(seen.remove(&(desc.patient_id.clone(), z)).unwrap(), expected);
            }
        }
        assert!(seen.is_empty());
    }
}

#[test]
fn seeds_change_the_assignment_or_order() {
    let dir = tempfile::tempdir().unwrap();
    let root = dataset(dir.path());
    let a = preprocess_dataset(&root, &ShardSettings::new(3, 1, GeometryMode::Padding), &dir.path().join("a")).unwrap();
    let b = preprocess_dataset(&root, &ShardSettings::new(3, 2, GeometryMode::Padding), &dir.path().join("b")).unwrap();
    assert_eq!(a.total_records(), b.total_records());
    assert!(a.assignment != b.assignment || shard_bytes(&dir.path().join("a")) != shard_bytes(&dir.path().join("b")));
}

struct Live {
    case: PatientCase<f32>,
    live: Arc<AtomicUsize>,
}

impl std::borrow::Borrow<PatientCase<f32>> for Live {
    fn borrow(&self) -> &PatientCase<f32> {
        &self.case
    }
}

impl Drop for Live {
    fn drop(&mut self) {
        self.live.fetch_sub(1, Ordering::SeqCst);
    }
}

struct CountingLoader {
    spec: SyntheticSpec,
    live: Arc<AtomicUsize>,
    peak: AtomicUsize,
}

impl CaseLoader for CountingLoader {
    type Case = Live;

    fn len(&self) -> usize {
        self.spec.patients
    }

    fn patient_id(&self, index: usize) -> String {
        mmsynth::synthetic::patient_name(index)
    }

    fn load(&self, index: usize) -> mmsynth::Result<Live> {
        let now = self.live.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        Ok(Live { case: synthetic_case(index, &self.spec), live: self.live.clone() })
    }
}

#[test]
fn at_most_one_case_per_worker_is_alive() {
    let dir = tempfile::tempdir().unwrap();
    let loader = CountingLoader {
        spec: SyntheticSpec { patients: 6, ..SPEC },
        live: Arc::new(AtomicUsize::new(0)),
        peak: AtomicUsize::new(0),
    };
    let manifest = write_shards(&loader, &ShardSettings::new(2, 3, GeometryMode::Padding), dir.path()).unwrap();
    assert_eq!(manifest.patients.len(), 6);
    assert_eq!(loader.live.load(Ordering::SeqCst), 0);
    assert!(loader.peak.load(Ordering::SeqCst) <= rayon::current_num_threads());
}
