//! Brain bounding box and mean-intensity standardization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BoundingBox, Volume};
use crate::scalar::Scalar;
use crate::scenario::Modality;

use super::dataset::PatientCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// Each modality divided by its own in-box mean.
    #[default]
    PerModality,
    /// All modalities divided by one mean pooled over the four in-box volumes.
    Pooled,
}

impl NormalizationMode {
    /// Identifier recorded in manifests.
    pub fn version_tag(self) -> &'static str {
        match self {
            NormalizationMode::PerModality => "box-mean-per-modality-v1",
            NormalizationMode::Pooled => "box-mean-pooled-v1",
        }
    }
}

/// Tightest box holding every voxel that is nonzero in any of `volumes`.
pub fn bounding_box_of<F: Scalar>(volumes: &[Volume<F>]) -> Result<BoundingBox> {
    let dims = volumes
        .first()
        .ok_or_else(|| Error::Degenerate("no volumes".into()))?
        .dims();
    let mut min = [usize::MAX; 3];
    let mut max = [0usize; 3];
    let mut found = false;
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let i = volumes[0].index(x, y, z);
                if volumes.iter().any(|v| v.data()[i] != F::zero()) {
                    found = true;
                    for (a, p) in [x, y, z].into_iter().enumerate() {
                        min[a] = min[a].min(p);
                        max[a] = max[a].max(p);
                    }
                }
            }
        }
    }
    if !found {
        return Err(Error::Degenerate("all voxels are zero".into()));
    }
    Ok(BoundingBox { min, max })
}

pub fn brain_bounding_box<F: Scalar>(case: &PatientCase<F>) -> Result<BoundingBox> {
    bounding_box_of(&case.volumes).map_err(|e| match e {
        Error::Degenerate(m) => Error::Degenerate(format!("{}: {m}", case.patient_id)),
        other => other,
    })
}

fn box_sum<F: Scalar>(v: &Volume<F>, b: &BoundingBox) -> f64 {
    let mut s = 0.0;
    for z in b.min[2]..=b.max[2] {
        for y in b.min[1]..=b.max[1] {
            let row = v.index(b.min[0], y, z);
            s += v.data()[row..row + b.extent(0)]
                .iter()
                .map(|x| x.as_f64())
                .sum::<f64>();
        }
    }
    s
}

fn box_len(b: &BoundingBox) -> f64 {
    (b.extent(0) * b.extent(1) * b.extent(2)) as f64
}

/// Divides every voxel by the in-box mean (zero voxels inside the box count toward the mean).
pub fn normalize_case<F: Scalar>(
    case: &PatientCase<F>,
    bbox: &BoundingBox,
    mode: NormalizationMode,
) -> Result<PatientCase<F>> {
    let dims = case.dims();
    if (0..3).any(|a| bbox.min[a] > bbox.max[a] || bbox.max[a] >= dims[a]) {
        return Err(Error::Range(format!(
            "box {bbox:?} does not fit volume {dims:?}"
        )));
    }
    let n = box_len(bbox);
    let means: Vec<f64> = match mode {
        NormalizationMode::PerModality => case.volumes.iter().map(|v| box_sum(v, bbox) / n).collect(),
        NormalizationMode::Pooled => {
            let pooled = case.volumes.iter().map(|v| box_sum(v, bbox)).sum::<f64>() / (4.0 * n);
            vec![pooled; 4]
        }
    };
    for (m, &mean) in Modality::ALL.iter().zip(&means) {
        if !(mean > 0.0) {
            return Err(Error::Degenerate(format!(
                "{}: {m} has mean {mean} inside the brain box",
                case.patient_id
            )));
        }
    }
    let mut out = case.clone();
    for (v, &mean) in out.volumes.iter_mut().zip(&means) {
        for x in v.data_mut() {
            *x = F::of(x.as_f64() / mean);
        }
    }
    Ok(out)
}

/// Mean of voxels inside `bbox`, accumulated in `f64`.
pub fn box_mean<F: Scalar>(v: &Volume<F>, bbox: &BoundingBox) -> f64 {
    box_sum(v, bbox) / box_len(bbox)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case_from(f: impl Fn(usize, usize, usize) -> f32 + Copy) -> PatientCase<f32> {
        let dims = [12, 10, 8];
        let vols = [0, 1, 2, 3].map(|c| Volume::from_fn(dims, |x, y, z| f(x, y, z) * (c + 1) as f32));
        PatientCase::new("p", vols, None).unwrap()
    }

    #[test]
    fn box_examples() {
        let c = case_from(|x, y, z| ((x, y, z) == (10, 2, 3)) as u8 as f32);
        let b = brain_bounding_box(&c).unwrap();
        assert_eq!(b, BoundingBox { min: [10, 2, 3], max: [10, 2, 3] });

        let c = case_from(|x, y, z| ((x, y, z) == (0, 0, 0) || (x, y, z) == (5, 5, 5)) as u8 as f32);
        let b = brain_bounding_box(&c).unwrap();
        assert_eq!(b, BoundingBox { min: [0; 3], max: [5; 3] });

        let c = case_from(|_, _, _| 1.0);
        let b = brain_bounding_box(&c).unwrap();
        assert_eq!(b, BoundingBox { min: [0; 3], max: [11, 9, 7] });

        let c = case_from(|_, _, _| 0.0);
        assert!(matches!(brain_bounding_box(&c), Err(Error::Degenerate(_))));
    }

    #[test]
    fn constant_normalizes_to_one() {
        let c = case_from(|_, _, _| 5.0);
        let b = brain_bounding_box(&c).unwrap();
        let n = normalize_case(&c, &b, NormalizationMode::PerModality).unwrap();
        for v in &n.volumes {
            assert!(v.data().iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn zero_mean_modality_is_named() {
        let dims = [4, 4, 4];
        let mut vols = [0, 1, 2, 3].map(|_| Volume::new(dims, 1.0f32));
        vols[2] = Volume::new(dims, 0.0);
        let c = PatientCase::new("p", vols, None).unwrap();
        let b = brain_bounding_box(&c).unwrap();
        let err = normalize_case(&c, &b, NormalizationMode::PerModality).unwrap_err();
        assert!(err.to_string().contains("T1c"), "{err}");
    }

    #[test]
    fn pooled_mode_shares_one_divisor() {
        let c = case_from(|x, _, _| 1.0 + x as f32);
        let b = brain_bounding_box(&c).unwrap();
        let n = normalize_case(&c, &b, NormalizationMode::Pooled).unwrap();
        let r0 = n.volumes[0].get(3, 1, 1) / c.volumes[0].get(3, 1, 1);
        let r3 = n.volumes[3].get(3, 1, 1) / c.volumes[3].get(3, 1, 1);
        assert!((r0 - r3).abs() < 1e-6);
    }
}
