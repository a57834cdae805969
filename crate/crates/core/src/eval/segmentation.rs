use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Volume;
use crate::scenario::{enumerate_scenarios, ScenarioMask};

pub const AVG_ROW: &str = "avg";

/// Nested tumor regions over BraTS labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    /// Enhancing tumor, label 4.
    Et,
    /// Tumor core, labels 1 and 4.
    Tc,
    /// Whole tumor, labels 1, 2 and 4.
    Wt,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Et, Region::Tc, Region::Wt];

    pub fn contains(self, label: u8) -> bool {
        match self {
            Region::Et => label == 4,
            Region::Tc => label == 1 || label == 4,
            Region::Wt => label == 1 || label == 2 || label == 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Et => "ET",
            Region::Tc => "TC",
            Region::Wt => "WT",
        }
    }
}

pub fn region_mask(labels: &Volume<u8>, region: Region) -> Result<Volume<bool>> {
    if let Some(i) = labels.data().iter().position(|&l| !matches!(l, 0 | 1 | 2 | 4)) {
        let [x, y, _] = labels.dims();
        return Err(Error::Data(format!(
            "label {} at voxel ({}, {}, {}) is not one of 0, 1, 2, 4",
            labels.data()[i],
            i % x,
            (i / x) % y,
            i / (x * y)
        )));
    }
    Ok(labels.map(|&l| region.contains(l)))
}

/// Dice overlap in percent; two empty masks score 100.
pub fn dice(pred: &Volume<bool>, gt: &Volume<bool>) -> Result<f64> {
    pred.ensure_same_dims(gt)?;
    dice_slices(pred.data(), gt.data())
}

pub fn dice_slices(pred: &[bool], gt: &[bool]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!("{} vs {} voxels", pred.len(), gt.len())));
    }
    let (mut inter, mut p, mut g) = (0usize, 0usize, 0usize);
    for (&a, &b) in pred.iter().zip(gt) {
        inter += (a && b) as usize;
        p += a as usize;
        g += b as usize;
    }
    if p + g == 0 {
        return Ok(100.0);
    }
    Ok(100.0 * 2.0 * inter as f64 / (p + g) as f64)
}

/// ET, TC and WT dice of one label volume against the truth.
pub fn region_dice(pred: &Volume<u8>, gt: &Volume<u8>) -> Result<[f64; 3]> {
    pred.ensure_same_dims(gt)?;
    let mut out = [0.0; 3];
    for (o, region) in out.iter_mut().zip(Region::ALL) {
        *o = dice(&region_mask(pred, region)?, &region_mask(gt, region)?)?;
    }
    Ok(out)
}

/// One row of a Dice table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceRecord {
    /// Scenario bit string, or `avg`.
    pub scenario: String,
    pub dice_et: f64,
    pub dice_tc: f64,
    pub dice_wt: f64,
    pub method: String,
}

impl DiceRecord {
    pub fn is_avg(&self) -> bool {
        self.scenario == AVG_ROW
    }

    pub fn values(&self) -> [f64; 3] {
        [self.dice_et, self.dice_tc, self.dice_wt]
    }

    pub fn region(&self, region: Region) -> f64 {
        match region {
            Region::Et => self.dice_et,
            Region::Tc => self.dice_tc,
            Region::Wt => self.dice_wt,
        }
    }
}

/// Unweighted mean of scenario rows, ignoring any existing avg row.
pub fn avg_row(rows: &[DiceRecord], method: &str) -> Result<DiceRecord> {
    let rows: Vec<_> = rows.iter().filter(|r| !r.is_avg()).collect();
    if rows.is_empty() {
        return Err(Error::Data("no scenario rows to average".into()));
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&DiceRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    Ok(DiceRecord {
        scenario: AVG_ROW.into(),
        dice_et: mean(|r| r.dice_et),
        dice_tc: mean(|r| r.dice_tc),
        dice_wt: mean(|r| r.dice_wt),
        method: method.into(),
    })
}

/// Per-scenario, per-patient region dice collected before averaging.
#[derive(Debug, Clone, Default)]
pub struct DiceAccumulator {
    cases: BTreeMap<ScenarioMask, BTreeMap<String, [f64; 3]>>,
}

impl DiceAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mask: ScenarioMask, patient_id: &str, values: [f64; 3]) {
        self.cases
            .entry(mask)
            .or_default()
            .insert(patient_id.to_string(), values);
    }

    /// Rows in `scenarios` order plus the avg row.
    ///
    /// Every scenario must cover the same patients.
    pub fn finish(&self, scenarios: &[ScenarioMask], method: &str) -> Result<Vec<DiceRecord>> {
        let mut reference: Option<(ScenarioMask, BTreeSet<&String>)> = None;
        let mut rows = Vec::new();
        for &mask in scenarios {
            let cases = self
                .cases
                .get(&mask)
                .filter(|c| !c.is_empty())
                .ok_or_else(|| Error::Data(format!("scenario {mask} has no segmentations")))?;
            let ids: BTreeSet<&String> = cases.keys().collect();
            match &reference {
                None => reference = Some((mask, ids)),
                Some((first, r)) if *r != ids => {
                    let diff: Vec<_> = r.symmetric_difference(&ids).map(|s| s.as_str()).collect();
                    return Err(Error::Data(format!(
                        "scenarios {first} and {mask} cover different patients: {}",
                        diff.join(", ")
                    )));
                }
                Some(_) => {}
            }
            let n = cases.len() as f64;
            let mean = |k: usize| cases.values().map(|v| v[k]).sum::<f64>() / n;
            rows.push(DiceRecord {
                scenario: mask.to_bit_string(),
                dice_et: mean(0),
                dice_tc: mean(1),
                dice_wt: mean(2),
                method: method.into(),
            });
        }
        let avg = avg_row(&rows, method)?;
        rows.push(avg);
        Ok(rows)
    }
}

/// Dice rows from `(scenario, patient, prediction, truth)` label volumes.
pub fn evaluate_segmentation<I>(cases: I, scenarios: &[ScenarioMask], method: &str) -> Result<Vec<DiceRecord>>
where
    I: IntoIterator<Item = Result<(ScenarioMask, String, Volume<u8>, Volume<u8>)>>,
{
    let mut acc = DiceAccumulator::new();
    for case in cases {
        let (mask, pid, pred, gt) = case?;
        acc.add(mask, &pid, region_dice(&pred, &gt)?);
    }
    acc.finish(scenarios, method)
}

/// The 15 segmentation scenarios in table order, ending with all modalities present.
pub fn segmentation_scenarios() -> Vec<ScenarioMask> {
    enumerate_scenarios(true)
}

pub fn write_dice_csv(path: &Path, rows: &[DiceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dice_csv(path: &Path) -> Result<Vec<DiceRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let expected = ["scenario", "dice_et", "dice_tc", "dice_wt", "method"];
    if headers.iter().collect::<Vec<_>>() != expected {
        let missing: Vec<_> = expected.iter().filter(|c| !headers.iter().any(|h| h == **c)).collect();
        return Err(Error::Data(format!(
            "{}: expected columns {} (missing {missing:?})",
            path.display(),
            expected.join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_membership() {
        let v = Volume::from_vec([4, 1, 1], vec![0u8, 1, 2, 4]).unwrap();
        let et = region_mask(&v, Region::Et).unwrap();
        let tc = region_mask(&v, Region::Tc).unwrap();
        let wt = region_mask(&v, Region::Wt).unwrap();
        assert_eq!(et.data(), &[false, false, false, true]);
        assert_eq!(tc.data(), &[false, true, false, true]);
        assert_eq!(wt.data(), &[false, true, true, true]);
        let bad = Volume::from_vec([2, 1, 1], vec![0u8, 3]).unwrap();
        assert!(matches!(region_mask(&bad, Region::Wt), Err(Error::Data(_))));
    }

    #[test]
    fn dice_counts() {
        let m = |v: &[bool]| Volume::from_vec([v.len(), 1, 1], v.to_vec()).unwrap();
        assert_eq!(dice(&m(&[true, true, false]), &m(&[true, true, false])).unwrap(), 100.0);
        assert_eq!(dice(&m(&[true, false]), &m(&[false, true])).unwrap(), 0.0);
        assert_eq!(dice(&m(&[false, false]), &m(&[false, false])).unwrap(), 100.0);
        let d = dice(&m(&[true, false, false]), &m(&[true, true, false])).unwrap();
        assert!((d - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn patient_mismatch_is_reported() {
        let s = segmentation_scenarios();
        let mut acc = DiceAccumulator::new();
        for &m in &s {
            acc.add(m, "A", [100.0; 3]);
        }
        acc.add(s[3], "B", [50.0; 3]);
        assert!(matches!(acc.finish(&s, "x"), Err(Error::Data(_))));
    }
}
