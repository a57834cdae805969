use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Volume;
use crate::scalar::Scalar;
use crate::scenario::{enumerate_scenarios, ScenarioMask, MODALITY_COUNT};

use super::metrics::{dynamic_range, mse, psnr_from_mse, ssim_with, SsimParams};

pub const MEAN_ROW: &str = "mean";

/// One row of a synthesis metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Scenario bit string, or `mean`.
    pub scenario: String,
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
    #[serde(rename = "n")]
    pub n_samples: usize,
}

impl MetricsRecord {
    pub fn mask(&self) -> Option<ScenarioMask> {
        self.scenario.parse().ok()
    }

    pub fn is_mean(&self) -> bool {
        self.scenario == MEAN_ROW
    }
}

/// How per-slice values are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Metrics per slice and channel, averaged over slices, channels and patients.
    #[default]
    PerSlice,
    /// MSE and range over each whole channel volume; SSIM averaged over its slices.
    PerVolume,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-slice" => Ok(Aggregation::PerSlice),
            "per-volume" => Ok(Aggregation::PerVolume),
            other => Err(Error::Config(format!(
                "unknown aggregation {other:?} (expected per-slice or per-volume)"
            ))),
        }
    }
}

/// Unweighted mean of scenario rows, ignoring any existing mean row.
pub fn mean_row(rows: &[MetricsRecord]) -> Result<MetricsRecord> {
    let rows: Vec<_> = rows.iter().filter(|r| !r.is_mean()).collect();
    if rows.is_empty() {
        return Err(Error::Data("no scenario rows to average".into()));
    }
    let n = rows.len() as f64;
    Ok(MetricsRecord {
        scenario: MEAN_ROW.into(),
        mse: rows.iter().map(|r| r.mse).sum::<f64>() / n,
        psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / n,
        ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        n_samples: rows.iter().map(|r| r.n_samples).sum(),
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    mse: f64,
    psnr: f64,
    ssim: f64,
    n: usize,
}

impl Sums {
    fn add(&mut self, mse: f64, psnr: f64, ssim: f64) {
        self.mse += mse;
        self.psnr += psnr;
        self.ssim += ssim;
        self.n += 1;
    }
}

/// Metric sums of one (patient, scenario) pair, mergeable in any grouping.
#[derive(Debug, Clone, Default)]
pub struct CaseMetrics {
    sums: Sums,
}

impl CaseMetrics {
    pub fn samples(&self) -> usize {
        self.sums.n
    }
}

/// Metrics of the missing channels of one synthesized case.
///
/// Ground-truth slices with zero dynamic range (no brain) are skipped.
pub fn case_metrics<F: Scalar>(
    mask: ScenarioMask,
    synthesized: &[Volume<F>; MODALITY_COUNT],
    truth: &[Volume<F>; MODALITY_COUNT],
    aggregation: Aggregation,
    params: SsimParams,
) -> Result<CaseMetrics> {
    let mut sums = Sums::default();
    for m in mask.missing() {
        let c = m.ordinal();
        let (pred, gt) = (&synthesized[c], &truth[c]);
        pred.ensure_same_dims(gt)?;
        let [x, y, z] = gt.dims();
        let kept: Vec<usize> = (0..z).filter(|&k| dynamic_range(gt.axial(k)) > 0.0).collect();
        match aggregation {
            Aggregation::PerSlice => {
                for &k in &kept {
                    let (p, g) = (pred.axial(k), gt.axial(k));
                    let r = dynamic_range(g);
                    let e = mse(p, g)?;
                    sums.add(e, psnr_from_mse(e, r)?, ssim_with(p, g, y, x, r, params)?);
                }
            }
            Aggregation::PerVolume => {
                if kept.is_empty() {
                    continue;
                }
                let r = dynamic_range(gt.data());
                let mut sq = 0.0;
                let mut ss = 0.0;
                for &k in &kept {
                    let (p, g) = (pred.axial(k), gt.axial(k));
                    sq += mse(p, g)? * g.len() as f64;
                    ss += ssim_with(p, g, y, x, r, params)?;
                }
                let e = sq / (kept.len() * x * y) as f64;
                sums.add(e, psnr_from_mse(e, r)?, ss / kept.len() as f64);
            }
        }
    }
    Ok(CaseMetrics { sums })
}

/// Per-scenario aggregation of synthesis metrics over patients.
#[derive(Debug, Clone, Default)]
pub struct SynthesisAccumulator {
    sums: BTreeMap<ScenarioMask, Sums>,
}

impl SynthesisAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mask: ScenarioMask, case: &CaseMetrics) {
        let s = self.sums.entry(mask).or_default();
        s.mse += case.sums.mse;
        s.psnr += case.sums.psnr;
        s.ssim += case.sums.ssim;
        s.n += case.sums.n;
    }

    /// Rows in `scenarios` order followed by the mean row.
    ///
    /// Scenarios without missing channels are dropped with a warning.
    pub fn finish(&self, scenarios: &[ScenarioMask]) -> Result<Vec<MetricsRecord>> {
        let mut rows = Vec::new();
        for &mask in scenarios {
            if mask.missing_count() == 0 {
                log::warn!("scenario {mask} has no missing channel; excluded from metrics");
                continue;
            }
            let s = self.sums.get(&mask).copied().unwrap_or_default();
            if s.n == 0 {
                return Err(Error::Data(format!("scenario {mask} has no evaluable slice")));
            }
            let n = s.n as f64;
            rows.push(MetricsRecord {
                scenario: mask.to_bit_string(),
                mse: s.mse / n,
                psnr: s.psnr / n,
                ssim: s.ssim / n,
                n_samples: s.n,
            });
        }
        let mean = mean_row(&rows)?;
        rows.push(mean);
        Ok(rows)
    }
}

/// Evaluates synthesized volumes against the truth.
///
/// `cases` yields `(scenario, synthesized, truth)` per patient and scenario.
pub fn evaluate_synthesis<F, I>(
    cases: I,
    scenarios: &[ScenarioMask],
    aggregation: Aggregation,
) -> Result<Vec<MetricsRecord>>
where
    F: Scalar,
    I: IntoIterator<Item = Result<(ScenarioMask, [Volume<F>; MODALITY_COUNT], [Volume<F>; MODALITY_COUNT])>>,
{
    let mut acc = SynthesisAccumulator::new();
    for case in cases {
        let (mask, synth, truth) = case?;
        acc.add(mask, &case_metrics(mask, &synth, &truth, aggregation, SsimParams::default())?);
    }
    acc.finish(scenarios)
}

/// The 14 synthesis scenarios in table order.
pub fn synthesis_scenarios() -> Vec<ScenarioMask> {
    enumerate_scenarios(false)
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["scenario", "mse", "psnr", "ssim", "n"] {
        return Err(Error::Data(format!(
            "{}: expected columns scenario,mse,psnr,ssim,n",
            path.display()
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(s: &str, mse: f64) -> MetricsRecord {
        MetricsRecord { scenario: s.into(), mse, psnr: 10.0 * mse, ssim: 0.5, n_samples: 2 }
    }

    #[test]
    fn mean_row_ignores_existing_mean() {
        let rows = vec![row("0001", 1.0), row("0010", 3.0), row(MEAN_ROW, 100.0)];
        let m = mean_row(&rows).unwrap();
        assert_eq!(m.mse, 2.0);
        assert_eq!(m.psnr, 20.0);
        assert_eq!(m.n_samples, 4);
    }

    #[test]
    fn perfect_synthesis() {
        let v = Volume::from_fn([12, 12, 3], |x, y, z| (x * 3 + y * 5 + z) as f64 + 1.0);
        let vols = [v.clone(), v.clone(), v.clone(), v];
        let masks = synthesis_scenarios();
        let cases = masks.iter().map(|&m| Ok((m, vols.clone(), vols.clone())));
        let rows = evaluate_synthesis(cases, &masks, Aggregation::PerSlice).unwrap();
        assert_eq!(rows.len(), 15);
        for r in &rows {
            assert_eq!(r.mse, 0.0);
            assert!((r.ssim - 1.0).abs() < 1e-9);
        }
    }
}
