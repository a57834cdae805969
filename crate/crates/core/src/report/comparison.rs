use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{mean_row, MetricsRecord, MEAN_ROW};

use super::plot::grouped_bars;

/// One row of a synthesis comparison; differences are positive when ours is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub mse_baseline: f64,
    pub mse_ours: f64,
    pub psnr_baseline: f64,
    pub psnr_ours: f64,
    pub ssim_baseline: f64,
    pub ssim_ours: f64,
    /// baseline − ours
    pub mse_diff: f64,
    /// ours − baseline
    pub psnr_diff: f64,
    /// ours − baseline
    pub ssim_diff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferenceRow<'a> {
    pub scenario: &'a str,
    pub mse_diff: f64,
    pub psnr_diff: f64,
    pub ssim_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Scenario rows in the order of `ours`, then the mean row.
    pub rows: Vec<ComparisonRow>,
}

fn row(scenario: &str, b: &MetricsRecord, o: &MetricsRecord) -> ComparisonRow {
    ComparisonRow {
        scenario: scenario.into(),
        mse_baseline: b.mse,
        mse_ours: o.mse,
        psnr_baseline: b.psnr,
        psnr_ours: o.psnr,
        ssim_baseline: b.ssim,
        ssim_ours: o.ssim,
        mse_diff: b.mse - o.mse,
        psnr_diff: o.psnr - b.psnr,
        ssim_diff: o.ssim - b.ssim,
    }
}

/// Pairs scenario rows of two metric tables.
///
/// A mean row carried by an input is used as is; otherwise it is recomputed.
pub fn render_comparison(ours: &[MetricsRecord], baseline: &[MetricsRecord]) -> Result<Comparison> {
    let index = |rows: &[MetricsRecord]| -> BTreeMap<String, MetricsRecord> {
        rows.iter()
            .filter(|r| !r.is_mean())
            .map(|r| (r.scenario.clone(), r.clone()))
            .collect()
    };
    let (oi, bi) = (index(ours), index(baseline));
    let ok: BTreeSet<_> = oi.keys().collect();
    let bk: BTreeSet<_> = bi.keys().collect();
    if ok != bk {
        let only_ours: Vec<_> = ok.difference(&bk).map(|s| s.as_str()).collect();
        let only_base: Vec<_> = bk.difference(&ok).map(|s| s.as_str()).collect();
        return Err(Error::Data(format!(
            "scenario sets differ: missing from baseline [{}], missing from ours [{}]",
            only_ours.join(", "),
            only_base.join(", ")
        )));
    }
    let mut rows: Vec<ComparisonRow> = ours
        .iter()
        .filter(|r| !r.is_mean())
        .map(|o| row(&o.scenario, &bi[&o.scenario], o))
        .collect();
    let carried = |rows: &[MetricsRecord]| -> Result<MetricsRecord> {
        match rows.iter().find(|r| r.is_mean()) {
            Some(m) => Ok(m.clone()),
            None => mean_row(rows),
        }
    };
    rows.push(row(MEAN_ROW, &carried(baseline)?, &carried(ours)?));
    Ok(Comparison { rows })
}

impl Comparison {
    pub fn mean(&self) -> &ComparisonRow {
        self.rows.last().expect("mean row")
    }

    pub fn scenario_rows(&self) -> &[ComparisonRow] {
        &self.rows[..self.rows.len() - 1]
    }

    /// Writes `comparison.csv`, `differences.csv` and `differences.svg`.
    pub fn write(&self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let table = out_dir.join("comparison.csv");
        let mut w = csv::Writer::from_path(&table)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(&table, e))?;

        let diffs = out_dir.join("differences.csv");
        let mut w = csv::Writer::from_path(&diffs)?;
        for r in &self.rows {
            w.serialize(DifferenceRow {
                scenario: &r.scenario,
                mse_diff: r.mse_diff,
                psnr_diff: r.psnr_diff,
                ssim_diff: r.ssim_diff,
            })?;
        }
        w.flush().map_err(|e| Error::io(&diffs, e))?;

        let mut written = vec![table, diffs];
        let cats: Vec<String> = self.scenario_rows().iter().map(|r| r.scenario.clone()).collect();
        for (name, f) in [
            ("mse", (|r: &ComparisonRow| r.mse_diff) as fn(&ComparisonRow) -> f64),
            ("psnr", |r| r.psnr_diff),
            ("ssim", |r| r.ssim_diff),
        ] {
            let path = out_dir.join(format!("difference_{name}.svg"));
            let vals = self.scenario_rows().iter().map(f).collect();
            grouped_bars(
                &path,
                &format!("{} difference (positive: ours better)", name.to_uppercase()),
                &cats,
                &[(name.to_uppercase(), vals)],
            )?;
            written.push(path);
        }
        Ok(written)
    }
}
