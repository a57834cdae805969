use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{avg_row, DiceRecord, Region, AVG_ROW};
use crate::scenario::{enumerate_scenarios, ScenarioMask};

use super::plot::grouped_bars;

/// Dice tables of several methods over a common scenario set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiceComparison {
    pub methods: Vec<String>,
    pub scenarios: Vec<String>,
    /// `values[m][s]` for method `m` and scenario `s`.
    pub values: Vec<Vec<[f64; 3]>>,
    /// Recomputed avg row per method.
    pub averages: Vec<[f64; 3]>,
}

fn canonical_rank(s: &str) -> usize {
    let order = enumerate_scenarios(true);
    s.parse::<ScenarioMask>()
        .ok()
        .and_then(|m| order.iter().position(|&o| o == m))
        .unwrap_or(usize::MAX)
}

/// Groups Dice rows by method. Any avg rows in the input are ignored and recomputed.
pub fn render_dice_comparison(records: &[DiceRecord]) -> Result<DiceComparison> {
    let mut by_method: BTreeMap<&str, BTreeMap<&str, [f64; 3]>> = BTreeMap::new();
    let mut methods: Vec<String> = Vec::new();
    for r in records.iter().filter(|r| !r.is_avg()) {
        if !by_method.contains_key(r.method.as_str()) {
            methods.push(r.method.clone());
        }
        if by_method
            .entry(&r.method)
            .or_default()
            .insert(&r.scenario, r.values())
            .is_some()
        {
            return Err(Error::Data(format!("duplicate row {} for {}", r.scenario, r.method)));
        }
    }
    if methods.len() < 2 {
        return Err(Error::Data(format!(
            "dice comparison needs at least two methods, found {}",
            methods.len()
        )));
    }
    let first: BTreeSet<&str> = by_method[methods[0].as_str()].keys().copied().collect();
    for m in &methods[1..] {
        let set: BTreeSet<&str> = by_method[m.as_str()].keys().copied().collect();
        if set != first {
            let diff: Vec<_> = first.symmetric_difference(&set).copied().collect();
            return Err(Error::Data(format!(
                "{} and {m} cover different scenarios: {}",
                methods[0],
                diff.join(", ")
            )));
        }
    }
    let mut scenarios: Vec<String> = first.iter().map(|s| s.to_string()).collect();
    scenarios.sort_by_key(|s| (canonical_rank(s), s.clone()));
    let mut values = Vec::new();
    let mut averages = Vec::new();
    for m in &methods {
        let rows = &by_method[m.as_str()];
        let v: Vec<[f64; 3]> = scenarios.iter().map(|s| rows[s.as_str()]).collect();
        let recs: Vec<DiceRecord> = scenarios
            .iter()
            .zip(&v)
            .map(|(s, d)| DiceRecord {
                scenario: s.clone(),
                dice_et: d[0],
                dice_tc: d[1],
                dice_wt: d[2],
                method: m.clone(),
            })
            .collect();
        averages.push(avg_row(&recs, m)?.values());
        values.push(v);
    }
    Ok(DiceComparison {
        methods,
        scenarios,
        values,
        averages,
    })
}

impl DiceComparison {
    fn method_index(&self, method: &str) -> Result<usize> {
        self.methods
            .iter()
            .position(|m| m == method)
            .ok_or_else(|| Error::Data(format!("no method {method:?}")))
    }

    pub fn average(&self, method: &str, region: Region) -> Result<f64> {
        Ok(self.averages[self.method_index(method)?][region as usize])
    }

    /// Synthesis scenarios (all modalities present excluded) where `method` scores below `threshold`.
    pub fn count_below(&self, method: &str, region: Region, threshold: f64) -> Result<usize> {
        let m = self.method_index(method)?;
        Ok(self
            .scenarios
            .iter()
            .zip(&self.values[m])
            .filter(|(s, v)| {
                s.parse::<ScenarioMask>().map(|k| k.is_synthesis_scenario()).unwrap_or(false)
                    && v[region as usize] < threshold
            })
            .count())
    }

    /// Writes the grouped table, per-region series and their bar charts.
    pub fn write(&self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let table = out_dir.join("dice_comparison.csv");
        let mut w = csv::Writer::from_path(&table)?;
        let mut header = vec!["scenario".to_string()];
        for r in Region::ALL {
            for m in &self.methods {
                header.push(format!("{}_{m}", r.name()));
            }
        }
        w.write_record(&header)?;
        let rows = self
            .scenarios
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), self.values.iter().map(|v| v[i]).collect::<Vec<_>>()))
            .chain(std::iter::once((AVG_ROW, self.averages.clone())));
        for (s, per_method) in rows {
            let mut rec = vec![s.to_string()];
            for r in Region::ALL {
                for v in &per_method {
                    rec.push(v[r as usize].to_string());
                }
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(&table, e))?;
        let mut written = vec![table];

        for r in Region::ALL {
            let name = r.name().to_lowercase();
            let path = out_dir.join(format!("dice_{name}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            let mut header = vec!["scenario".to_string()];
            header.extend(self.methods.iter().cloned());
            w.write_record(&header)?;
            for (i, s) in self.scenarios.iter().enumerate() {
                let mut rec = vec![s.clone()];
                rec.extend(self.values.iter().map(|v| v[i][r as usize].to_string()));
                w.write_record(&rec)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            written.push(path);

            let svg = out_dir.join(format!("dice_{name}.svg"));
            let series: Vec<(String, Vec<f64>)> = self
                .methods
                .iter()
                .zip(&self.values)
                .map(|(m, v)| (m.clone(), v.iter().map(|d| d[r as usize]).collect()))
                .collect();
            grouped_bars(&svg, &format!("Dice {}", r.name()), &self.scenarios, &series)?;
            written.push(svg);
        }
        Ok(written)
    }
}
