//! Published reference values, used as baselines and fixtures.
//!
//! Sample counts of published rows are unknown and stored as 0.

use crate::error::{Error, Result};
use crate::eval::{DiceRecord, MetricsRecord, AVG_ROW, MEAN_ROW};

/// scenario, MSE org/ours, PSNR org/ours, SSIM org/ours.
pub const SYNTHESIS_TABLE: [(&str, [f64; 6]); 14] = [
    ("0001", [0.0143, 0.0107, 23.196, 23.4940, 0.8973, 0.9007]),
    ("0010", [0.0072, 0.0086, 24.524, 24.1919, 0.8984, 0.9052]),
    ("0100", [0.0102, 0.0121, 23.469, 22.9292, 0.9074, 0.9033]),
    ("1000", [0.0072, 0.0097, 24.879, 23.6690, 0.9091, 0.9018]),
    ("0011", [0.0060, 0.0055, 25.863, 26.1124, 0.9166, 0.9332]),
    ("0101", [0.0136, 0.0108, 22.900, 23.9051, 0.9156, 0.9211]),
    ("0110", [0.0073, 0.0087, 24.792, 24.4054, 0.9140, 0.9182]),
    ("1001", [0.0073, 0.0069, 26.189, 25.3669, 0.9264, 0.9259]),
    ("1010", [0.0040, 0.0075, 26.150, 24.4325, 0.9107, 0.9069]),
    ("1100", [0.0068, 0.0091, 25.242, 24.0843, 0.9175, 0.9103]),
    ("0111", [0.0091, 0.0072, 24.173, 25.9732, 0.9228, 0.9436]),
    ("1011", [0.0017, 0.0031, 28.678, 27.2154, 0.9349, 0.9404]),
    ("1101", [0.0098, 0.0090, 24.372, 24.8936, 0.9239, 0.9241]),
    ("1110", [0.0033, 0.0084, 26.397, 23.6391, 0.9150, 0.9016]),
];

pub const SYNTHESIS_MEAN: [f64; 6] = [0.0082, 0.0084, 24.789, 24.5937, 0.9120, 0.9169];

/// scenario, ET ACN/mmDM, TC ACN/mmDM, WT ACN/mmDM, in the published row order.
pub const DICE_TABLE: [(&str, [f64; 6]); 15] = [
    ("0001", [42.98, 11.27, 67.94, 20.36, 85.55, 82.78]),
    ("0010", [78.07, 77.55, 84.18, 77.75, 80.52, 68.07]),
    ("0100", [41.52, 16.50, 71.18, 29.53, 79.34, 76.31]),
    ("1000", [42.77, 6.66, 67.72, 17.52, 87.30, 56.66]),
    ("0011", [75.65, 80.61, 84.41, 83.21, 86.41, 88.25]),
    ("0110", [75.21, 80.82, 84.59, 83.69, 80.05, 83.94]),
    ("1100", [43.71, 18.00, 71.30, 34.50, 87.49, 80.71]),
    ("0101", [47.39, 17.79, 73.28, 35.27, 85.50, 87.05]),
    ("1001", [45.96, 13.45, 71.61, 32.20, 87.75, 86.53]),
    ("1010", [77.46, 77.97, 83.35, 79.44, 88.28, 71.23]),
    ("1110", [76.16, 80.19, 84.25, 83.34, 88.96, 84.75]),
    ("1101", [42.09, 23.30, 67.86, 42.62, 88.35, 87.53]),
    ("1011", [75.97, 79.71, 82.85, 84.01, 88.34, 88.64]),
    ("0111", [76.10, 81.21, 84.67, 84.49, 86.90, 89.64]),
    ("1111", [77.06, 80.12, 85.18, 83.62, 89.22, 89.41]),
];

pub const DICE_AVG: [f64; 6] = [61.21, 49.68, 77.62, 58.10, 85.92, 81.43];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PublishedSynthesis {
    Org,
    Ours,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PublishedDice {
    Acn,
    Mmdm,
}

impl PublishedDice {
    pub fn tag(self) -> &'static str {
        match self {
            PublishedDice::Acn => "ACN-published",
            PublishedDice::Mmdm => "mmDM-published",
        }
    }
}

/// Published synthesis rows, without the mean row.
pub fn synthesis_rows(which: PublishedSynthesis) -> Vec<MetricsRecord> {
    let k = which as usize;
    SYNTHESIS_TABLE
        .iter()
        .map(|(s, v)| MetricsRecord {
            scenario: s.to_string(),
            mse: v[k],
            psnr: v[2 + k],
            ssim: v[4 + k],
            n_samples: 0,
        })
        .collect()
}

/// Published synthesis rows followed by the printed mean row.
pub fn synthesis_table(which: PublishedSynthesis) -> Vec<MetricsRecord> {
    let k = which as usize;
    let mut rows = synthesis_rows(which);
    rows.push(MetricsRecord {
        scenario: MEAN_ROW.into(),
        mse: SYNTHESIS_MEAN[k],
        psnr: SYNTHESIS_MEAN[2 + k],
        ssim: SYNTHESIS_MEAN[4 + k],
        n_samples: 0,
    });
    rows
}

/// Published Dice rows in the published order, without the avg row.
pub fn dice_rows(which: PublishedDice) -> Vec<DiceRecord> {
    let k = which as usize;
    DICE_TABLE
        .iter()
        .map(|(s, v)| DiceRecord {
            scenario: s.to_string(),
            dice_et: v[k],
            dice_tc: v[2 + k],
            dice_wt: v[4 + k],
            method: which.tag().into(),
        })
        .collect()
}

/// Published Dice rows followed by the printed avg row.
pub fn dice_table(which: PublishedDice) -> Vec<DiceRecord> {
    let k = which as usize;
    let mut rows = dice_rows(which);
    rows.push(DiceRecord {
        scenario: AVG_ROW.into(),
        dice_et: DICE_AVG[k],
        dice_tc: DICE_AVG[2 + k],
        dice_wt: DICE_AVG[4 + k],
        method: which.tag().into(),
    });
    rows
}

pub const PUBLISHED_PREFIX: &str = "published:";

/// Resolves `published:org` or `published:ours`.
pub fn published_metrics(name: &str) -> Result<Vec<MetricsRecord>> {
    match name.strip_prefix(PUBLISHED_PREFIX) {
        Some("org") => Ok(synthesis_table(PublishedSynthesis::Org)),
        Some("ours") => Ok(synthesis_table(PublishedSynthesis::Ours)),
        _ => Err(Error::Config(format!(
            "unknown published metrics {name:?} (expected published:org or published:ours)"
        ))),
    }
}

/// Resolves `published:acn` or `published:mmdm`, without the printed avg row.
pub fn published_dice(name: &str) -> Result<Vec<DiceRecord>> {
    match name.strip_prefix(PUBLISHED_PREFIX) {
        Some("acn") => Ok(dice_rows(PublishedDice::Acn)),
        Some("mmdm") => Ok(dice_rows(PublishedDice::Mmdm)),
        _ => Err(Error::Config(format!(
            "unknown published dice table {name:?} (expected published:acn or published:mmdm)"
        ))),
    }
}
