//! Modality ordering, scenario masks and the curriculum drop schedule.
//!
//! The scenario string (`"0011"` etc.) is the identifier used in file
//! names, manifests, reports and CLI flags. Bit order is T1, T2, T1c, T2f;
//! `1` means the modality is present, `0` that it is missing and must be
//! synthesized.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

pub const MODALITY_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    T1,
    T2,
    T1c,
    T2f,
}

impl Modality {
    pub const ALL: [Modality; MODALITY_COUNT] =
        [Modality::T1, Modality::T2, Modality::T1c, Modality::T2f];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<Self> {
        Self::ALL.get(ordinal).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::T1 => "T1",
            Modality::T2 => "T2",
            Modality::T1c => "T1c",
            Modality::T2f => "T2f",
        }
    }

    /// BraTS file suffix (`<patient>_<suffix>.nii.gz`).
    pub fn file_suffix(self) -> &'static str {
        match self {
            Modality::T1 => "t1",
            Modality::T2 => "t2",
            Modality::T1c => "t1ce",
            Modality::T2f => "flair",
        }
    }

    pub fn from_file_suffix(suffix: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.file_suffix() == suffix)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Presence mask over the four modalities. Bit `i` set = modality `i` present.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScenarioMask(u8);

impl ScenarioMask {
    pub const FULL: ScenarioMask = ScenarioMask(0b1111);
    pub const EMPTY: ScenarioMask = ScenarioMask(0);

    pub fn from_present(present: [bool; MODALITY_COUNT]) -> Self {
        let bits = present
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &p)| acc | ((p as u8) << i));
        ScenarioMask(bits)
    }

    pub fn is_present(self, m: Modality) -> bool {
        self.bit(m.ordinal())
    }

    #[inline]
    pub fn bit(self, ordinal: usize) -> bool {
        self.0 >> ordinal & 1 == 1
    }

    pub fn present_count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn missing_count(self) -> usize {
        MODALITY_COUNT - self.present_count()
    }

    pub fn missing(self) -> impl Iterator<Item = Modality> {
        Modality::ALL.into_iter().filter(move |m| !self.is_present(*m))
    }

    pub fn present(self) -> impl Iterator<Item = Modality> {
        Modality::ALL.into_iter().filter(move |m| self.is_present(*m))
    }

    /// At least one modality present and at least one missing.
    pub fn is_synthesis_scenario(self) -> bool {
        (1..MODALITY_COUNT).contains(&self.present_count())
    }

    pub fn to_bit_string(self) -> String {
        (0..MODALITY_COUNT)
            .map(|i| if self.bit(i) { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for ScenarioMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bit_string())
    }
}

impl fmt::Debug for ScenarioMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScenarioMask({self})")
    }
}

impl FromStr for ScenarioMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() != MODALITY_COUNT {
            return Err(Error::Data(format!(
                "scenario {s:?} must have exactly {MODALITY_COUNT} characters"
            )));
        }
        let mut present = [false; MODALITY_COUNT];
        for (i, ch) in s.chars().enumerate() {
            present[i] = match ch {
                '1' => true,
                '0' => false,
                _ => {
                    return Err(Error::Data(format!(
                        "scenario {s:?} contains {ch:?}; only '0' and '1' are allowed"
                    )))
                }
            };
        }
        Ok(Self::from_present(present))
    }
}

impl Serialize for ScenarioMask {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_bit_string())
    }
}

impl<'de> Deserialize<'de> for ScenarioMask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All synthesis scenarios in reporting order: grouped by missing count
/// (3, 2, 1), lexicographic within a group. Appends `1111` when `include_full`.
pub fn enumerate_scenarios(include_full: bool) -> Vec<ScenarioMask> {
    let mut strings: Vec<String> = (1u8..15)
        .map(|bits| {
            (0..MODALITY_COUNT)
                .map(|i| if bits >> (MODALITY_COUNT - 1 - i) & 1 == 1 { '1' } else { '0' })
                .collect()
        })
        .collect();
    strings.sort_by(|a, b| {
        let ones = |s: &String| s.bytes().filter(|&c| c == b'1').count();
        ones(a).cmp(&ones(b)).then_with(|| a.cmp(b))
    });
    let mut out: Vec<ScenarioMask> = strings
        .iter()
        .map(|s| s.parse().expect("generated scenario string"))
        .collect();
    if include_full {
        out.push(ScenarioMask::FULL);
    }
    out
}

/// Parses `all`, `all+full`, or a comma-separated list of scenario strings.
pub fn parse_scenario_list(spec: &str) -> Result<Vec<ScenarioMask>> {
    match spec.trim() {
        "all" => Ok(enumerate_scenarios(false)),
        "all+full" => Ok(enumerate_scenarios(true)),
        list => list
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<Vec<_>>>(),
    }
}

/// Three-phase curriculum: at most 1, then 2, then 3 dropped modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    total_epochs: usize,
    phase_boundaries: [usize; 2],
}

impl CurriculumSchedule {
    /// Splits `total_epochs` into three (near-)equal phases.
    pub fn new(total_epochs: usize) -> Result<Self> {
        let first = total_epochs.div_ceil(3);
        let second = (2 * total_epochs).div_ceil(3);
        Self::with_boundaries(total_epochs, [first, second])
    }

    /// Phase 2 starts at `boundaries[0]`, phase 3 at `boundaries[1]`.
    pub fn with_boundaries(total_epochs: usize, boundaries: [usize; 2]) -> Result<Self> {
        if total_epochs == 0 {
            return Err(Error::Config("total_epochs must be positive".into()));
        }
        if boundaries[0] > boundaries[1] || boundaries[1] > total_epochs {
            return Err(Error::Config(format!(
                "phase boundaries {boundaries:?} must be nondecreasing within [0, {total_epochs}]"
            )));
        }
        Ok(Self {
            total_epochs,
            phase_boundaries: boundaries,
        })
    }

    pub fn total_epochs(&self) -> usize {
        self.total_epochs
    }

    pub fn phase_boundaries(&self) -> [usize; 2] {
        self.phase_boundaries
    }

    pub fn max_drop(&self, epoch: usize) -> Result<usize> {
        if epoch >= self.total_epochs {
            return Err(Error::Range(format!(
                "epoch {epoch} outside [0, {})",
                self.total_epochs
            )));
        }
        Ok(if epoch < self.phase_boundaries[0] {
            1
        } else if epoch < self.phase_boundaries[1] {
            2
        } else {
            3
        })
    }
}

/// Uniform drop count in `1..=max_drop`, then a uniform subset of that size marked missing.
pub fn sample_scenario<R: Rng + ?Sized>(max_drop: usize, rng: &mut R) -> Result<ScenarioMask> {
    if !(1..MODALITY_COUNT).contains(&max_drop) {
        return Err(Error::Range(format!("max_drop {max_drop} not in 1..=3")));
    }
    let drop = rng.gen_range(1..=max_drop);
    let mut present = [true; MODALITY_COUNT];
    for i in sample(rng, MODALITY_COUNT, drop) {
        present[i] = false;
    }
    Ok(ScenarioMask::from_present(present))
}

/// Zeroes the channels marked missing; present channels are copied unchanged.
pub fn apply_scenario<F: Scalar>(sample: &Image<F>, mask: ScenarioMask) -> Result<Image<F>> {
    if sample.channels() != MODALITY_COUNT {
        return Err(Error::Shape(format!(
            "expected {MODALITY_COUNT} channels, got {}",
            sample.channels()
        )));
    }
    let mut out = sample.clone();
    for m in mask.missing() {
        out.channel_mut(m.ordinal()).fill(F::zero());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn masks(list: &[&str]) -> Vec<ScenarioMask> {
        list.iter().map(|s| s.parse().unwrap()).collect()
    }

    #[test]
    fn enumeration_matches_report_order() {
        let expected = masks(&[
            "0001", "0010", "0100", "1000", "0011", "0101", "0110", "1001", "1010", "1100",
            "0111", "1011", "1101", "1110",
        ]);
        assert_eq!(enumerate_scenarios(false), expected);
        let full = enumerate_scenarios(true);
        assert_eq!(full.len(), 15);
        assert_eq!(full[14].to_string(), "1111");
        assert_eq!(expected.len(), (1 << 4) - 2);
    }

    #[test]
    fn string_form_is_modality_ordered() {
        let m: ScenarioMask = "0001".parse().unwrap();
        assert!(m.is_present(Modality::T2f));
        assert_eq!(m.missing().collect::<Vec<_>>(), vec![Modality::T1, Modality::T2, Modality::T1c]);
        assert_eq!(m.present_count() + m.missing_count(), 4);
        assert!("00011".parse::<ScenarioMask>().is_err());
        assert!("00a1".parse::<ScenarioMask>().is_err());
    }

    #[test]
    fn curriculum_defaults() {
        let s = CurriculumSchedule::new(60).unwrap();
        assert_eq!(s.max_drop(0).unwrap(), 1);
        assert_eq!(s.max_drop(25).unwrap(), 2);
        assert_eq!(s.max_drop(59).unwrap(), 3);
        assert!(matches!(s.max_drop(60), Err(Error::Range(_))));
        assert!(CurriculumSchedule::with_boundaries(10, [6, 4]).is_err());
        assert!(CurriculumSchedule::new(0).is_err());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| sample_scenario(3, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert!(sample_scenario(0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert!(sample_scenario(4, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn apply_scenario_cases() {
        let x = Image::<f32>::filled(4, 3, 3, 1.0);
        assert_eq!(apply_scenario(&x, ScenarioMask::FULL).unwrap(), x);
        assert!(apply_scenario(&x, ScenarioMask::EMPTY)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        let y = apply_scenario(&x, "0101".parse().unwrap()).unwrap();
        for c in [0, 2] {
            assert!(y.channel(c).iter().all(|&v| v == 0.0));
        }
        for c in [1, 3] {
            assert!(y.channel(c).iter().all(|&v| v == 1.0));
        }
        let bad = Image::<f32>::zeros(3, 2, 2);
        assert!(matches!(apply_scenario(&bad, ScenarioMask::FULL), Err(Error::Shape(_))));
    }
}
