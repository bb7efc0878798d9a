//! Dyad corpus: manifests, smile annotations, turn transcripts, reliability
//! filtering, non-smile augmentation, and dyad-level splits.

mod augment;
mod manifest;
mod split;
pub mod synth;
mod tables;

pub use augment::{sample_nonsmile_windows, DyadWindowMeta};
pub use manifest::{load_manifest, write_manifest, ManifestLoad, RejectedDyad};
pub use split::split_by_dyad;
pub use synth::{generate_synthetic_corpus, SyntheticSpec};
pub use tables::{
    read_annotations_csv, read_turns_csv, write_annotations_csv, write_turns_csv,
};

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sex::Male => write!(f, "male"),
            Sex::Female => write!(f, "female"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relationship {
    Siblings,
    Friends,
    Paternal,
    Romantic,
}

impl Relationship {
    pub const ALL: [Relationship; 4] = [
        Relationship::Siblings,
        Relationship::Friends,
        Relationship::Paternal,
        Relationship::Romantic,
    ];
}

impl fmt::Display for Relationship {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Relationship::Siblings => "siblings",
            Relationship::Friends => "friends",
            Relationship::Paternal => "paternal",
            Relationship::Romantic => "romantic",
        };
        write!(f, "{s}")
    }
}

/// Which half of the frame a participant occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(Error::invalid(format!("unknown side `{other}`"))),
        }
    }
}

/// Ordinal smile amplitude, `A` (trace) through `E` (maximum).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Intensity {
    A,
    B,
    C,
    D,
    E,
}

impl Intensity {
    pub const ALL: [Intensity; 5] = [
        Intensity::A,
        Intensity::B,
        Intensity::C,
        Intensity::D,
        Intensity::E,
    ];

    /// Ordinal score used by the GLM (A=1 .. E=5).
    pub fn score(self) -> f64 {
        match self {
            Intensity::A => 1.0,
            Intensity::B => 2.0,
            Intensity::C => 3.0,
            Intensity::D => 4.0,
            Intensity::E => 5.0,
        }
    }

    pub fn parse(s: &str) -> Result<Option<Intensity>> {
        match s.trim() {
            "" => Ok(None),
            "A" | "a" => Ok(Some(Intensity::A)),
            "B" | "b" => Ok(Some(Intensity::B)),
            "C" | "c" => Ok(Some(Intensity::C)),
            "D" | "d" => Ok(Some(Intensity::D)),
            "E" | "e" => Ok(Some(Intensity::E)),
            other => Err(Error::invalid(format!("unknown intensity `{other}`"))),
        }
    }
}

impl fmt::Display for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Intensity::A => "A",
            Intensity::B => "B",
            Intensity::C => "C",
            Intensity::D => "D",
            Intensity::E => "E",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonMeta {
    pub person_id: String,
    pub sex: Sex,
}

/// Per-side file references, relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidePaths {
    pub left: PathBuf,
    pub right: PathBuf,
}

impl SidePaths {
    pub fn get(&self, side: Side) -> &PathBuf {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

/// One dyadic interaction and its media references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadRecord {
    pub dyad_id: String,
    pub relationship: Relationship,
    pub left_person: PersonMeta,
    pub right_person: PersonMeta,
    pub video_fps: f64,
    pub video_duration_s: f64,
    /// Landmarks per frame in this dyad's landmark files.
    pub landmark_count: usize,
    pub audio: SidePaths,
    pub landmarks: SidePaths,
    pub transcripts: SidePaths,
}

impl DyadRecord {
    pub fn person(&self, side: Side) -> &PersonMeta {
        match side {
            Side::Left => &self.left_person,
            Side::Right => &self.right_person,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.video_fps <= 0.0 {
            return Err(Error::invalid(format!("dyad {}: fps must be positive", self.dyad_id)));
        }
        if self.video_duration_s <= 0.0 {
            return Err(Error::invalid(format!(
                "dyad {}: duration must be positive",
                self.dyad_id
            )));
        }
        if self.left_person.person_id == self.right_person.person_id {
            return Err(Error::invalid(format!(
                "dyad {}: the two person ids must differ",
                self.dyad_id
            )));
        }
        if self.landmark_count == 0 {
            return Err(Error::invalid(format!(
                "dyad {}: landmark_count must be positive",
                self.dyad_id
            )));
        }
        Ok(())
    }
}

/// A labeled backchannel smile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileAnnotation {
    pub dyad_id: String,
    pub listener_side: Side,
    pub onset_s: f64,
    pub offset_s: f64,
    pub intensity: Option<Intensity>,
}

impl SmileAnnotation {
    pub fn duration(&self) -> f64 {
        self.offset_s - self.onset_s
    }

    pub fn validate(&self, video_duration: Option<f64>) -> Result<()> {
        if !(self.onset_s >= 0.0 && self.onset_s < self.offset_s) {
            return Err(Error::invalid(format!(
                "annotation in dyad {}: need 0 <= onset < offset",
                self.dyad_id
            )));
        }
        if let Some(d) = video_duration {
            if self.offset_s > d + 1e-9 {
                return Err(Error::invalid(format!(
                    "annotation in dyad {}: offset {} beyond video duration {d}",
                    self.dyad_id, self.offset_s
                )));
            }
        }
        Ok(())
    }
}

/// One forced-aligned word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub token: String,
    pub start_s: f64,
    pub end_s: f64,
}

/// One speaker-identified turn with word-level timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnSegment {
    pub id: String,
    pub dyad_id: String,
    pub side: Side,
    pub start_s: f64,
    pub end_s: f64,
    pub words: Vec<Word>,
}

impl TurnSegment {
    pub fn validate(&self) -> Result<()> {
        if self.start_s >= self.end_s {
            return Err(Error::invalid(format!(
                "turn {}: start must precede end",
                self.id
            )));
        }
        let mut last = self.start_s;
        for w in &self.words {
            if w.start_s < self.start_s - 1e-9 || w.end_s > self.end_s + 1e-9 {
                return Err(Error::invalid(format!(
                    "turn {}: word `{}` outside turn interval",
                    self.id, w.token
                )));
            }
            if w.start_s < last - 1e-9 {
                return Err(Error::invalid(format!(
                    "turn {}: word starts are not non-decreasing",
                    self.id
                )));
            }
            last = w.start_s;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Smile,
    NonSmile,
}

/// A smile or non-smile training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceWindow {
    pub dyad_id: String,
    pub listener_side: Side,
    pub kind: WindowKind,
    pub window_start_s: f64,
    pub window_end_s: f64,
    pub intensity: Option<Intensity>,
    pub speaker_turn: Option<String>,
    pub listener_turn: Option<String>,
}

impl InstanceWindow {
    pub fn duration(&self) -> f64 {
        self.window_end_s - self.window_start_s
    }
}

/// Dyad-level train/validation/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_dyads: Vec<String>,
    pub val_dyads: Vec<String>,
    pub test_dyads: Vec<String>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn contains(&self, dyad_id: &str) -> bool {
        self.train_dyads.iter().any(|d| d == dyad_id)
            || self.val_dyads.iter().any(|d| d == dyad_id)
            || self.test_dyads.iter().any(|d| d == dyad_id)
    }
}

/// Keeps annotations whose predicted intensity is A-level or higher and
/// whose duration does not exceed `max_duration`, attaching the predicted
/// intensity to the kept annotations.
///
/// `max_duration` of `None` uses mean + 4·stddev of the durations of the
/// intensity-reliable annotations as the outlier cutoff.
pub fn filter_reliable_smiles(
    annotations: &[SmileAnnotation],
    predicted_intensity: &BTreeMap<usize, Option<Intensity>>,
    max_duration: Option<f64>,
) -> Result<Vec<SmileAnnotation>> {
    for (idx, a) in annotations.iter().enumerate() {
        if !predicted_intensity.contains_key(&idx) {
            return Err(Error::missing(format!(
                "no predicted intensity for annotation {idx} (dyad {}, onset {})",
                a.dyad_id, a.onset_s
            )));
        }
    }
    let reliable: Vec<(usize, Intensity)> = predicted_intensity
        .iter()
        .filter_map(|(&idx, level)| level.map(|l| (idx, l)))
        .collect();
    let cutoff = match max_duration {
        Some(d) => d,
        None => {
            let durations: Vec<f64> = reliable
                .iter()
                .map(|&(idx, _)| annotations[idx].duration())
                .collect();
            if durations.is_empty() {
                f64::INFINITY
            } else {
                let n = durations.len() as f64;
                let mean = durations.iter().sum::<f64>() / n;
                let var = durations.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
                mean + 4.0 * var.sqrt()
            }
        }
    };
    Ok(reliable
        .into_iter()
        .filter(|&(idx, _)| annotations[idx].duration() <= cutoff)
        .map(|(idx, level)| {
            let mut a = annotations[idx].clone();
            a.intensity = Some(level);
            a
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(dyad: &str, onset: f64, offset: f64) -> SmileAnnotation {
        SmileAnnotation {
            dyad_id: dyad.into(),
            listener_side: Side::Left,
            onset_s: onset,
            offset_s: offset,
            intensity: None,
        }
    }

    #[test]
    fn filter_keeps_reliable_and_drops_duration_outlier() {
        // 191 annotations; 158 get a predicted level; one of those is a
        // duration outlier -> 157 kept.
        let mut annotations = Vec::new();
        let mut predicted = BTreeMap::new();
        for i in 0..191 {
            let duration = if i == 0 { 60.0 } else { 2.0 + (i % 7) as f64 * 0.25 };
            annotations.push(ann("d", 10.0, 10.0 + duration));
            predicted.insert(
                i,
                if i < 158 { Some(Intensity::B) } else { None },
            );
        }
        let kept = filter_reliable_smiles(&annotations, &predicted, None).unwrap();
        assert_eq!(kept.len(), 157);
        assert!(kept.iter().all(|a| a.intensity == Some(Intensity::B)));
    }

    #[test]
    fn all_none_predictions_keep_nothing() {
        let annotations = vec![ann("d", 0.0, 1.0), ann("d", 5.0, 6.0)];
        let mut predicted = BTreeMap::new();
        predicted.insert(0, None);
        predicted.insert(1, None);
        assert!(filter_reliable_smiles(&annotations, &predicted, None)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn single_b_level_below_cutoff_is_kept() {
        let annotations = vec![ann("d", 0.0, 1.5)];
        let mut predicted = BTreeMap::new();
        predicted.insert(0, Some(Intensity::B));
        let kept = filter_reliable_smiles(&annotations, &predicted, Some(10.0)).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].intensity, Some(Intensity::B));
    }

    #[test]
    fn missing_prediction_names_the_annotation() {
        let annotations = vec![ann("dyad9", 3.0, 4.0)];
        let predicted = BTreeMap::new();
        let err = filter_reliable_smiles(&annotations, &predicted, None).unwrap_err();
        assert!(err.to_string().contains("dyad9"));
    }

    #[test]
    fn intensity_ordering_and_scores() {
        assert!(Intensity::A < Intensity::E);
        assert_eq!(Intensity::A.score(), 1.0);
        assert_eq!(Intensity::E.score(), 5.0);
        assert_eq!(Intensity::parse("").unwrap(), None);
        assert_eq!(Intensity::parse("C").unwrap(), Some(Intensity::C));
        assert!(Intensity::parse("F").is_err());
    }
}
