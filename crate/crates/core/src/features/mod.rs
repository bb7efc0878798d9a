//! Context features: prosody and lexical cues from speaker/listener turns,
//! corpus-wide z-scoring, and the fixed-order conditioning vector.

mod lexical;
mod prosody;
pub mod wav;
mod zscore;

pub use lexical::{count_lexical, default_lexicons, load_lexicons, write_lexicons, LexicalFeatures, Lexicons};
pub use prosody::{extract_prosody, ProsodyFeatures};
pub use zscore::{ZScoreModel, ZScoreSummary};

use serde::{Deserialize, Serialize};

use crate::corpus::{Sex, TurnSegment, Word};
use crate::error::{Error, Result};

/// Which conversational role a feature block was extracted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnRole {
    Speaker,
    Listener,
}

/// Prosody + lexical features of one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnFeatures {
    pub role: TurnRole,
    pub turn_id: String,
    pub prosody: ProsodyFeatures,
    pub lexical: LexicalFeatures,
}

/// Fixed order of the conditioning entries. The first is the raw 0/1
/// speaker-sex encoding; the remaining five are z-scored.
pub const CONDITIONING_ORDER: [&str; 6] = [
    "speaker_sex",
    "speaker_negations_z",
    "speaker_rms_z",
    "listener_word_count_z",
    "listener_comparisons_z",
    "listener_mean_pitch_z",
];

/// The 6-entry predictor vector injected into the decoder initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningVector {
    pub values: [f64; 6],
}

impl ConditioningVector {
    pub fn zeros() -> Self {
        ConditioningVector { values: [0.0; 6] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Continuous features that feed the conditioning vector, pre-z-scoring.
/// Kept together so the z-score model sees one consistent column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditioningInputs {
    pub speaker_negations: f64,
    pub speaker_rms: f64,
    pub listener_word_count: f64,
    pub listener_comparisons: f64,
    pub listener_mean_pitch: f64,
}

impl ConditioningInputs {
    pub fn from_turns(speaker: &TurnFeatures, listener: &TurnFeatures) -> Result<Self> {
        if speaker.role != TurnRole::Speaker || listener.role != TurnRole::Listener {
            return Err(Error::invalid("turn features passed with swapped roles"));
        }
        Ok(ConditioningInputs {
            speaker_negations: speaker.lexical.negations as f64,
            speaker_rms: speaker.prosody.rms_energy,
            listener_word_count: listener.lexical.word_count as f64,
            listener_comparisons: listener.lexical.comparisons as f64,
            listener_mean_pitch: listener.prosody.mean_pitch,
        })
    }

    pub fn to_array(self) -> [f64; 5] {
        [
            self.speaker_negations,
            self.speaker_rms,
            self.listener_word_count,
            self.listener_comparisons,
            self.listener_mean_pitch,
        ]
    }
}

/// Assembles the conditioning vector from the speaker's sex and the
/// z-scored continuous entries.
pub fn build_conditioning_vector(speaker_sex: Sex, z_scored: &[f64; 5]) -> ConditioningVector {
    let sex = match speaker_sex {
        Sex::Male => 0.0,
        Sex::Female => 1.0,
    };
    ConditioningVector {
        values: [
            sex, z_scored[0], z_scored[1], z_scored[2], z_scored[3], z_scored[4],
        ],
    }
}

/// Restricts a speaker turn to activity before the smile onset: words ending
/// by the onset are kept, and the audio span is `[turn start, onset]`.
pub fn trim_speaker_turn_to_onset(
    turn: &TurnSegment,
    onset_s: f64,
) -> Result<(TurnSegment, (f64, f64))> {
    if onset_s <= turn.start_s {
        return Err(Error::invalid(format!(
            "onset {onset_s} is not after turn start {}",
            turn.start_s
        )));
    }
    let end = onset_s.min(turn.end_s);
    let words: Vec<Word> = turn
        .words
        .iter()
        .filter(|w| w.end_s <= onset_s)
        .cloned()
        .collect();
    let trimmed = TurnSegment {
        id: turn.id.clone(),
        dyad_id: turn.dyad_id.clone(),
        side: turn.side,
        start_s: turn.start_s,
        end_s: end,
        words,
    };
    Ok((trimmed, (turn.start_s, onset_s.min(turn.end_s))))
}
