//! Attention-based generative model for normalized landmark displacements:
//! a one-layer GRU encoder over speaker turn embeddings, a listener-mean
//! initialized hidden state, conditioning-vector injection into the decoder
//! initialization, additive attention between encoder outputs and the
//! decoder state, and a recursive one-layer GRU decoder.

pub mod ablation;
mod backward;
mod checkpoint;
pub mod data;
mod embed;
mod model;
mod train;

pub use ablation::{evaluate_model, run_ablation_suite, AblationSuite, InstanceMetrics, RunMetrics};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use embed::{
    embed_audio, read_embedding_file, write_embedding_file, AudioEmbeddingSequence,
    EmbeddingProvider, FileBackedProvider, SyntheticProvider, TurnAudio, EMBED_HOP_S,
    MAX_CONTEXT_FRAMES,
};
pub use model::{AttentionOutput, Forward, GruModel, ModelConfig, ModelInput, ModelParams};
pub use train::{teacher_forcing_prob, teacher_forcing_prob_with, train, validation_loss, EpochStats, TrainConfig, TrainOutcome};

use serde::{Deserialize, Serialize};

/// Input ablations. All share identical parameter shapes: disabled inputs
/// are zeroed rather than removed, so differences are informational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    SpeakerOnly,
    SpeakerListener,
    SpeakerListenerCond,
    SpeakerCond,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::SpeakerOnly,
        Ablation::SpeakerListener,
        Ablation::SpeakerListenerCond,
        Ablation::SpeakerCond,
    ];

    pub fn uses_listener(self) -> bool {
        matches!(self, Ablation::SpeakerListener | Ablation::SpeakerListenerCond)
    }

    pub fn uses_conditioning(self) -> bool {
        matches!(self, Ablation::SpeakerListenerCond | Ablation::SpeakerCond)
    }

    pub fn label(self) -> &'static str {
        match self {
            Ablation::SpeakerOnly => "speaker_only",
            Ablation::SpeakerListener => "speaker_listener",
            Ablation::SpeakerListenerCond => "speaker_listener_cond",
            Ablation::SpeakerCond => "speaker_cond",
        }
    }

    /// Human-readable report name.
    pub fn display_name(self) -> &'static str {
        match self {
            Ablation::SpeakerOnly => "Speaker only (Baseline)",
            Ablation::SpeakerListener => "Speaker and Listener",
            Ablation::SpeakerListenerCond => "Speaker and Listener with Conditioning vector",
            Ablation::SpeakerCond => "Speaker and Conditioning vector",
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "speaker_only" | "s" => Ok(Ablation::SpeakerOnly),
            "speaker_listener" | "sl" => Ok(Ablation::SpeakerListener),
            "speaker_listener_cond" | "slc" => Ok(Ablation::SpeakerListenerCond),
            "speaker_cond" | "sc" => Ok(Ablation::SpeakerCond),
            other => Err(crate::error::Error::invalid(format!(
                "unknown ablation `{other}`"
            ))),
        }
    }
}
