//! Checkpoints: a single JSON container with every parameter tensor, the
//! model and training configs, seed, and best-validation metadata. JSON
//! float serialization is shortest-round-trip, so reloads are bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{GruModel, ModelConfig, ModelParams};
use super::train::TrainConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub params: ModelParams,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let text = serde_json::to_string(checkpoint)?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            ckpt.version
        )));
    }
    if !ckpt.params.all_finite() {
        return Err(Error::invalid("checkpoint contains non-finite parameters"));
    }
    Ok(ckpt)
}

impl Checkpoint {
    pub fn model(&self) -> GruModel {
        GruModel {
            config: self.model_config,
            params: self.params.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trips_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt.json");
        let config = ModelConfig {
            embed_dim: 3,
            enc_hidden: 4,
            dec_hidden: 4,
            attn_dim: 2,
            landmark_count: 2,
            output_steps: 4,
        };
        let model = GruModel::new(config, 77);
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            model_config: config,
            train_config: TrainConfig::default(),
            params: model.params.clone(),
            best_epoch: 12,
            best_val_loss: 0.034,
        };
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.params, ckpt.params);
        assert_eq!(back.best_epoch, 12);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt.json");
        let config = ModelConfig {
            embed_dim: 2,
            enc_hidden: 2,
            dec_hidden: 2,
            attn_dim: 2,
            landmark_count: 1,
            output_steps: 1,
        };
        let ckpt = Checkpoint {
            version: 999,
            model_config: config,
            train_config: TrainConfig::default(),
            params: ModelParams::zeros(&config),
            best_epoch: 0,
            best_val_loss: 0.0,
        };
        save_checkpoint(&path, &ckpt).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
