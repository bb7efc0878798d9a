//! Per-instance bundles: everything the model and the evaluator need about
//! one smile/non-smile window, serialized one JSON file per instance by the
//! preprocess step.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::ModelInput;
use crate::corpus::{Intensity, Side, WindowKind};
use crate::error::{Error, Result};
use crate::landmark::NormalizationParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceBundle {
    pub id: String,
    pub dyad_id: String,
    pub listener_side: Side,
    pub kind: WindowKind,
    pub intensity: Option<Intensity>,
    pub window_start_s: f64,
    pub duration_s: f64,
    /// Speaker turn embeddings, T x D.
    pub speaker_frames: Vec<Vec<f64>>,
    /// Mean of the listener's previous-turn embeddings, D.
    pub listener_mean: Vec<f64>,
    pub conditioning: [f64; 6],
    /// Normalized displacement targets, steps x 2K.
    pub target: Vec<Vec<f64>>,
    /// Min-max parameters for inverting the targets.
    pub normalization: NormalizationParams,
    /// Aligned landmark frame at the window start, flat 2K.
    pub last_frame: Vec<f64>,
    /// Ground-truth aligned landmarks over the horizon (after the seed
    /// frame), steps x 2K.
    pub gt_frames: Vec<Vec<f64>>,
    /// Downsampled frame rate of the displacement grid.
    pub fps: f64,
}

impl InstanceBundle {
    pub fn model_input(&self) -> ModelInput<'_> {
        ModelInput {
            speaker: &self.speaker_frames,
            listener_mean: &self.listener_mean,
            conditioning: &self.conditioning,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Loads every `*.instance.json` under `dir`, sorted by instance id.
pub fn load_instance_dir(dir: &Path) -> Result<Vec<InstanceBundle>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir.display().to_string(), e))?;
        let path = entry.path();
        if path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".instance.json"))
        {
            out.push(InstanceBundle::load(&path)?);
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(id: &str) -> InstanceBundle {
        InstanceBundle {
            id: id.into(),
            dyad_id: "d0".into(),
            listener_side: Side::Left,
            kind: WindowKind::Smile,
            intensity: Some(Intensity::B),
            window_start_s: 12.0,
            duration_s: 1.5,
            speaker_frames: vec![vec![0.1, 0.2]; 3],
            listener_mean: vec![0.3, -0.1],
            conditioning: [1.0, 0.0, 0.5, -0.5, 0.2, 0.1],
            target: vec![vec![0.5; 4]; 8],
            normalization: NormalizationParams {
                min: vec![0.0; 4],
                max: vec![1.0; 4],
                constant: vec![false; 4],
            },
            last_frame: vec![0.0, 0.0, 1.0, 1.0],
            gt_frames: vec![vec![0.1; 4]; 8],
            fps: 25.0 / 3.0,
        }
    }

    #[test]
    fn bundle_round_trips_and_dir_loads_sorted() {
        let dir = tempfile::tempdir().unwrap();
        for id in ["i_002", "i_000", "i_001"] {
            bundle(id)
                .save(&dir.path().join(format!("{id}.instance.json")))
                .unwrap();
        }
        let loaded = load_instance_dir(dir.path()).unwrap();
        assert_eq!(loaded.len(), 3);
        assert_eq!(loaded[0].id, "i_000");
        assert_eq!(loaded[2].id, "i_002");
        assert_eq!(loaded[1], bundle("i_001"));
    }
}
