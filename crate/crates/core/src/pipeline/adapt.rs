//! Adaptation: checkpoint + instance in, a facial-parameter command out.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::adapter::{emit_command, landmarks_to_params, CommandSink, EmitAck, SmileCommand};
use crate::error::{Error, Result};
use crate::landmark::{reconstruct, DisplacementSequence, LandmarkFrame, LandmarkIndexMap, LandmarkSequence};
use crate::seq2seq::data::InstanceBundle;
use crate::seq2seq::load_checkpoint;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SinkSpec {
    File { path: PathBuf },
    Endpoint { url: String, spool: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub checkpoint: PathBuf,
    pub instance: PathBuf,
    pub index_map: Option<PathBuf>,
    pub sink: SinkSpec,
}

/// Generates displacements for one instance, reconstructs the landmark
/// frames, converts them to facial parameters, and emits the command.
pub fn adapt(config: &AdaptConfig) -> Result<(SmileCommand, EmitAck)> {
    let ckpt = load_checkpoint(&config.checkpoint)?;
    let bundle = InstanceBundle::load(&config.instance)?;
    let index_map = match &config.index_map {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            serde_json::from_str::<LandmarkIndexMap>(&text)?
        }
        None => LandmarkIndexMap::default_68(),
    };

    let model = ckpt.model();
    let frames = model.generate(
        &bundle.model_input(),
        None,
        bundle.target.len(),
        ckpt.train_config.ablation,
    )?;
    let disp = DisplacementSequence::from_flat_rows(
        &frames,
        bundle.fps,
        Some(bundle.normalization.clone()),
    )?;
    let last = LandmarkFrame::from_flat(&bundle.last_frame)?;
    let rec = reconstruct(&last, &disp)?;
    // the command reflects the generated frames; the seed frame is context
    let generated = LandmarkSequence::new(rec.frames[1..].to_vec(), bundle.fps, bundle.window_start_s)?;
    let (_, command) = landmarks_to_params(&generated, &index_map)?;

    let sink = match &config.sink {
        SinkSpec::File { path } => CommandSink::File(path.clone()),
        SinkSpec::Endpoint { url, spool } => CommandSink::Endpoint {
            url: url.clone(),
            spool_path: spool.clone(),
        },
    };
    let ack = emit_command(&command, &sink)?;
    Ok((command, ack))
}
