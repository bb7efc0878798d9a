//! Embodied-agent adapter: converts generated landmark sequences into
//! facial-parameter commands (lip-corner smile plus eyebrow raise) and
//! delivers them to a file or a remote facial-parameter endpoint.

mod sink;
pub mod stub;

pub use sink::{command_to_json, emit_command, parse_command_json, CommandSink, EmitAck, AGENT_ENDPOINT_ENV};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landmark::{LandmarkIndexMap, LandmarkSequence};

/// One frame of facial parameters, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacialParamFrame {
    pub mouth_smile_left: f64,
    pub mouth_smile_right: f64,
    pub brow_up_left: f64,
    pub brow_up_right: f64,
}

impl FacialParamFrame {
    pub fn values(&self) -> [f64; 4] {
        [
            self.mouth_smile_left,
            self.mouth_smile_right,
            self.brow_up_left,
            self.brow_up_right,
        ]
    }
}

/// A smile command: the parameters at the widest-smile frame plus timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileCommand {
    pub params: FacialParamFrame,
    pub duration_s: f64,
    pub onset_s: f64,
    /// Dimensions that never moved (their parameter sits at the neutral
    /// 0.5); downstream may suppress actuation for fully neutral commands.
    pub neutral: [bool; 4],
}

/// Frame with the maximum horizontal lip-corner separation; earliest frame
/// wins ties. Invariant to uniform translation of all landmarks.
pub fn widest_smile_frame(seq: &LandmarkSequence, index_map: &LandmarkIndexMap) -> Result<usize> {
    index_map.validate(seq.landmark_count())?;
    let mut best_idx = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, frame) in seq.frames.iter().enumerate() {
        let width =
            (frame.points[index_map.right_lip_corner].x - frame.points[index_map.left_lip_corner].x).abs();
        if width > best {
            best = width;
            best_idx = i;
        }
    }
    Ok(best_idx)
}

/// Converts landmarks to per-frame facial parameters plus a [`SmileCommand`].
///
/// Lip-corner parameters follow each corner's cumulative horizontal
/// displacement from frame 0 (outward-positive), brow parameters the mean
/// cumulative vertical displacement (upward-positive), each min-max
/// normalized to [0, 1] over the sequence; motionless dimensions sit at the
/// neutral 0.5. The command takes the widest-smile frame's values and
/// `frame_count / fps` as its duration.
pub fn landmarks_to_params(
    seq: &LandmarkSequence,
    index_map: &LandmarkIndexMap,
) -> Result<(Vec<FacialParamFrame>, SmileCommand)> {
    if seq.len() < 2 {
        return Err(Error::invalid("need at least 2 frames for displacements"));
    }
    index_map.validate(seq.landmark_count())?;
    let first = &seq.frames[0];
    let n = seq.len();

    // raw cumulative displacement tracks, one per output parameter
    let mut tracks = vec![vec![0.0f64; n]; 4];
    for (i, frame) in seq.frames.iter().enumerate() {
        // left corner moves outward = -x, right corner outward = +x
        tracks[0][i] =
            -(frame.points[index_map.left_lip_corner].x - first.points[index_map.left_lip_corner].x);
        tracks[1][i] =
            frame.points[index_map.right_lip_corner].x - first.points[index_map.right_lip_corner].x;
        // image y grows downward; brow raise is -dy
        let brow_mean = |idxs: &[usize], f: &crate::landmark::LandmarkFrame| -> f64 {
            idxs.iter().map(|&p| f.points[p].y).sum::<f64>() / idxs.len() as f64
        };
        tracks[2][i] = -(brow_mean(&index_map.left_brow, frame) - brow_mean(&index_map.left_brow, first));
        tracks[3][i] = -(brow_mean(&index_map.right_brow, frame) - brow_mean(&index_map.right_brow, first));
    }

    let mut neutral = [false; 4];
    let mut scaled = vec![vec![0.5f64; n]; 4];
    for (d, track) in tracks.iter().enumerate() {
        let min = track.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = track.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == min {
            neutral[d] = true; // stays at 0.5
        } else {
            for (i, &v) in track.iter().enumerate() {
                scaled[d][i] = (v - min) / (max - min);
            }
        }
    }

    let frames: Vec<FacialParamFrame> = (0..n)
        .map(|i| FacialParamFrame {
            mouth_smile_left: scaled[0][i],
            mouth_smile_right: scaled[1][i],
            brow_up_left: scaled[2][i],
            brow_up_right: scaled[3][i],
        })
        .collect();

    let widest = widest_smile_frame(seq, index_map)?;
    let command = SmileCommand {
        params: frames[widest],
        duration_s: n as f64 / seq.fps,
        onset_s: seq.t0,
        neutral,
    };
    Ok((frames, command))
}
