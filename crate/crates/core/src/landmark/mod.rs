//! Facial landmark sequences and the displacement pipeline.
//!
//! Raw per-frame landmarks are aligned to the dataset mean face with a
//! per-frame least-squares similarity transform, downsampled, converted to
//! successive-frame displacements, and min-max normalized per instance.
//! Generated displacements run the same path in reverse.

mod align;
mod io;
mod pipeline;

pub use align::{align_to_mean_face, compute_mean_face, similarity_fit, stable_residual, SimilarityTransform};
pub use io::{read_landmark_csv, write_landmark_csv};
pub use pipeline::{downsample, minmax_normalize, reconstruct, to_displacements};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2-D landmark position. Pixel units before alignment, mean-face units
/// after.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// One frame of K landmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFrame {
    pub points: Vec<Point>,
}

impl LandmarkFrame {
    pub fn new(points: Vec<Point>) -> Self {
        LandmarkFrame { points }
    }

    pub fn landmark_count(&self) -> usize {
        self.points.len()
    }

    /// Flattens to `[x0, y0, x1, y1, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.points.len() * 2);
        for p in &self.points {
            out.push(p.x);
            out.push(p.y);
        }
        out
    }

    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if !values.len().is_multiple_of(2) {
            return Err(Error::invalid("flat landmark frame must have even length"));
        }
        Ok(LandmarkFrame {
            points: values
                .chunks_exact(2)
                .map(|c| Point::new(c[0], c[1]))
                .collect(),
        })
    }
}

/// A timestamped sequence of landmark frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSequence {
    pub frames: Vec<LandmarkFrame>,
    /// Frames per second.
    pub fps: f64,
    /// Capture time of the first frame, in seconds.
    pub t0: f64,
}

impl LandmarkSequence {
    pub fn new(frames: Vec<LandmarkFrame>, fps: f64, t0: f64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::invalid("landmark sequence must be non-empty"));
        }
        if fps <= 0.0 {
            return Err(Error::invalid("fps must be positive"));
        }
        let k = frames[0].landmark_count();
        if frames.iter().any(|f| f.landmark_count() != k) {
            return Err(Error::invalid("landmark count varies within sequence"));
        }
        if frames
            .iter()
            .any(|f| f.points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()))
        {
            return Err(Error::invalid("non-finite landmark coordinate"));
        }
        Ok(LandmarkSequence { frames, fps, t0 })
    }

    pub fn landmark_count(&self) -> usize {
        self.frames[0].landmark_count()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Dataset-average landmark configuration used as the alignment target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFace {
    pub points: Vec<Point>,
    /// Landmark indices the similarity fit is computed on (rigid parts of
    /// the face: eye corners and nose bridge by default).
    pub stable_subset: Vec<usize>,
}

/// Min-max normalization parameters, recorded per instance for inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    /// Per-dimension minimum over the sequence, `2K` values in
    /// `[dx0, dy0, dx1, dy1, ...]` order.
    pub min: Vec<f64>,
    /// Per-dimension maximum.
    pub max: Vec<f64>,
    /// Dimensions where `max == min`; these normalize to 0.5 and invert to
    /// their constant value.
    pub constant: Vec<bool>,
}

/// Successive-frame landmark displacements, optionally normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementSequence {
    /// `deltas[i] = frame[i+1] - frame[i]` (before normalization); length is
    /// one less than the source sequence.
    pub deltas: Vec<Vec<Point>>,
    pub fps: f64,
    pub normalization: Option<NormalizationParams>,
}

impl DisplacementSequence {
    pub fn landmark_count(&self) -> usize {
        self.deltas.first().map_or(0, |d| d.len())
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Flattens each delta frame to `[dx0, dy0, ...]` rows.
    pub fn to_flat_rows(&self) -> Vec<Vec<f64>> {
        self.deltas
            .iter()
            .map(|d| {
                let mut row = Vec::with_capacity(d.len() * 2);
                for p in d {
                    row.push(p.x);
                    row.push(p.y);
                }
                row
            })
            .collect()
    }

    /// Rebuilds a displacement sequence from flat rows, keeping `params`.
    pub fn from_flat_rows(
        rows: &[Vec<f64>],
        fps: f64,
        normalization: Option<NormalizationParams>,
    ) -> Result<Self> {
        let mut deltas = Vec::with_capacity(rows.len());
        for row in rows {
            deltas.push(LandmarkFrame::from_flat(row)?.points);
        }
        Ok(DisplacementSequence {
            deltas,
            fps,
            normalization,
        })
    }
}

/// Names the landmark indices the agent adapter and alignment care about.
///
/// Defaults follow the 68-point face layout (lip corners 48/54, brows 17-26,
/// eye corners 36/39/42/45, nose bridge 27-30); corpora with other layouts
/// supply their own map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkIndexMap {
    pub left_lip_corner: usize,
    pub right_lip_corner: usize,
    pub left_brow: Vec<usize>,
    pub right_brow: Vec<usize>,
    pub stable_subset: Vec<usize>,
}

impl LandmarkIndexMap {
    /// The 68-point layout.
    pub fn default_68() -> Self {
        LandmarkIndexMap {
            left_lip_corner: 48,
            right_lip_corner: 54,
            left_brow: (17..22).collect(),
            right_brow: (22..27).collect(),
            stable_subset: vec![36, 39, 42, 45, 27, 28, 29, 30],
        }
    }

    /// Compact 8-point layout used by the synthetic corpus: 0-3 stable (eye
    /// corners, nose bridge), 4/5 lip corners, 6/7 brows.
    pub fn synthetic_8() -> Self {
        LandmarkIndexMap {
            left_lip_corner: 4,
            right_lip_corner: 5,
            left_brow: vec![6],
            right_brow: vec![7],
            stable_subset: vec![0, 1, 2, 3],
        }
    }

    pub fn validate(&self, landmark_count: usize) -> Result<()> {
        let mut all: Vec<usize> = vec![self.left_lip_corner, self.right_lip_corner];
        all.extend(&self.left_brow);
        all.extend(&self.right_brow);
        all.extend(&self.stable_subset);
        if self.left_brow.is_empty() || self.right_brow.is_empty() {
            return Err(Error::missing("index map: empty brow index list"));
        }
        if self.stable_subset.is_empty() {
            return Err(Error::missing("index map: empty stable subset"));
        }
        if let Some(&bad) = all.iter().find(|&&i| i >= landmark_count) {
            return Err(Error::invalid(format!(
                "index map entry {bad} out of range for K={landmark_count}"
            )));
        }
        Ok(())
    }
}
