//! Mean-face computation and per-frame similarity alignment.

use super::{LandmarkFrame, LandmarkSequence, MeanFace, Point};
use crate::error::{Error, Result};

/// Translation + uniform scale + rotation, represented as a complex
/// coefficient `c` and offset: `f(p) = c * (p - src_centroid) + dst_centroid`.
#[derive(Debug, Clone, Copy)]
pub struct SimilarityTransform {
    pub c_re: f64,
    pub c_im: f64,
    pub src_centroid: Point,
    pub dst_centroid: Point,
}

impl SimilarityTransform {
    pub fn apply(&self, p: Point) -> Point {
        let dx = p.x - self.src_centroid.x;
        let dy = p.y - self.src_centroid.y;
        Point::new(
            self.c_re * dx - self.c_im * dy + self.dst_centroid.x,
            self.c_im * dx + self.c_re * dy + self.dst_centroid.y,
        )
    }
}

/// Least-squares similarity transform mapping `src` onto `dst`.
///
/// With points as complex numbers, the residual `sum |c*(p_i - p̄) + q̄ - q_i|²`
/// is minimized by `c = sum(conj(p_i - p̄) * (q_i - q̄)) / sum |p_i - p̄|²`,
/// which is the global optimum over translation, rotation, and uniform scale.
pub fn similarity_fit(src: &[Point], dst: &[Point]) -> Result<SimilarityTransform> {
    if src.len() != dst.len() || src.is_empty() {
        return Err(Error::invalid("similarity fit needs matching non-empty point sets"));
    }
    let n = src.len() as f64;
    let src_c = centroid(src);
    let dst_c = centroid(dst);
    let mut num_re = 0.0;
    let mut num_im = 0.0;
    let mut denom = 0.0;
    for (p, q) in src.iter().zip(dst) {
        let (px, py) = (p.x - src_c.x, p.y - src_c.y);
        let (qx, qy) = (q.x - dst_c.x, q.y - dst_c.y);
        // conj(p) * q
        num_re += px * qx + py * qy;
        num_im += px * qy - py * qx;
        denom += px * px + py * py;
    }
    if denom / n < 1e-24 {
        return Err(Error::Numerical(
            "degenerate stable subset: all alignment points coincide".into(),
        ));
    }
    Ok(SimilarityTransform {
        c_re: num_re / denom,
        c_im: num_im / denom,
        src_centroid: src_c,
        dst_centroid: dst_c,
    })
}

fn centroid(pts: &[Point]) -> Point {
    let n = pts.len() as f64;
    let (sx, sy) = pts
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point::new(sx / n, sy / n)
}

/// Pointwise arithmetic mean over all frames of all sequences.
pub fn compute_mean_face(
    sequences: &[LandmarkSequence],
    stable_subset: Vec<usize>,
) -> Result<MeanFace> {
    let first = sequences
        .first()
        .ok_or_else(|| Error::invalid("mean face requires at least one sequence"))?;
    let k = first.landmark_count();
    if sequences.iter().any(|s| s.landmark_count() != k) {
        return Err(Error::invalid("mixed landmark counts across sequences"));
    }
    if stable_subset.is_empty() || stable_subset.iter().any(|&i| i >= k) {
        return Err(Error::invalid("stable subset empty or out of range"));
    }
    let mut sums = vec![(0.0f64, 0.0f64); k];
    let mut n = 0u64;
    for seq in sequences {
        for frame in &seq.frames {
            for (s, p) in sums.iter_mut().zip(&frame.points) {
                s.0 += p.x;
                s.1 += p.y;
            }
            n += 1;
        }
    }
    let n = n as f64;
    Ok(MeanFace {
        points: sums
            .into_iter()
            .map(|(sx, sy)| Point::new(sx / n, sy / n))
            .collect(),
        stable_subset,
    })
}

/// Aligns every frame onto the mean face.
///
/// The transform is fitted on the stable subset only, then applied to all
/// K points, so expression motion does not leak into the rigid registration.
pub fn align_to_mean_face(seq: &LandmarkSequence, mean: &MeanFace) -> Result<LandmarkSequence> {
    let k = seq.landmark_count();
    if mean.points.len() != k {
        return Err(Error::invalid(format!(
            "mean face has {} points, sequence has {k}",
            mean.points.len()
        )));
    }
    let dst: Vec<Point> = mean.stable_subset.iter().map(|&i| mean.points[i]).collect();
    let mut frames = Vec::with_capacity(seq.len());
    for frame in &seq.frames {
        let src: Vec<Point> = mean.stable_subset.iter().map(|&i| frame.points[i]).collect();
        let t = similarity_fit(&src, &dst)?;
        frames.push(LandmarkFrame::new(
            frame.points.iter().map(|&p| t.apply(p)).collect(),
        ));
    }
    LandmarkSequence::new(frames, seq.fps, seq.t0)
}

/// Sum of squared residuals on the stable subset after applying `t`.
pub fn stable_residual(frame: &LandmarkFrame, mean: &MeanFace, t: &SimilarityTransform) -> f64 {
    mean.stable_subset
        .iter()
        .map(|&i| {
            let p = t.apply(frame.points[i]);
            let q = mean.points[i];
            (p.x - q.x).powi(2) + (p.y - q.y).powi(2)
        })
        .sum()
}
