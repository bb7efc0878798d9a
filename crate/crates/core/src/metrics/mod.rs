//! Generation quality metrics: average pose error, probability of correct
//! keypoints, run-pair significance over seeded repeats, and the
//! duration/intensity/configuration performance regression.

mod compare;
mod regression;

pub use compare::{compare_runs, wilcoxon_signed_rank, CompareOutcome};
pub use regression::{performance_regression, PerformanceRegression, RegressionRow};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landmark::LandmarkSequence;

/// PCK margins reported by default.
pub const DEFAULT_PCK_SIGMAS: [f64; 2] = [0.1, 0.2];

/// Average pose error: per frame, the mean Euclidean landmark distance;
/// frames averaged uniformly. Units follow the inputs (mean-face units for
/// the pipeline's aligned landmarks).
pub fn ape(pred: &LandmarkSequence, gt: &LandmarkSequence) -> Result<f64> {
    check_shapes(pred, gt)?;
    let k = pred.landmark_count() as f64;
    let total: f64 = pred
        .frames
        .iter()
        .zip(&gt.frames)
        .map(|(pf, gf)| {
            pf.points
                .iter()
                .zip(&gf.points)
                .map(|(a, b)| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt())
                .sum::<f64>()
                / k
        })
        .sum();
    Ok(total / pred.len() as f64)
}

/// Probability of correct keypoints at margin `sigma`: the fraction of
/// (frame, landmark) pairs within `sigma` of ground truth, boundary
/// inclusive.
pub fn pck(pred: &LandmarkSequence, gt: &LandmarkSequence, sigma: f64) -> Result<f64> {
    check_shapes(pred, gt)?;
    if sigma <= 0.0 {
        return Err(Error::invalid("sigma must be positive"));
    }
    let mut correct = 0usize;
    let mut total = 0usize;
    for (pf, gf) in pred.frames.iter().zip(&gt.frames) {
        for (a, b) in pf.points.iter().zip(&gf.points) {
            let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
            if d <= sigma {
                correct += 1;
            }
            total += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}

fn check_shapes(pred: &LandmarkSequence, gt: &LandmarkSequence) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "frame count mismatch: {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.landmark_count() != gt.landmark_count() {
        return Err(Error::invalid(format!(
            "landmark count mismatch: {} vs {}",
            pred.landmark_count(),
            gt.landmark_count()
        )));
    }
    Ok(())
}

/// APE plus PCK at the configured margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseErrorReport {
    pub ape: f64,
    /// (sigma, pck) pairs in ascending sigma order.
    pub pck_by_sigma: Vec<(f64, f64)>,
    /// Mean PCK over the configured margins.
    pub pck_mean: f64,
    pub landmark_count: usize,
    pub n_frames: usize,
}

impl PoseErrorReport {
    pub fn compute(
        pred: &LandmarkSequence,
        gt: &LandmarkSequence,
        sigmas: &[f64],
    ) -> Result<PoseErrorReport> {
        let mut pck_by_sigma = Vec::with_capacity(sigmas.len());
        for &sigma in sigmas {
            pck_by_sigma.push((sigma, pck(pred, gt, sigma)?));
        }
        let pck_mean =
            pck_by_sigma.iter().map(|(_, v)| v).sum::<f64>() / pck_by_sigma.len().max(1) as f64;
        Ok(PoseErrorReport {
            ape: ape(pred, gt)?,
            pck_by_sigma,
            pck_mean,
            landmark_count: pred.landmark_count(),
            n_frames: pred.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmark::{LandmarkFrame, Point};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(frames: Vec<Vec<(f64, f64)>>) -> LandmarkSequence {
        LandmarkSequence::new(
            frames
                .into_iter()
                .map(|pts| LandmarkFrame::new(pts.into_iter().map(|(x, y)| Point::new(x, y)).collect()))
                .collect(),
            25.0 / 3.0,
            0.0,
        )
        .unwrap()
    }

    fn random_pair(rng: &mut ChaCha8Rng, frames: usize, k: usize) -> (LandmarkSequence, LandmarkSequence) {
        let mk = |rng: &mut ChaCha8Rng| {
            seq((0..frames)
                .map(|_| (0..k).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
                .collect())
        };
        (mk(rng), mk(rng))
    }

    #[test]
    fn identical_sequences_are_perfect() {
        let a = seq(vec![vec![(0.0, 0.0), (1.0, 1.0)], vec![(2.0, 0.5), (0.0, 1.5)]]);
        assert_eq!(ape(&a, &a).unwrap(), 0.0);
        assert_eq!(pck(&a, &a, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn three_four_five_distance() {
        let p = seq(vec![vec![(3.0, 4.0)]]);
        let g = seq(vec![vec![(0.0, 0.0)]]);
        assert!((ape(&p, &g).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ape_averages_landmark_distances() {
        let p = seq(vec![vec![(1.0, 0.0), (0.0, 2.0)]]);
        let g = seq(vec![vec![(0.0, 0.0), (0.0, 0.0)]]);
        assert!((ape(&p, &g).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn pck_counts_boundary_as_correct() {
        // distances 0.05 and 0.2 with sigma 0.1 -> one of two correct
        let p = seq(vec![vec![(0.05, 0.0), (0.2, 0.0)]]);
        let g = seq(vec![vec![(0.0, 0.0), (0.0, 0.0)]]);
        assert!((pck(&p, &g, 0.1).unwrap() - 0.5).abs() < 1e-12);
        // boundary: distance exactly sigma counts
        assert!((pck(&p, &g, 0.2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_bruteforce_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for _ in 0..20 {
            let frames = rng.gen_range(1..17);
            let k = if rng.gen_bool(0.5) { 2 } else { 68 };
            let (p, g) = random_pair(&mut rng, frames, k);
            let sigma = rng.gen_range(0.05..1.5);

            let mut ape_sum = 0.0;
            let mut hits = 0usize;
            for f in 0..frames {
                let mut frame_sum = 0.0;
                for l in 0..k {
                    let a = p.frames[f].points[l];
                    let b = g.frames[f].points[l];
                    let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
                    frame_sum += d;
                    if d <= sigma {
                        hits += 1;
                    }
                }
                ape_sum += frame_sum / k as f64;
            }
            let ape_expect = ape_sum / frames as f64;
            let pck_expect = hits as f64 / (frames * k) as f64;
            assert!((ape(&p, &g).unwrap() - ape_expect).abs() < 1e-12);
            assert!((pck(&p, &g, sigma).unwrap() - pck_expect).abs() < 1e-12);
        }
    }

    #[test]
    fn pck_is_monotone_in_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let (p, g) = random_pair(&mut rng, 6, 5);
        let mut last = 0.0;
        for sigma in [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 4.0] {
            let v = pck(&p, &g, sigma).unwrap();
            assert!(v >= last);
            last = v;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn ape_detects_translation_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let (g, _) = random_pair(&mut rng, 4, 3);
        let shifted = seq(g
            .frames
            .iter()
            .map(|f| f.points.iter().map(|p| (p.x + 0.3, p.y - 0.4)).collect())
            .collect());
        assert!((ape(&shifted, &g).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let (p, g) = random_pair(&mut rng, 3, 6);
        let perm = [5usize, 2, 0, 4, 1, 3];
        let permute = |s: &LandmarkSequence| {
            seq(s.frames
                .iter()
                .map(|f| perm.iter().map(|&i| (f.points[i].x, f.points[i].y)).collect())
                .collect())
        };
        let (pp, gp) = (permute(&p), permute(&g));
        assert!((ape(&p, &g).unwrap() - ape(&pp, &gp).unwrap()).abs() < 1e-12);
        assert!((pck(&p, &g, 0.3).unwrap() - pck(&pp, &gp, 0.3).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = seq(vec![vec![(0.0, 0.0)]]);
        let b = seq(vec![vec![(0.0, 0.0)], vec![(0.0, 0.0)]]);
        assert!(ape(&a, &b).is_err());
        let c = seq(vec![vec![(0.0, 0.0), (1.0, 1.0)]]);
        assert!(pck(&a, &c, 0.1).is_err());
    }

    #[test]
    fn report_means_the_sigma_set() {
        let p = seq(vec![vec![(0.05, 0.0), (0.15, 0.0)]]);
        let g = seq(vec![vec![(0.0, 0.0), (0.0, 0.0)]]);
        let report = PoseErrorReport::compute(&p, &g, &DEFAULT_PCK_SIGMAS).unwrap();
        assert!((report.pck_by_sigma[0].1 - 0.5).abs() < 1e-12);
        assert!((report.pck_by_sigma[1].1 - 1.0).abs() < 1e-12);
        assert!((report.pck_mean - 0.75).abs() < 1e-12);
    }
}
