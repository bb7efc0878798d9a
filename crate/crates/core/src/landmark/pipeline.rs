//! Downsampling, displacement conversion, min-max normalization, and
//! reconstruction.

use super::{DisplacementSequence, LandmarkFrame, LandmarkSequence, NormalizationParams, Point};
use crate::error::{Error, Result};

/// Keeps frames at indices `0, factor, 2*factor, ...` and divides fps.
pub fn downsample(seq: &LandmarkSequence, factor: usize) -> Result<LandmarkSequence> {
    if factor < 1 {
        return Err(Error::invalid("downsample factor must be >= 1"));
    }
    let frames: Vec<LandmarkFrame> = seq.frames.iter().step_by(factor).cloned().collect();
    LandmarkSequence::new(frames, seq.fps / factor as f64, seq.t0)
}

/// Differences between successive frames.
pub fn to_displacements(seq: &LandmarkSequence) -> Result<DisplacementSequence> {
    if seq.len() < 2 {
        return Err(Error::invalid(
            "displacement needs at least two frames",
        ));
    }
    let deltas = seq
        .frames
        .windows(2)
        .map(|w| {
            w[0].points
                .iter()
                .zip(&w[1].points)
                .map(|(a, b)| Point::new(b.x - a.x, b.y - a.y))
                .collect()
        })
        .collect();
    Ok(DisplacementSequence {
        deltas,
        fps: seq.fps,
        normalization: None,
    })
}

/// Min-max normalizes each of the 2K dimensions into [0, 1].
///
/// Constant dimensions (max == min) map to 0.5 and are flagged so inversion
/// restores the constant. Parameters are recorded on the result.
pub fn minmax_normalize(disp: &DisplacementSequence) -> Result<DisplacementSequence> {
    if disp.normalization.is_some() {
        return Err(Error::invalid("displacement sequence is already normalized"));
    }
    if disp.is_empty() {
        return Err(Error::invalid("cannot normalize an empty displacement sequence"));
    }
    let dims = disp.landmark_count() * 2;
    let rows = disp.to_flat_rows();
    let mut min = vec![f64::INFINITY; dims];
    let mut max = vec![f64::NEG_INFINITY; dims];
    for row in &rows {
        for (d, &v) in row.iter().enumerate() {
            min[d] = min[d].min(v);
            max[d] = max[d].max(v);
        }
    }
    let constant: Vec<bool> = min.iter().zip(&max).map(|(a, b)| a == b).collect();
    let normalized: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(d, &v)| {
                    if constant[d] {
                        0.5
                    } else {
                        (v - min[d]) / (max[d] - min[d])
                    }
                })
                .collect()
        })
        .collect();
    DisplacementSequence::from_flat_rows(
        &normalized,
        disp.fps,
        Some(NormalizationParams { min, max, constant }),
    )
}

/// Inverts min-max normalization using the recorded parameters.
pub fn denormalize_rows(rows: &[Vec<f64>], params: &NormalizationParams) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(d, &v)| {
                    if params.constant[d] {
                        params.min[d]
                    } else {
                        params.min[d] + v * (params.max[d] - params.min[d])
                    }
                })
                .collect()
        })
        .collect()
}

/// Integrates normalized displacements from the last known frame.
///
/// Deltas are denormalized with the recorded parameters, then
/// `frame[i+1] = frame[i] + delta[i]` starting from `last_frame`; the output
/// has one more frame than there are deltas.
pub fn reconstruct(
    last_frame: &LandmarkFrame,
    disp: &DisplacementSequence,
) -> Result<LandmarkSequence> {
    let params = disp
        .normalization
        .as_ref()
        .ok_or_else(|| Error::missing("reconstruction requires normalization parameters"))?;
    let k = last_frame.landmark_count();
    if disp.landmark_count() != k {
        return Err(Error::invalid("landmark count mismatch in reconstruction"));
    }
    let raw = denormalize_rows(&disp.to_flat_rows(), params);
    let mut frames = Vec::with_capacity(raw.len() + 1);
    frames.push(last_frame.clone());
    let mut current = last_frame.to_flat();
    for row in &raw {
        for (c, d) in current.iter_mut().zip(row) {
            *c += d;
        }
        frames.push(LandmarkFrame::from_flat(&current)?);
    }
    LandmarkSequence::new(frames, disp.fps, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq_from_flat(rows: &[Vec<f64>], fps: f64) -> LandmarkSequence {
        LandmarkSequence::new(
            rows.iter()
                .map(|r| LandmarkFrame::from_flat(r).unwrap())
                .collect(),
            fps,
            0.0,
        )
        .unwrap()
    }

    fn random_seq(rng: &mut ChaCha8Rng, n: usize, k: usize) -> LandmarkSequence {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..2 * k).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        seq_from_flat(&rows, 25.0)
    }

    #[test]
    fn downsample_keeps_every_third_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seq = random_seq(&mut rng, 10, 2);
        let out = downsample(&seq, 3).unwrap();
        assert_eq!(out.len(), 4);
        for (i, j) in [0usize, 3, 6, 9].iter().enumerate() {
            assert_eq!(out.frames[i], seq.frames[*j]);
        }
        assert!((out.fps - 25.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn downsample_factor_one_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let seq = random_seq(&mut rng, 7, 2);
        let out = downsample(&seq, 1).unwrap();
        assert_eq!(out, seq);
    }

    #[test]
    fn downsample_rejects_factor_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seq = random_seq(&mut rng, 5, 1);
        assert!(downsample(&seq, 0).is_err());
    }

    #[test]
    fn constant_sequence_has_zero_deltas() {
        let rows = vec![vec![1.0, 2.0, 3.0, 4.0]; 5];
        let disp = to_displacements(&seq_from_flat(&rows, 25.0)).unwrap();
        assert_eq!(disp.len(), 4);
        assert!(disp
            .to_flat_rows()
            .iter()
            .all(|r| r.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn single_point_delta() {
        let disp =
            to_displacements(&seq_from_flat(&[vec![0.0, 0.0], vec![1.0, 2.0]], 25.0)).unwrap();
        assert_eq!(disp.to_flat_rows(), vec![vec![1.0, 2.0]]);
    }

    #[test]
    fn single_frame_errors() {
        assert!(to_displacements(&seq_from_flat(&[vec![0.0, 0.0]], 25.0)).is_err());
    }

    #[test]
    fn deltas_prefix_sum_reproduces_sequence() {
        // Prefix-sum oracle: frame0 + cumulative deltas == original frames.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let seq = random_seq(&mut rng, 20, 3);
        let disp = to_displacements(&seq).unwrap();
        let mut acc = seq.frames[0].to_flat();
        for (i, row) in disp.to_flat_rows().iter().enumerate() {
            for (a, d) in acc.iter_mut().zip(row) {
                *a += d;
            }
            for (a, b) in acc.iter().zip(&seq.frames[i + 1].to_flat()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn minmax_maps_to_unit_interval() {
        let rows = vec![vec![-1.0, 7.0], vec![0.0, 7.0], vec![1.0, 7.0]];
        let disp = DisplacementSequence::from_flat_rows(&rows, 25.0, None).unwrap();
        let norm = minmax_normalize(&disp).unwrap();
        let out = norm.to_flat_rows();
        assert_eq!(out[0][0], 0.0);
        assert_eq!(out[1][0], 0.5);
        assert_eq!(out[2][0], 1.0);
        // constant dimension maps to 0.5 and is flagged
        assert!(out.iter().all(|r| r[1] == 0.5));
        let params = norm.normalization.as_ref().unwrap();
        assert!(params.constant[1] && !params.constant[0]);
    }

    #[test]
    fn double_normalization_errors() {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let disp = DisplacementSequence::from_flat_rows(&rows, 25.0, None).unwrap();
        let norm = minmax_normalize(&disp).unwrap();
        assert!(minmax_normalize(&norm).is_err());
    }

    #[test]
    fn normalize_denormalize_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seq = random_seq(&mut rng, 12, 2);
        let disp = to_displacements(&seq).unwrap();
        let norm = minmax_normalize(&disp).unwrap();
        let back = denormalize_rows(
            &norm.to_flat_rows(),
            norm.normalization.as_ref().unwrap(),
        );
        for (a, b) in back.iter().zip(disp.to_flat_rows()) {
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reconstruct_zero_deltas_is_constant() {
        let k = 2;
        let last = LandmarkFrame::from_flat(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        // normalized rows of 0.5 with min == max == 0 denormalize to zero deltas
        let params = NormalizationParams {
            min: vec![0.0; 2 * k],
            max: vec![0.0; 2 * k],
            constant: vec![true; 2 * k],
        };
        let disp = DisplacementSequence::from_flat_rows(
            &vec![vec![0.5; 2 * k]; 4],
            25.0 / 3.0,
            Some(params),
        )
        .unwrap();
        let out = reconstruct(&last, &disp).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.frames.iter().all(|f| *f == last));
    }

    #[test]
    fn reconstruct_requires_params() {
        let last = LandmarkFrame::from_flat(&[0.0, 0.0]).unwrap();
        let disp =
            DisplacementSequence::from_flat_rows(&[vec![0.1, 0.2]], 25.0, None).unwrap();
        assert!(reconstruct(&last, &disp).is_err());
    }

    #[test]
    fn eight_deltas_give_nine_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let seq = random_seq(&mut rng, 9, 2);
        let norm = minmax_normalize(&to_displacements(&seq).unwrap()).unwrap();
        assert_eq!(norm.len(), 8);
        let out = reconstruct(&seq.frames[0], &norm).unwrap();
        assert_eq!(out.len(), 9);
    }

    #[test]
    fn full_pipeline_round_trip() {
        // reconstruct ∘ minmax_normalize ∘ to_displacements == identity
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let seq = random_seq(&mut rng, 10, 3);
            let norm = minmax_normalize(&to_displacements(&seq).unwrap()).unwrap();
            let rec = reconstruct(&seq.frames[0], &norm).unwrap();
            for (a, b) in rec.frames.iter().zip(&seq.frames) {
                for (p, q) in a.points.iter().zip(&b.points) {
                    assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn downsample_length_is_ceil_div(n in 1usize..40, factor in 1usize..7) {
            let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, 0.0]).collect();
            let seq = seq_from_flat(&rows, 25.0);
            let out = downsample(&seq, factor).unwrap();
            prop_assert_eq!(out.len(), n.div_ceil(factor));
        }

        #[test]
        fn normalized_values_stay_in_unit_interval(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seq = random_seq(&mut rng, 6, 2);
            let norm = minmax_normalize(&to_displacements(&seq).unwrap()).unwrap();
            for row in norm.to_flat_rows() {
                for v in row {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
