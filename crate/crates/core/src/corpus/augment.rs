//! Non-smile window augmentation.
//!
//! Non-smile windows must start at least two seconds (in absolute distance)
//! from every smile onset of their dyad, and the mean duration of the
//! non-smile set must exactly match the mean duration of the smile set.
//! Mean equality is achieved by construction: window durations are a seeded
//! permutation of the smile-duration multiset rather than fresh draws.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{InstanceWindow, Side, SmileAnnotation, WindowKind};
use crate::error::{Error, Result};
use crate::seeds::stream_rng;

/// Minimum distance from a non-smile window start to any smile onset.
pub const MIN_ONSET_DISTANCE_S: f64 = 2.0;

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// What the sampler needs to know about a dyad.
#[derive(Debug, Clone)]
pub struct DyadWindowMeta {
    pub dyad_id: String,
    pub video_duration_s: f64,
    /// Start-time intervals that window starts must fall into (e.g. spans
    /// where a speaker turn and a preceding listener turn exist). `None`
    /// allows the whole video.
    pub allowed_start_intervals: Option<Vec<(f64, f64)>>,
}

impl DyadWindowMeta {
    pub fn whole_video(dyad_id: impl Into<String>, video_duration_s: f64) -> Self {
        DyadWindowMeta {
            dyad_id: dyad_id.into(),
            video_duration_s,
            allowed_start_intervals: None,
        }
    }

    fn start_allowed(&self, start: f64) -> bool {
        match &self.allowed_start_intervals {
            None => true,
            Some(iv) => iv.iter().any(|&(a, b)| start >= a && start <= b),
        }
    }
}

/// Samples `count` non-smile windows for one dyad.
///
/// `count` must be a multiple of the smile count so that cycling the
/// duration multiset preserves the mean exactly. Listener sides are
/// inherited from the smile whose duration each window reuses.
pub fn sample_nonsmile_windows(
    smiles: &[SmileAnnotation],
    meta: &DyadWindowMeta,
    count: usize,
    seed: u64,
) -> Result<Vec<InstanceWindow>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if smiles.is_empty() {
        return Err(Error::Infeasible {
            dyad_id: meta.dyad_id.clone(),
            message: "no smiles to mirror durations from".into(),
        });
    }
    if !count.is_multiple_of(smiles.len()) {
        return Err(Error::invalid(format!(
            "count {count} must be a multiple of the smile count {} to preserve the mean duration",
            smiles.len()
        )));
    }
    let onsets: Vec<f64> = smiles.iter().map(|s| s.onset_s).collect();

    let mut rng = stream_rng(seed, &format!("augment/{}", meta.dyad_id));
    let mut sources: Vec<(f64, Side)> = Vec::with_capacity(count);
    for _ in 0..count / smiles.len() {
        let mut batch: Vec<(f64, Side)> =
            smiles.iter().map(|s| (s.duration(), s.listener_side)).collect();
        batch.shuffle(&mut rng);
        sources.extend(batch);
    }

    let mut out = Vec::with_capacity(count);
    for (duration, listener_side) in sources {
        if duration >= meta.video_duration_s {
            return Err(Error::Infeasible {
                dyad_id: meta.dyad_id.clone(),
                message: format!("window duration {duration} exceeds video duration"),
            });
        }
        let hi = meta.video_duration_s - duration;
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let start = rng.gen_range(0.0..hi);
            let clear = onsets.iter().all(|&o| (start - o).abs() >= MIN_ONSET_DISTANCE_S);
            if clear && meta.start_allowed(start) {
                placed = Some(start);
                break;
            }
        }
        let start = placed.ok_or_else(|| Error::Infeasible {
            dyad_id: meta.dyad_id.clone(),
            message: format!(
                "no valid non-smile placement found after {MAX_PLACEMENT_ATTEMPTS} attempts"
            ),
        })?;
        out.push(InstanceWindow {
            dyad_id: meta.dyad_id.clone(),
            listener_side,
            kind: WindowKind::NonSmile,
            window_start_s: start,
            window_end_s: start + duration,
            intensity: None,
            speaker_turn: None,
            listener_turn: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn smile(onset: f64, offset: f64) -> SmileAnnotation {
        SmileAnnotation {
            dyad_id: "d".into(),
            listener_side: Side::Left,
            onset_s: onset,
            offset_s: offset,
            intensity: None,
        }
    }

    #[test]
    fn distance_rule_accepts_and_rejects() {
        // onsets at 10 and 20: start 14 is fine (distances 4 and 6),
        // start 19 violates the rule (distance 1)
        let onsets = [10.0, 20.0];
        let ok = onsets.iter().all(|o| (14.0f64 - o).abs() >= MIN_ONSET_DISTANCE_S);
        let bad = onsets.iter().all(|o| (19.0f64 - o).abs() >= MIN_ONSET_DISTANCE_S);
        assert!(ok);
        assert!(!bad);
    }

    #[test]
    fn equal_count_matches_mean_duration_exactly() {
        let smiles: Vec<SmileAnnotation> = (0..142)
            .map(|i| {
                let onset = 5.0 + i as f64 * 6.0;
                smile(onset, onset + 1.0 + (i % 5) as f64 * 0.3)
            })
            .collect();
        let meta = DyadWindowMeta::whole_video("d", 5.0 + 142.0 * 6.0 + 10.0);
        let windows = sample_nonsmile_windows(&smiles, &meta, 142, 3).unwrap();
        assert_eq!(windows.len(), 142);
        let smile_mean: f64 = smiles.iter().map(|s| s.duration()).sum::<f64>() / 142.0;
        let win_mean: f64 = windows.iter().map(|w| w.duration()).sum::<f64>() / 142.0;
        assert!((smile_mean - win_mean).abs() < 1e-9);
        for w in &windows {
            for s in &smiles {
                assert!((w.window_start_s - s.onset_s).abs() >= MIN_ONSET_DISTANCE_S);
            }
        }
    }

    #[test]
    fn windows_respect_allowed_intervals() {
        let smiles = vec![smile(30.0, 31.5)];
        let meta = DyadWindowMeta {
            dyad_id: "d".into(),
            video_duration_s: 100.0,
            allowed_start_intervals: Some(vec![(50.0, 60.0)]),
        };
        let windows = sample_nonsmile_windows(&smiles, &meta, 3, 9).unwrap();
        for w in &windows {
            assert!(w.window_start_s >= 50.0 && w.window_start_s <= 60.0);
        }
    }

    #[test]
    fn infeasible_placement_names_the_dyad() {
        // onsets blanket the whole short video, nothing is 2 s clear
        let smiles: Vec<SmileAnnotation> =
            (0..10).map(|i| smile(i as f64, i as f64 + 0.5)).collect();
        let meta = DyadWindowMeta::whole_video("crowded", 10.0);
        match sample_nonsmile_windows(&smiles, &meta, 10, 0) {
            Err(Error::Infeasible { dyad_id, .. }) => assert_eq!(dyad_id, "crowded"),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_count_is_rejected() {
        let smiles = vec![smile(10.0, 11.0), smile(30.0, 31.0)];
        let meta = DyadWindowMeta::whole_video("d", 60.0);
        assert!(sample_nonsmile_windows(&smiles, &meta, 3, 0).is_err());
    }

    #[test]
    fn random_annotation_sets_hold_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..200 {
            let n = rng.gen_range(1..8);
            let video = 200.0;
            let smiles: Vec<SmileAnnotation> = (0..n)
                .map(|i| {
                    let onset = 10.0 + i as f64 * 20.0 + rng.gen_range(0.0..5.0);
                    smile(onset, onset + rng.gen_range(0.5..3.0))
                })
                .collect();
            let meta = DyadWindowMeta::whole_video("d", video);
            let windows = sample_nonsmile_windows(&smiles, &meta, n, trial).unwrap();
            let sm: f64 = smiles.iter().map(|s| s.duration()).sum::<f64>() / n as f64;
            let wm: f64 = windows.iter().map(|w| w.duration()).sum::<f64>() / n as f64;
            assert!((sm - wm).abs() < 1e-9);
            for w in &windows {
                for s in &smiles {
                    assert!((w.window_start_s - s.onset_s).abs() >= MIN_ONSET_DISTANCE_S);
                }
            }
        }
    }
}
