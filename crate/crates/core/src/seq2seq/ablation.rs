//! The four-configuration ablation suite: speaker-only baseline, +listener,
//! +listener+conditioning, +conditioning. Repeats share seeds across
//! configurations so per-seed differences support paired testing.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::data::InstanceBundle;
use super::model::{GruModel, ModelConfig};
use super::train::{train, TrainConfig};
use super::Ablation;
use crate::corpus::{Intensity, WindowKind};
use crate::error::{Error, Result};
use crate::landmark::{reconstruct, DisplacementSequence, LandmarkFrame, LandmarkSequence};
use crate::metrics::{PoseErrorReport, DEFAULT_PCK_SIGMAS};
use crate::seeds::sub_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    pub instance_id: String,
    pub dyad_id: String,
    pub kind: WindowKind,
    pub intensity: Option<Intensity>,
    pub duration_s: f64,
    pub ape: f64,
    pub pck_by_sigma: Vec<(f64, f64)>,
    pub pck_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub ablation: Ablation,
    pub repeat: usize,
    pub seed: u64,
    /// Mean APE over evaluated instances.
    pub ape: f64,
    /// Mean PCK per sigma.
    pub pck_by_sigma: Vec<(f64, f64)>,
    pub pck_mean: f64,
    pub best_val_loss: f64,
    pub per_instance: Vec<InstanceMetrics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationSuite {
    /// One entry per (configuration, repeat), configuration-major order.
    pub runs: Vec<RunMetrics>,
    pub n_repeats: usize,
}

impl AblationSuite {
    pub fn runs_for(&self, ablation: Ablation) -> Vec<&RunMetrics> {
        self.runs.iter().filter(|r| r.ablation == ablation).collect()
    }

    pub fn ape_series(&self, ablation: Ablation) -> Vec<f64> {
        self.runs_for(ablation).iter().map(|r| r.ape).collect()
    }

    pub fn pck_series(&self, ablation: Ablation) -> Vec<f64> {
        self.runs_for(ablation).iter().map(|r| r.pck_mean).collect()
    }
}

/// Generates displacements for each instance, reconstructs landmark frames,
/// and scores them against ground truth.
pub fn evaluate_model(
    model: &GruModel,
    instances: &[InstanceBundle],
    ablation: Ablation,
    sigmas: &[f64],
) -> Result<Vec<InstanceMetrics>> {
    let mut out = Vec::with_capacity(instances.len());
    for item in instances {
        let frames = model.generate(&item.model_input(), None, item.target.len(), ablation)?;
        let disp = DisplacementSequence::from_flat_rows(
            &frames,
            item.fps,
            Some(item.normalization.clone()),
        )?;
        let last = LandmarkFrame::from_flat(&item.last_frame)?;
        let rec = reconstruct(&last, &disp)?;
        // score the generated frames (the seed frame is shared with GT)
        let pred = LandmarkSequence::new(rec.frames[1..].to_vec(), item.fps, 0.0)?;
        let gt_frames = item
            .gt_frames
            .iter()
            .map(|f| LandmarkFrame::from_flat(f))
            .collect::<Result<Vec<_>>>()?;
        let gt = LandmarkSequence::new(gt_frames, item.fps, 0.0)?;
        let report = PoseErrorReport::compute(&pred, &gt, sigmas)?;
        out.push(InstanceMetrics {
            instance_id: item.id.clone(),
            dyad_id: item.dyad_id.clone(),
            kind: item.kind,
            intensity: item.intensity,
            duration_s: item.duration_s,
            ape: report.ape,
            pck_by_sigma: report.pck_by_sigma,
            pck_mean: report.pck_mean,
        });
    }
    Ok(out)
}

pub fn summarize_run(
    ablation: Ablation,
    repeat: usize,
    seed: u64,
    best_val_loss: f64,
    per_instance: Vec<InstanceMetrics>,
) -> RunMetrics {
    let n = per_instance.len().max(1) as f64;
    let ape = per_instance.iter().map(|m| m.ape).sum::<f64>() / n;
    let sigmas: Vec<f64> = per_instance
        .first()
        .map(|m| m.pck_by_sigma.iter().map(|(s, _)| *s).collect())
        .unwrap_or_else(|| DEFAULT_PCK_SIGMAS.to_vec());
    let pck_by_sigma: Vec<(f64, f64)> = sigmas
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            (
                s,
                per_instance.iter().map(|m| m.pck_by_sigma[i].1).sum::<f64>() / n,
            )
        })
        .collect();
    let pck_mean = per_instance.iter().map(|m| m.pck_mean).sum::<f64>() / n;
    RunMetrics {
        ablation,
        repeat,
        seed,
        ape,
        pck_by_sigma,
        pck_mean,
        best_val_loss,
        per_instance,
    }
}

/// Trains every configuration `n_repeats` times and evaluates on the test
/// instances. Repeat `r` uses the same derived seed in all configurations;
/// `jobs` caps worker threads (runs are independent, so scheduling cannot
/// change results).
pub fn run_ablation_suite(
    model_config: &ModelConfig,
    base: &TrainConfig,
    train_items: &[InstanceBundle],
    val_items: &[InstanceBundle],
    test_items: &[InstanceBundle],
    n_repeats: usize,
    jobs: usize,
) -> Result<AblationSuite> {
    if n_repeats == 0 {
        return Err(Error::invalid("n_repeats must be >= 1"));
    }
    let mut job_list = Vec::new();
    for &ablation in &Ablation::ALL {
        for repeat in 0..n_repeats {
            job_list.push((ablation, repeat));
        }
    }

    let results: Mutex<Vec<Option<RunMetrics>>> = Mutex::new(vec![None; job_list.len()]);
    let next = AtomicUsize::new(0);
    let worker_count = jobs.max(1).min(job_list.len());

    let run_job = |ablation: Ablation, repeat: usize| -> Result<RunMetrics> {
        let seed = sub_seed(base.seed, &format!("repeat/{repeat}"));
        let config = TrainConfig {
            ablation,
            seed,
            ..base.clone()
        };
        let outcome = train(model_config, &config, train_items, val_items)?;
        let per_instance =
            evaluate_model(&outcome.model, test_items, ablation, &DEFAULT_PCK_SIGMAS)?;
        Ok(summarize_run(
            ablation,
            repeat,
            seed,
            outcome.best_val_loss,
            per_instance,
        ))
    };

    if worker_count <= 1 {
        for (i, &(ablation, repeat)) in job_list.iter().enumerate() {
            let metrics = run_job(ablation, repeat)?;
            results.lock().unwrap()[i] = Some(metrics);
        }
    } else {
        std::thread::scope(|scope| -> Result<()> {
            let mut handles = Vec::new();
            for _ in 0..worker_count {
                handles.push(scope.spawn(|| -> Result<()> {
                    loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        if i >= job_list.len() {
                            return Ok(());
                        }
                        let (ablation, repeat) = job_list[i];
                        let metrics = run_job(ablation, repeat)?;
                        results.lock().unwrap()[i] = Some(metrics);
                    }
                }));
            }
            for h in handles {
                h.join().map_err(|_| Error::Numerical("worker thread panicked".into()))??;
            }
            Ok(())
        })?;
    }

    let runs: Vec<RunMetrics> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("all jobs completed"))
        .collect();
    Ok(AblationSuite { runs, n_repeats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Side;
    use crate::landmark::NormalizationParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_instance(rng: &mut ChaCha8Rng, id: &str) -> InstanceBundle {
        let k = 2;
        InstanceBundle {
            id: id.into(),
            dyad_id: "d0".into(),
            listener_side: Side::Left,
            kind: WindowKind::Smile,
            intensity: Some(Intensity::B),
            window_start_s: 0.0,
            duration_s: 1.2,
            speaker_frames: (0..2)
                .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
            listener_mean: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            conditioning: [0.0, 0.1, -0.1, 0.2, -0.2, 0.3],
            target: (0..3)
                .map(|_| (0..2 * k).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect(),
            normalization: NormalizationParams {
                min: vec![-0.1; 2 * k],
                max: vec![0.1; 2 * k],
                constant: vec![false; 2 * k],
            },
            last_frame: vec![0.0; 2 * k],
            gt_frames: (0..3)
                .map(|_| (0..2 * k).map(|_| rng.gen_range(-0.2..0.2)).collect())
                .collect(),
            fps: 25.0 / 3.0,
        }
    }

    fn toy_model_config() -> ModelConfig {
        ModelConfig {
            embed_dim: 3,
            enc_hidden: 6,
            dec_hidden: 6,
            attn_dim: 3,
            landmark_count: 2,
            output_steps: 3,
        }
    }

    #[test]
    fn suite_produces_config_by_repeat_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let items: Vec<InstanceBundle> =
            (0..6).map(|i| toy_instance(&mut rng, &format!("i{i}"))).collect();
        let base = TrainConfig {
            epochs: 2,
            seed: 7,
            ..TrainConfig::default()
        };
        let suite = run_ablation_suite(
            &toy_model_config(),
            &base,
            &items[..3],
            &items[3..4],
            &items[4..],
            2,
            1,
        )
        .unwrap();
        assert_eq!(suite.runs.len(), 8); // 4 configs x 2 repeats
        for &ablation in &Ablation::ALL {
            assert_eq!(suite.runs_for(ablation).len(), 2);
        }
        // repeats share seeds across configs
        let seeds_a: Vec<u64> = suite.runs_for(Ablation::SpeakerOnly).iter().map(|r| r.seed).collect();
        let seeds_b: Vec<u64> = suite
            .runs_for(Ablation::SpeakerListenerCond)
            .iter()
            .map(|r| r.seed)
            .collect();
        assert_eq!(seeds_a, seeds_b);
        assert_ne!(seeds_a[0], seeds_a[1]);
    }

    #[test]
    fn parallel_execution_matches_serial() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let items: Vec<InstanceBundle> =
            (0..6).map(|i| toy_instance(&mut rng, &format!("i{i}"))).collect();
        let base = TrainConfig {
            epochs: 2,
            seed: 3,
            ..TrainConfig::default()
        };
        let serial = run_ablation_suite(
            &toy_model_config(),
            &base,
            &items[..3],
            &items[3..4],
            &items[4..],
            2,
            1,
        )
        .unwrap();
        let parallel = run_ablation_suite(
            &toy_model_config(),
            &base,
            &items[..3],
            &items[3..4],
            &items[4..],
            2,
            4,
        )
        .unwrap();
        assert_eq!(serial.runs, parallel.runs);
    }
}
