//! Training orchestration for the CLI: trains each requested configuration
//! across seeded repeats (repeat seeds shared across configurations) and
//! saves one checkpoint per run plus the loss histories.

use std::io::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::DatasetSplit;
use crate::error::{Error, Result};
use crate::seeds::sub_seed;
use crate::seq2seq::data::{load_instance_dir, InstanceBundle};
use crate::seq2seq::{
    save_checkpoint, train, Ablation, Checkpoint, ModelConfig, TrainConfig, CHECKPOINT_VERSION,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSuiteConfig {
    pub preprocessed_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Hidden sizes; embed dim, landmark count, and output steps are
    /// inferred from the instance bundles.
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub attn_dim: usize,
    pub train: TrainConfig,
    pub ablations: Vec<Ablation>,
    pub repeats: usize,
    pub jobs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub ablation: Ablation,
    pub repeat: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub lr_events: usize,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSuiteSummary {
    pub runs: Vec<RunSummary>,
    pub model_config: ModelConfig,
    pub n_train_instances: usize,
    pub n_val_instances: usize,
}

pub fn checkpoint_file_name(ablation: Ablation, repeat: usize) -> String {
    format!("ckpt_{}_{repeat:02}.json", ablation.label())
}

pub fn train_suite(config: &TrainSuiteConfig) -> Result<TrainSuiteSummary> {
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::io(config.out_dir.display().to_string(), e))?;
    let split: DatasetSplit = {
        let path = config.preprocessed_dir.join("split.json");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text)?
    };
    let bundles = load_instance_dir(&config.preprocessed_dir.join("instances"))?;
    let train_items: Vec<InstanceBundle> = bundles
        .iter()
        .filter(|b| split.train_dyads.contains(&b.dyad_id))
        .cloned()
        .collect();
    let val_items: Vec<InstanceBundle> = bundles
        .iter()
        .filter(|b| split.val_dyads.contains(&b.dyad_id))
        .cloned()
        .collect();
    if train_items.is_empty() || val_items.is_empty() {
        return Err(Error::invalid("empty train or validation split"));
    }
    let first = &train_items[0];
    let model_config = ModelConfig {
        embed_dim: first.listener_mean.len(),
        enc_hidden: config.enc_hidden,
        dec_hidden: config.dec_hidden,
        attn_dim: config.attn_dim,
        landmark_count: first.last_frame.len() / 2,
        output_steps: first.target.len(),
    };

    let mut jobs = Vec::new();
    for &ablation in &config.ablations {
        for repeat in 0..config.repeats {
            jobs.push((ablation, repeat));
        }
    }
    let results: Mutex<Vec<Option<RunSummary>>> = Mutex::new(vec![None; jobs.len()]);
    let histories: Mutex<Vec<Option<Vec<crate::seq2seq::EpochStats>>>> =
        Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = config.jobs.max(1).min(jobs.len());

    let run_one = |ablation: Ablation, repeat: usize| -> Result<(RunSummary, Vec<crate::seq2seq::EpochStats>)> {
        let seed = sub_seed(config.train.seed, &format!("repeat/{repeat}"));
        let tc = TrainConfig {
            ablation,
            seed,
            ..config.train.clone()
        };
        let outcome = train(&model_config, &tc, &train_items, &val_items)?;
        let path = config.out_dir.join(checkpoint_file_name(ablation, repeat));
        save_checkpoint(
            &path,
            &Checkpoint {
                version: CHECKPOINT_VERSION,
                model_config,
                train_config: tc,
                params: outcome.model.params.clone(),
                best_epoch: outcome.best_epoch,
                best_val_loss: outcome.best_val_loss,
            },
        )?;
        Ok((
            RunSummary {
                ablation,
                repeat,
                seed,
                best_epoch: outcome.best_epoch,
                best_val_loss: outcome.best_val_loss,
                lr_events: outcome.lr_events.len(),
                checkpoint: path,
            },
            outcome.history,
        ))
    };

    if workers <= 1 {
        for (i, &(ablation, repeat)) in jobs.iter().enumerate() {
            let (summary, history) = run_one(ablation, repeat)?;
            results.lock().unwrap()[i] = Some(summary);
            histories.lock().unwrap()[i] = Some(history);
        }
    } else {
        std::thread::scope(|scope| -> Result<()> {
            let mut handles = Vec::new();
            for _ in 0..workers {
                handles.push(scope.spawn(|| -> Result<()> {
                    loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        if i >= jobs.len() {
                            return Ok(());
                        }
                        let (ablation, repeat) = jobs[i];
                        let (summary, history) = run_one(ablation, repeat)?;
                        results.lock().unwrap()[i] = Some(summary);
                        histories.lock().unwrap()[i] = Some(history);
                    }
                }));
            }
            for h in handles {
                h.join().map_err(|_| Error::Numerical("worker thread panicked".into()))??;
            }
            Ok(())
        })?;
    }

    let runs: Vec<RunSummary> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("all jobs completed"))
        .collect();

    // one histories table across all runs
    let hist_path = config.out_dir.join("histories.csv");
    let mut f = std::fs::File::create(&hist_path)
        .map_err(|e| Error::io(hist_path.display().to_string(), e))?;
    writeln!(f, "config,repeat,epoch,train_loss,val_loss,learning_rate,teacher_forcing_p")
        .map_err(|e| Error::io(hist_path.display().to_string(), e))?;
    for (i, history) in histories.into_inner().unwrap().into_iter().enumerate() {
        let (ablation, repeat) = jobs[i];
        for h in history.expect("all jobs completed") {
            writeln!(
                f,
                "{},{},{},{:.8},{:.8},{:.8e},{:.2}",
                ablation.label(),
                repeat,
                h.epoch,
                h.train_loss,
                h.val_loss,
                h.learning_rate,
                h.teacher_forcing_p
            )
            .map_err(|e| Error::io(hist_path.display().to_string(), e))?;
        }
    }

    let summary = TrainSuiteSummary {
        runs,
        model_config,
        n_train_instances: train_items.len(),
        n_val_instances: val_items.len(),
    };
    let sum_path = config.out_dir.join("train_summary.json");
    let text = serde_json::to_string_pretty(&summary)?;
    std::fs::write(&sum_path, text).map_err(|e| Error::io(sum_path.display().to_string(), e))?;
    Ok(summary)
}
