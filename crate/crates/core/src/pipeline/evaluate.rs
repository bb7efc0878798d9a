//! Evaluation: loads checkpoints, regenerates displacements on the test
//! instances, and writes the per-instance metrics CSV, the ablation summary
//! (APE↓ / PCK↑ with significance markers against the speaker-only
//! baseline), and the duration/intensity performance regressions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetSplit, WindowKind};
use crate::error::{Error, Result};
use crate::metrics::{
    compare_runs, performance_regression, CompareOutcome, PerformanceRegression, RegressionRow,
    DEFAULT_PCK_SIGMAS,
};
use crate::seq2seq::ablation::summarize_run;
use crate::seq2seq::data::{load_instance_dir, InstanceBundle};
use crate::seq2seq::{evaluate_model, load_checkpoint, Ablation, AblationSuite, RunMetrics};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateConfig {
    /// Preprocess output directory (contains `instances/` and `split.json`).
    pub preprocessed_dir: PathBuf,
    /// Directory of `ckpt_{ablation}_{repeat}.json` files.
    pub checkpoints_dir: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub ablation: Ablation,
    pub display_name: String,
    pub mean_ape: f64,
    pub mean_pck: f64,
    pub pck_by_sigma: Vec<(f64, f64)>,
    /// Paired-t outcomes vs the speaker-only baseline (None for the
    /// baseline row itself).
    pub ape_vs_baseline: Option<CompareOutcome>,
    pub pck_vs_baseline: Option<CompareOutcome>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<SummaryRow>,
    pub n_repeats: usize,
    pub n_test_instances: usize,
    pub regression_ape: Option<PerformanceRegression>,
    pub regression_pck: Option<PerformanceRegression>,
}

pub fn evaluate(config: &EvaluateConfig) -> Result<EvaluationReport> {
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::io(config.out_dir.display().to_string(), e))?;
    let split: DatasetSplit = {
        let path = config.preprocessed_dir.join("split.json");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text)?
    };
    let instances = load_instance_dir(&config.preprocessed_dir.join("instances"))?;
    let test: Vec<InstanceBundle> = instances
        .into_iter()
        .filter(|b| split.test_dyads.contains(&b.dyad_id))
        .collect();
    if test.is_empty() {
        return Err(Error::invalid("no test instances found"));
    }

    // checkpoints, config-major then repeat order
    let mut ckpt_paths: Vec<PathBuf> = std::fs::read_dir(&config.checkpoints_dir)
        .map_err(|e| Error::io(config.checkpoints_dir.display().to_string(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("ckpt_") && n.ends_with(".json"))
        })
        .collect();
    ckpt_paths.sort();
    if ckpt_paths.is_empty() {
        return Err(Error::missing(format!(
            "no checkpoints under {}",
            config.checkpoints_dir.display()
        )));
    }

    let mut runs: Vec<RunMetrics> = Vec::new();
    for path in &ckpt_paths {
        let ckpt = load_checkpoint(path)?;
        let repeat = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.rsplit('_').next())
            .and_then(|s| s.parse::<usize>().ok())
            .unwrap_or(0);
        let model = ckpt.model();
        let per_instance = evaluate_model(
            &model,
            &test,
            ckpt.train_config.ablation,
            &DEFAULT_PCK_SIGMAS,
        )?;
        runs.push(summarize_run(
            ckpt.train_config.ablation,
            repeat,
            ckpt.train_config.seed,
            ckpt.best_val_loss,
            per_instance,
        ));
    }
    runs.sort_by_key(|r| (r.ablation, r.repeat));
    let n_repeats = runs
        .iter()
        .filter(|r| r.ablation == Ablation::SpeakerOnly)
        .count();
    let suite = AblationSuite {
        runs,
        n_repeats,
    };

    let report = build_report(&suite, &test)?;
    write_outputs(config, &suite, &report)?;
    Ok(report)
}

pub(crate) fn build_report(
    suite: &AblationSuite,
    test: &[InstanceBundle],
) -> Result<EvaluationReport> {
    let baseline_ape = suite.ape_series(Ablation::SpeakerOnly);
    let baseline_pck = suite.pck_series(Ablation::SpeakerOnly);
    let mut rows = Vec::new();
    for &ablation in &Ablation::ALL {
        let runs = suite.runs_for(ablation);
        if runs.is_empty() {
            continue;
        }
        let n = runs.len() as f64;
        let mean_ape = runs.iter().map(|r| r.ape).sum::<f64>() / n;
        let mean_pck = runs.iter().map(|r| r.pck_mean).sum::<f64>() / n;
        let sigmas: Vec<f64> = runs[0].pck_by_sigma.iter().map(|(s, _)| *s).collect();
        let pck_by_sigma: Vec<(f64, f64)> = sigmas
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, runs.iter().map(|r| r.pck_by_sigma[i].1).sum::<f64>() / n))
            .collect();
        let ape_series = suite.ape_series(ablation);
        let comparable =
            ablation != Ablation::SpeakerOnly && baseline_ape.len() == ape_series.len() && ape_series.len() >= 2;
        let (ape_cmp, pck_cmp) = if comparable {
            let pck_series = suite.pck_series(ablation);
            (
                Some(compare_runs(&ape_series, &baseline_ape, true)?),
                Some(compare_runs(&pck_series, &baseline_pck, true)?),
            )
        } else {
            (None, None)
        };
        rows.push(SummaryRow {
            ablation,
            display_name: ablation.display_name().to_string(),
            mean_ape,
            mean_pck,
            pck_by_sigma,
            ape_vs_baseline: ape_cmp,
            pck_vs_baseline: pck_cmp,
        });
    }

    // regression over smile instances: metric averaged over repeats per
    // (instance, configuration)
    let mut ape_rows = Vec::new();
    let mut pck_rows = Vec::new();
    for &ablation in &Ablation::ALL {
        let runs = suite.runs_for(ablation);
        if runs.is_empty() {
            continue;
        }
        let mut by_instance: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
        for run in &runs {
            for m in &run.per_instance {
                if m.kind != WindowKind::Smile {
                    continue;
                }
                let e = by_instance.entry(&m.instance_id).or_insert((0.0, 0.0, 0));
                e.0 += m.ape;
                e.1 += m.pck_mean;
                e.2 += 1;
            }
        }
        for (id, (ape_sum, pck_sum, count)) in by_instance {
            let bundle = test.iter().find(|b| b.id == id).expect("metric for known instance");
            let intensity = bundle.intensity.expect("smile instances carry intensity");
            ape_rows.push(RegressionRow {
                metric: ape_sum / count as f64,
                duration_s: bundle.duration_s,
                intensity,
                config: ablation.label().to_string(),
            });
            pck_rows.push(RegressionRow {
                metric: pck_sum / count as f64,
                duration_s: bundle.duration_s,
                intensity,
                config: ablation.label().to_string(),
            });
        }
    }
    let baseline = Ablation::SpeakerOnly.label();
    let regression_ape = performance_regression(&ape_rows, baseline).ok();
    let regression_pck = performance_regression(&pck_rows, baseline).ok();

    Ok(EvaluationReport {
        rows,
        n_repeats: suite.n_repeats,
        n_test_instances: test.len(),
        regression_ape,
        regression_pck,
    })
}

fn write_outputs(
    config: &EvaluateConfig,
    suite: &AblationSuite,
    report: &EvaluationReport,
) -> Result<()> {
    // per-instance metrics CSV
    let csv_path = config.out_dir.join("per_instance_metrics.csv");
    let mut f = std::fs::File::create(&csv_path)
        .map_err(|e| Error::io(csv_path.display().to_string(), e))?;
    writeln!(
        f,
        "config,repeat,instance_id,dyad_id,kind,intensity,duration_s,ape,pck_0.1,pck_0.2,pck_mean"
    )
    .map_err(|e| Error::io(csv_path.display().to_string(), e))?;
    for run in &suite.runs {
        for m in &run.per_instance {
            writeln!(
                f,
                "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                run.ablation.label(),
                run.repeat,
                m.instance_id,
                m.dyad_id,
                match m.kind {
                    WindowKind::Smile => "smile",
                    WindowKind::NonSmile => "nonsmile",
                },
                m.intensity.map(|i| i.to_string()).unwrap_or_default(),
                m.duration_s,
                m.ape,
                m.pck_by_sigma.first().map(|(_, v)| *v).unwrap_or(f64::NAN),
                m.pck_by_sigma.get(1).map(|(_, v)| *v).unwrap_or(f64::NAN),
                m.pck_mean,
            )
            .map_err(|e| Error::io(csv_path.display().to_string(), e))?;
        }
    }

    let table = render_ablation_table(report);
    let table_path = config.out_dir.join("ablation_summary.txt");
    std::fs::write(&table_path, &table)
        .map_err(|e| Error::io(table_path.display().to_string(), e))?;
    let json_path = config.out_dir.join("evaluation.json");
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(&json_path, text).map_err(|e| Error::io(json_path.display().to_string(), e))?;
    Ok(())
}

/// Renders the summary table: Model, APE↓, PCK↑ with `*` (p < 0.05) and
/// `·` (p < 0.1) markers against the baseline.
pub fn render_ablation_table(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<48} {:>12} {:>12} {:>10} {:>10}",
        "Model", "APE↓", "PCK↑", "PCK(0.1)", "PCK(0.2)"
    );
    for row in &report.rows {
        let ape_mark = row.ape_vs_baseline.as_ref().map_or("", |c| marker(c.p_value));
        let pck_mark = row.pck_vs_baseline.as_ref().map_or("", |c| marker(c.p_value));
        let _ = writeln!(
            out,
            "{:<48} {:>10.4}{:<2} {:>10.4}{:<2} {:>10.4} {:>10.4}",
            row.display_name,
            row.mean_ape,
            ape_mark,
            row.mean_pck,
            pck_mark,
            row.pck_by_sigma.first().map(|(_, v)| *v).unwrap_or(f64::NAN),
            row.pck_by_sigma.get(1).map(|(_, v)| *v).unwrap_or(f64::NAN),
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "repeats per configuration: {}; test instances: {}",
        report.n_repeats, report.n_test_instances
    );
    let _ = writeln!(out, "significance vs baseline: * p<0.05, · p<0.1 (paired t)");
    match &report.regression_ape {
        Some(reg) => {
            let _ = writeln!(out);
            let _ = writeln!(out, "APE regression (duration + intensity + configuration):");
            out.push_str(&render_regression(reg));
        }
        None => {
            let _ = writeln!(
                out,
                "performance regression skipped: too few smile instances for the design"
            );
        }
    }
    if let Some(reg) = &report.regression_pck {
        let _ = writeln!(out);
        let _ = writeln!(out, "PCK regression (duration + intensity + configuration):");
        out.push_str(&render_regression(reg));
    }
    out
}

fn render_regression(reg: &PerformanceRegression) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<36} {:>12} {:>12} {:>10}",
        "term", "slope", "std err", "Pr(>|t|)"
    );
    for (i, term) in reg.terms.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<36} {:>12.4} {:>12.4} {:>10.4}{}",
            term,
            reg.slopes[i],
            reg.standard_errors[i],
            reg.p_values[i],
            marker(reg.p_values[i]),
        );
    }
    out
}

fn marker(p: f64) -> &'static str {
    if p < 0.05 {
        " *"
    } else if p < 0.1 {
        " ·"
    } else {
        ""
    }
}
