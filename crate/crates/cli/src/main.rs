//! `bcsmile` — backchannel-smile generation pipeline.
//!
//! Subcommands: `synth` (synthetic corpus), `preprocess` (instances +
//! features + split), `analyze` (ANOVA / Tukey / GLM report), `train`
//! (ablation suite checkpoints), `evaluate` (metrics + summary table),
//! `adapt` (facial-parameter command to a file or endpoint).
//!
//! Option precedence: command-line flags > `--config` JSON > environment
//! (`BCSMILE_SEED`, `BCSMILE_OUT`, `BCSMILE_JOBS`, `AGENT_ENDPOINT`) >
//! defaults. The resolved configuration is written into every output
//! directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bcsmile::adapter::AGENT_ENDPOINT_ENV;
use bcsmile::corpus::{generate_synthetic_corpus, SyntheticSpec};
use bcsmile::pipeline::{
    adapt, analyze, evaluate, preprocess, read_features_csv, render_ablation_table, train_suite,
    AdaptConfig, EmbeddingsSource, EvaluateConfig, PreprocessConfig, SinkSpec, TrainSuiteConfig,
};
use bcsmile::seq2seq::{Ablation, TrainConfig};

#[derive(Parser)]
#[command(name = "bcsmile", version, about = "Backchannel-smile generation pipeline")]
struct Cli {
    /// Root seed; every random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker-thread cap for training suites.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted effects.
    Synth(SynthArgs),
    /// Build per-instance bundles, features, and the dyad split.
    Preprocess(PreprocessArgs),
    /// ANOVA, Tukey HSD, and GLM reports from features.csv.
    Analyze(AnalyzeArgs),
    /// Train the ablation suite and save checkpoints.
    Train(TrainArgs),
    /// Evaluate checkpoints on the test split.
    Evaluate(EvaluateArgs),
    /// Emit a facial-parameter command for one instance.
    Adapt(AdaptArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    dyads: Option<usize>,
    #[arg(long)]
    smiles_per_dyad: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    sample_rate: Option<u32>,
    #[arg(long)]
    speaker_effect: Option<f64>,
    #[arg(long)]
    listener_effect: Option<f64>,
    #[arg(long)]
    conditioning_effect: Option<f64>,
    #[arg(long)]
    motion_scale: Option<f64>,
    #[arg(long)]
    noise_level: Option<f64>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    /// Directory of precomputed per-turn embeddings, or `synthetic`.
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    lexicons: Option<PathBuf>,
    #[arg(long)]
    index_map: Option<PathBuf>,
    #[arg(long)]
    max_smile_duration: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// features.csv from preprocess (or a directory containing it).
    #[arg(long)]
    features: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Preprocess output directory.
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    repeats: Option<usize>,
    /// Comma-separated configurations (s, sl, slc, sc) or `all`.
    #[arg(long)]
    ablations: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    enc_hidden: Option<usize>,
    #[arg(long)]
    dec_hidden: Option<usize>,
    #[arg(long)]
    attn_dim: Option<usize>,
    #[arg(long)]
    teacher_forcing_interval: Option<usize>,
    #[arg(long)]
    teacher_forcing_step: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Preprocess output directory.
    #[arg(long)]
    instances: PathBuf,
    /// Directory of ckpt_*.json files.
    #[arg(long)]
    checkpoints: PathBuf,
}

#[derive(Args)]
struct AdaptArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Path to one *.instance.json bundle.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    index_map: Option<PathBuf>,
    /// `file` (default) or `endpoint`.
    #[arg(long)]
    sink: Option<String>,
    /// Command file for the file sink.
    #[arg(long)]
    sink_path: Option<PathBuf>,
    /// Endpoint URL; defaults to $AGENT_ENDPOINT.
    #[arg(long)]
    endpoint_url: Option<String>,
    /// Spool file for undeliverable commands.
    #[arg(long)]
    spool: Option<PathBuf>,
}

/// Values from the optional JSON config file.
#[derive(Debug, Default, serde::Deserialize)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    synth: Option<serde_json::Value>,
    preprocess: Option<serde_json::Value>,
    train: Option<serde_json::Value>,
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let file_config: FileConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => FileConfig::default(),
    };

    let env_u64 = |name: &str| std::env::var(name).ok().and_then(|v| v.parse::<u64>().ok());
    let env_usize = |name: &str| std::env::var(name).ok().and_then(|v| v.parse::<usize>().ok());
    let seed = cli
        .seed
        .or(file_config.seed)
        .or_else(|| env_u64("BCSMILE_SEED"))
        .unwrap_or(0);
    let out = cli
        .out
        .clone()
        .or(file_config.out.clone())
        .or_else(|| std::env::var("BCSMILE_OUT").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let jobs = cli
        .jobs
        .or(file_config.jobs)
        .or_else(|| env_usize("BCSMILE_JOBS"))
        .unwrap_or(1);

    match &cli.command {
        Command::Synth(args) => cmd_synth(args, &file_config, seed, &out),
        Command::Preprocess(args) => cmd_preprocess(args, &file_config, seed, &out),
        Command::Analyze(args) => cmd_analyze(args, &out),
        Command::Train(args) => cmd_train(args, &file_config, seed, &out, jobs),
        Command::Evaluate(args) => cmd_evaluate(args, &out),
        Command::Adapt(args) => cmd_adapt(args, &out),
    }
}

fn section<T: serde::de::DeserializeOwned + Default>(v: &Option<serde_json::Value>) -> Result<T> {
    match v {
        Some(value) => Ok(serde_json::from_value(value.clone())?),
        None => Ok(T::default()),
    }
}

fn write_echo<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs, file: &FileConfig, seed: u64, out: &Path) -> Result<()> {
    #[derive(Debug, Default, serde::Deserialize)]
    struct SynthSection {
        dyads: Option<usize>,
        smiles_per_dyad: Option<usize>,
        embed_dim: Option<usize>,
        sample_rate: Option<u32>,
        speaker_effect: Option<f64>,
        listener_effect: Option<f64>,
        conditioning_effect: Option<f64>,
        motion_scale: Option<f64>,
        noise_level: Option<f64>,
    }
    let sec: SynthSection = section(&file.synth)?;
    let defaults = SyntheticSpec::default();
    let spec = SyntheticSpec {
        dyad_count: args.dyads.or(sec.dyads).unwrap_or(defaults.dyad_count),
        smiles_per_dyad: args
            .smiles_per_dyad
            .or(sec.smiles_per_dyad)
            .unwrap_or(defaults.smiles_per_dyad),
        embed_dim: args.embed_dim.or(sec.embed_dim).unwrap_or(defaults.embed_dim),
        sample_rate: args.sample_rate.or(sec.sample_rate).unwrap_or(defaults.sample_rate),
        speaker_effect: args
            .speaker_effect
            .or(sec.speaker_effect)
            .unwrap_or(defaults.speaker_effect),
        listener_effect: args
            .listener_effect
            .or(sec.listener_effect)
            .unwrap_or(defaults.listener_effect),
        conditioning_effect: args
            .conditioning_effect
            .or(sec.conditioning_effect)
            .unwrap_or(defaults.conditioning_effect),
        motion_scale: args.motion_scale.or(sec.motion_scale).unwrap_or(defaults.motion_scale),
        noise_level: args.noise_level.or(sec.noise_level).unwrap_or(defaults.noise_level),
    };
    let summary = generate_synthetic_corpus(&spec, seed, out)?;
    write_echo(out, "run_config.json", &serde_json::json!({ "seed": seed, "synth": spec }))?;
    println!(
        "synthesized {} dyads, {} smiles -> {}",
        summary.dyad_count,
        summary.smile_count,
        out.display()
    );
    Ok(())
}

fn cmd_preprocess(args: &PreprocessArgs, file: &FileConfig, seed: u64, out: &Path) -> Result<()> {
    #[derive(Debug, Default, serde::Deserialize)]
    struct PreprocessSection {
        embeddings: Option<String>,
        embed_dim: Option<usize>,
        max_smile_duration: Option<f64>,
    }
    let sec: PreprocessSection = section(&file.preprocess)?;
    let mut config = PreprocessConfig::new(
        args.manifest.clone(),
        args.annotations.clone(),
        out.to_path_buf(),
    );
    config.seed = seed;
    config.embed_dim = args.embed_dim.or(sec.embed_dim).unwrap_or(16);
    config.lexicons = args.lexicons.clone();
    config.index_map = args.index_map.clone();
    config.max_smile_duration = args.max_smile_duration.or(sec.max_smile_duration);
    let embeddings = args.embeddings.clone().or(sec.embeddings).unwrap_or_else(|| "synthetic".into());
    config.embeddings = if embeddings == "synthetic" {
        EmbeddingsSource::Synthetic
    } else {
        EmbeddingsSource::Files { dir: PathBuf::from(embeddings) }
    };
    let summary = preprocess(&config)?;
    println!(
        "preprocessed {} instances ({} smiles, {} non-smiles), {} dyads rejected -> {}",
        summary.instances,
        summary.smiles,
        summary.nonsmiles,
        summary.rejected_dyads,
        out.display()
    );
    Ok(())
}

fn cmd_analyze(args: &AnalyzeArgs, out: &Path) -> Result<()> {
    let features = if args.features.is_dir() {
        args.features.join("features.csv")
    } else {
        args.features.clone()
    };
    let rows = read_features_csv(&features)?;
    let report = analyze(&rows)?;
    let text = report.render_text();
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("analysis.txt"), &text)?;
    std::fs::write(out.join("analysis.json"), serde_json::to_string_pretty(&report)?)?;
    print!("{text}");
    println!("written to {}", out.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs, file: &FileConfig, seed: u64, out: &Path, jobs: usize) -> Result<()> {
    let base_from_file: TrainConfig = match &file.train {
        Some(v) => serde_json::from_value(v.clone())?,
        None => TrainConfig::default(),
    };
    let mut train_config = base_from_file;
    train_config.seed = seed;
    if let Some(v) = args.epochs {
        train_config.epochs = v;
    }
    if let Some(v) = args.learning_rate {
        train_config.learning_rate = v;
    }
    if let Some(v) = args.momentum {
        train_config.momentum = v;
    }
    if let Some(v) = args.weight_decay {
        train_config.weight_decay = v;
    }
    if let Some(v) = args.teacher_forcing_interval {
        train_config.teacher_forcing_interval = v;
    }
    if let Some(v) = args.teacher_forcing_step {
        train_config.teacher_forcing_step = v;
    }
    let ablations = match args.ablations.as_deref() {
        None | Some("all") => Ablation::ALL.to_vec(),
        Some(list) => list
            .split(',')
            .map(|s| s.parse::<Ablation>().map_err(anyhow::Error::from))
            .collect::<Result<Vec<_>>>()?,
    };
    let config = TrainSuiteConfig {
        preprocessed_dir: args.instances.clone(),
        out_dir: out.to_path_buf(),
        enc_hidden: args.enc_hidden.unwrap_or(128),
        dec_hidden: args.dec_hidden.unwrap_or(128),
        attn_dim: args.attn_dim.unwrap_or(64),
        train: train_config,
        ablations,
        repeats: args.repeats.unwrap_or(10),
        jobs,
    };
    write_echo(out, "run_config.json", &config)?;
    let summary = train_suite(&config)?;
    println!(
        "trained {} runs ({} train / {} val instances) -> {}",
        summary.runs.len(),
        summary.n_train_instances,
        summary.n_val_instances,
        out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs, out: &Path) -> Result<()> {
    let config = EvaluateConfig {
        preprocessed_dir: args.instances.clone(),
        checkpoints_dir: args.checkpoints.clone(),
        out_dir: out.to_path_buf(),
    };
    write_echo(out, "run_config.json", &config)?;
    let report = evaluate(&config)?;
    print!("{}", render_ablation_table(&report));
    println!("written to {}", out.display());
    Ok(())
}

fn cmd_adapt(args: &AdaptArgs, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let sink_kind = args.sink.as_deref().unwrap_or("file");
    let sink = match sink_kind {
        "file" => SinkSpec::File {
            path: args
                .sink_path
                .clone()
                .unwrap_or_else(|| out.join("commands.jsonl")),
        },
        "endpoint" => {
            let url = match args.endpoint_url.clone() {
                Some(u) => u,
                None => std::env::var(AGENT_ENDPOINT_ENV).with_context(|| {
                    format!("--endpoint-url not given and ${AGENT_ENDPOINT_ENV} unset")
                })?,
            };
            SinkSpec::Endpoint {
                url,
                spool: args.spool.clone().unwrap_or_else(|| out.join("spool.jsonl")),
            }
        }
        other => bail!("unknown sink `{other}` (expected file or endpoint)"),
    };
    let config = AdaptConfig {
        checkpoint: args.checkpoint.clone(),
        instance: args.instance.clone(),
        index_map: args.index_map.clone(),
        sink,
    };
    write_echo(out, "run_config.json", &config)?;
    let (command, ack) = adapt(&config)?;
    println!(
        "emitted smile command (onset {:.2}s, duration {:.2}s, ack {:?})",
        command.onset_s, command.duration_s, ack
    );
    Ok(())
}
