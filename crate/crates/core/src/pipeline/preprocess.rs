//! Preprocessing: manifest + annotations + turns + landmarks + audio in,
//! per-instance bundles out.
//!
//! Steps: reliability filtering, 1:1 non-smile augmentation, mean-face
//! alignment, downsampling, displacement + per-instance min-max
//! normalization, prosody/lexical feature extraction, train-split z-scoring,
//! conditioning-vector assembly, and embedding lookup.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{
    load_manifest, read_annotations_csv, read_turns_csv, sample_nonsmile_windows, split_by_dyad,
    filter_reliable_smiles, DatasetSplit, DyadRecord, DyadWindowMeta, InstanceWindow, Side,
    SmileAnnotation, TurnSegment, WindowKind,
};
use crate::error::{Error, Result};
use crate::features::{
    build_conditioning_vector, count_lexical, default_lexicons, extract_prosody, load_lexicons,
    trim_speaker_turn_to_onset, wav, ConditioningInputs, Lexicons, ZScoreModel,
};
use crate::landmark::{
    align_to_mean_face, compute_mean_face, downsample, minmax_normalize, read_landmark_csv,
    to_displacements, LandmarkIndexMap, LandmarkSequence,
};
use crate::seeds::sub_seed;
use crate::seq2seq::data::InstanceBundle;
use crate::seq2seq::{embed_audio, EmbeddingProvider, FileBackedProvider, SyntheticProvider, TurnAudio};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum EmbeddingsSource {
    /// Precomputed per-turn files in a directory.
    Files { dir: PathBuf },
    /// Deterministic waveform-derived embeddings.
    Synthetic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub manifest: PathBuf,
    pub annotations: PathBuf,
    pub embeddings: EmbeddingsSource,
    pub embed_dim: usize,
    pub lexicons: Option<PathBuf>,
    pub index_map: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub split_ratios: (f64, f64, f64),
    pub downsample_factor: usize,
    pub output_steps: usize,
    /// Reliability-filter duration cutoff; `None` uses mean + 4 sd.
    pub max_smile_duration: Option<f64>,
}

impl PreprocessConfig {
    pub fn new(manifest: PathBuf, annotations: PathBuf, out_dir: PathBuf) -> Self {
        PreprocessConfig {
            manifest,
            annotations,
            embeddings: EmbeddingsSource::Synthetic,
            embed_dim: 16,
            lexicons: None,
            index_map: None,
            out_dir,
            seed: 0,
            split_ratios: (0.70, 0.15, 0.15),
            downsample_factor: 3,
            output_steps: 8,
            max_smile_duration: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub instances: usize,
    pub smiles: usize,
    pub nonsmiles: usize,
    pub rejected_dyads: usize,
    pub split: DatasetSplit,
    pub instances_dir: PathBuf,
    pub features_csv: PathBuf,
}

struct DyadData {
    record: DyadRecord,
    turns: BTreeMap<Side, Vec<TurnSegment>>,
    audio: BTreeMap<Side, wav::Waveform>,
    /// Aligned, downsampled landmark grid per side.
    grid: BTreeMap<Side, LandmarkSequence>,
}

pub fn preprocess(config: &PreprocessConfig) -> Result<PreprocessSummary> {
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::io(config.out_dir.display().to_string(), e))?;
    let instances_dir = config.out_dir.join("instances");
    std::fs::create_dir_all(&instances_dir)
        .map_err(|e| Error::io(instances_dir.display().to_string(), e))?;

    let lexicons = match &config.lexicons {
        Some(path) => load_lexicons(path)?,
        None => default_lexicons(),
    };
    let provider: Box<dyn EmbeddingProvider> = match &config.embeddings {
        EmbeddingsSource::Files { dir } => Box::new(FileBackedProvider::new(dir, config.embed_dim)),
        EmbeddingsSource::Synthetic => Box::new(SyntheticProvider::new(
            config.embed_dim,
            sub_seed(config.seed, "embeddings"),
        )),
    };

    let load = load_manifest(&config.manifest)?;
    if load.records.is_empty() {
        return Err(Error::invalid("manifest has no usable dyads"));
    }
    let annotations = read_annotations_csv(&config.annotations)?;

    // reliability filter: the annotation's own intensity column is the
    // predicted level; empty means the predictor found no smile
    let predicted: BTreeMap<usize, Option<crate::corpus::Intensity>> = annotations
        .iter()
        .enumerate()
        .map(|(i, a)| (i, a.intensity))
        .collect();
    let reliable = filter_reliable_smiles(&annotations, &predicted, config.max_smile_duration)?;

    // per-dyad media
    let mut dyads: BTreeMap<String, DyadData> = BTreeMap::new();
    let mut raw_sequences = Vec::new();
    for record in &load.records {
        let mut turns = BTreeMap::new();
        let mut audio = BTreeMap::new();
        let mut raw = BTreeMap::new();
        for side in [Side::Left, Side::Right] {
            turns.insert(
                side,
                read_turns_csv(record.transcripts.get(side), &record.dyad_id, side)?,
            );
            audio.insert(side, wav::read_wav(record.audio.get(side))?);
            let seq = read_landmark_csv(
                record.landmarks.get(side),
                record.video_fps,
                record.landmark_count,
            )?;
            raw.insert(side, seq);
        }
        raw_sequences.push((record.dyad_id.clone(), raw));
        dyads.insert(
            record.dyad_id.clone(),
            DyadData {
                record: record.clone(),
                turns,
                audio,
                grid: BTreeMap::new(),
            },
        );
    }

    // dataset mean face, then per-side aligned + downsampled grids
    let index_map = match &config.index_map {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            serde_json::from_str::<LandmarkIndexMap>(&text)?
        }
        None => LandmarkIndexMap::default_68(),
    };
    let all_seqs: Vec<LandmarkSequence> = raw_sequences
        .iter()
        .flat_map(|(_, sides)| sides.values().cloned())
        .collect();
    let mean_face = compute_mean_face(&all_seqs, index_map.stable_subset.clone())?;
    for (dyad_id, sides) in raw_sequences {
        let data = dyads.get_mut(&dyad_id).unwrap();
        for (side, seq) in sides {
            let aligned = align_to_mean_face(&seq, &mean_face)?;
            data.grid
                .insert(side, downsample(&aligned, config.downsample_factor)?);
        }
    }

    // windows: smiles plus an equal number of non-smile windows per dyad
    let mut windows: Vec<InstanceWindow> = Vec::new();
    let mut smiles_by_dyad: BTreeMap<String, Vec<SmileAnnotation>> = BTreeMap::new();
    for ann in &reliable {
        smiles_by_dyad.entry(ann.dyad_id.clone()).or_default().push(ann.clone());
    }
    for (dyad_id, mut smiles) in smiles_by_dyad {
        let data = dyads
            .get(&dyad_id)
            .ok_or_else(|| Error::missing(format!("annotations reference unknown dyad {dyad_id}")))?;
        smiles.sort_by(|a, b| a.onset_s.partial_cmp(&b.onset_s).unwrap());
        for (i, s) in smiles.iter().enumerate() {
            s.validate(Some(data.record.video_duration_s))?;
            windows.push(InstanceWindow {
                dyad_id: dyad_id.clone(),
                listener_side: s.listener_side,
                kind: WindowKind::Smile,
                window_start_s: s.onset_s,
                window_end_s: s.offset_s,
                intensity: s.intensity,
                speaker_turn: None,
                listener_turn: None,
            });
            let _ = i;
        }
        let meta = DyadWindowMeta {
            dyad_id: dyad_id.clone(),
            video_duration_s: data.record.video_duration_s,
            allowed_start_intervals: Some(anchor_intervals(data, config)),
        };
        let nonsmiles = sample_nonsmile_windows(
            &smiles,
            &meta,
            smiles.len(),
            sub_seed(config.seed, "augment"),
        )?;
        windows.extend(nonsmiles);
    }

    // resolve turns, extract features and targets
    let split = split_by_dyad(
        &dyads.keys().cloned().collect::<Vec<_>>(),
        config.split_ratios,
        sub_seed(config.seed, "split"),
    )?;

    let mut drafts = Vec::new();
    let mut smile_counter: BTreeMap<String, usize> = BTreeMap::new();
    let mut nonsmile_counter: BTreeMap<String, usize> = BTreeMap::new();
    for window in &windows {
        let data = &dyads[&window.dyad_id];
        let draft = build_draft(window, data, &lexicons, provider.as_ref(), config)?;
        let counter = match window.kind {
            WindowKind::Smile => &mut smile_counter,
            WindowKind::NonSmile => &mut nonsmile_counter,
        };
        let idx = counter.entry(window.dyad_id.clone()).or_insert(0);
        let tag = match window.kind {
            WindowKind::Smile => "smile",
            WindowKind::NonSmile => "nonsmile",
        };
        let id = format!("{}_{tag}{:02}", window.dyad_id, idx);
        *idx += 1;
        drafts.push((id, draft));
    }
    drafts.sort_by(|a, b| a.0.cmp(&b.0));

    // z-scoring on train-split instances only
    let train_rows: Vec<Vec<f64>> = drafts
        .iter()
        .filter(|(_, d)| split.train_dyads.contains(&d.window.dyad_id))
        .map(|(_, d)| d.cond_inputs.to_array().to_vec())
        .collect();
    if train_rows.is_empty() {
        return Err(Error::invalid("no training instances after the split"));
    }
    let zmodel = ZScoreModel::fit(&train_rows)?;

    let mut bundles = Vec::new();
    for (id, draft) in &drafts {
        let z = zmodel.apply_row(&draft.cond_inputs.to_array())?;
        let zs: [f64; 5] = [z[0], z[1], z[2], z[3], z[4]];
        let cond = build_conditioning_vector(draft.speaker_sex, &zs);
        let bundle = InstanceBundle {
            id: id.clone(),
            dyad_id: draft.window.dyad_id.clone(),
            listener_side: draft.window.listener_side,
            kind: draft.window.kind,
            intensity: draft.window.intensity,
            window_start_s: draft.window.window_start_s,
            duration_s: draft.window.duration(),
            speaker_frames: draft.speaker_frames.clone(),
            listener_mean: draft.listener_mean.clone(),
            conditioning: cond.values,
            target: draft.target.clone(),
            normalization: draft.normalization.clone(),
            last_frame: draft.last_frame.clone(),
            gt_frames: draft.gt_frames.clone(),
            fps: draft.fps,
        };
        bundle.save(&instances_dir.join(format!("{id}.instance.json")))?;
        bundles.push((bundle, draft));
    }

    // artifacts: split, features table, z-score stats, mean face, config echo
    write_json(&config.out_dir.join("split.json"), &split)?;
    write_json(&config.out_dir.join("zscore.json"), zmodel.summary())?;
    write_json(&config.out_dir.join("mean_face.json"), &mean_face)?;
    write_json(&config.out_dir.join("preprocess_config.json"), config)?;
    let features_csv = config.out_dir.join("features.csv");
    write_features_csv(&features_csv, &bundles)?;

    let smiles = bundles.iter().filter(|(b, _)| b.kind == WindowKind::Smile).count();
    Ok(PreprocessSummary {
        instances: bundles.len(),
        smiles,
        nonsmiles: bundles.len() - smiles,
        rejected_dyads: load.rejected.len(),
        split,
        instances_dir,
        features_csv,
    })
}

/// Anchor times where a speaker turn covers the anchor with >= 1 s of lead,
/// both sides have a completed previous turn, and the target horizon fits.
fn anchor_intervals(data: &DyadData, config: &PreprocessConfig) -> Vec<(f64, f64)> {
    let grid_dt = config.downsample_factor as f64 / data.record.video_fps;
    let horizon = (config.output_steps + 2) as f64 * grid_dt + 0.2;
    let mut out = Vec::new();
    for side in [Side::Left, Side::Right] {
        for turn in &data.turns[&side] {
            let other_done = data.turns[&side.other()]
                .iter()
                .any(|t| t.end_s <= turn.start_s + 1e-9);
            if !other_done {
                continue;
            }
            let lo = turn.start_s + 1.0;
            let hi = (turn.end_s - 0.2).min(data.record.video_duration_s - horizon);
            if lo < hi {
                out.push((lo, hi));
            }
        }
    }
    out
}

struct InstanceDraft {
    window: InstanceWindow,
    speaker_sex: crate::corpus::Sex,
    listener_sex: crate::corpus::Sex,
    relationship: crate::corpus::Relationship,
    speaker_features: crate::features::TurnFeatures,
    listener_features: crate::features::TurnFeatures,
    cond_inputs: ConditioningInputs,
    speaker_frames: Vec<Vec<f64>>,
    listener_mean: Vec<f64>,
    target: Vec<Vec<f64>>,
    normalization: crate::landmark::NormalizationParams,
    last_frame: Vec<f64>,
    gt_frames: Vec<Vec<f64>>,
    fps: f64,
}

fn build_draft(
    window: &InstanceWindow,
    data: &DyadData,
    lexicons: &Lexicons,
    provider: &dyn EmbeddingProvider,
    config: &PreprocessConfig,
) -> Result<InstanceDraft> {
    let anchor = window.window_start_s;
    let mut window = window.clone();

    // the speaker turn covers the anchor on the non-listener side; for
    // non-smile windows the listener side follows from whoever is speaking
    let speaker_turn = find_covering_turn(data, anchor, window.listener_side)
        .or_else(|| {
            if window.kind == WindowKind::NonSmile {
                find_covering_turn(data, anchor, window.listener_side.other()).inspect(|t| {
                    window.listener_side = t.side.other();
                })
            } else {
                None
            }
        })
        .ok_or_else(|| {
            Error::missing(format!(
                "dyad {}: no speaker turn covers anchor {anchor:.2}s",
                window.dyad_id
            ))
        })?;
    let listener_side = window.listener_side;
    let listener_turn = data.turns[&listener_side]
        .iter()
        .rfind(|t| t.end_s <= anchor + 1e-9)
        .ok_or_else(|| {
            Error::missing(format!(
                "dyad {}: listener has no completed turn before {anchor:.2}s",
                window.dyad_id
            ))
        })?;
    window.speaker_turn = Some(speaker_turn.id.clone());
    window.listener_turn = Some(listener_turn.id.clone());

    // features: speaker activity up to the anchor, listener's full turn
    let (trimmed, speaker_span) = trim_speaker_turn_to_onset(speaker_turn, anchor)?;
    let speaker_wave = data.audio[&speaker_turn.side].slice_span(speaker_span.0, speaker_span.1);
    let listener_wave = data.audio[&listener_side].slice_span(listener_turn.start_s, listener_turn.end_s);
    let speaker_tokens: Vec<String> = trimmed.words.iter().map(|w| w.token.clone()).collect();
    let listener_tokens: Vec<String> = listener_turn.words.iter().map(|w| w.token.clone()).collect();
    let speaker_features = crate::features::TurnFeatures {
        role: crate::features::TurnRole::Speaker,
        turn_id: speaker_turn.id.clone(),
        prosody: extract_prosody(&speaker_wave)?,
        lexical: count_lexical(&speaker_tokens, lexicons),
    };
    let listener_features = crate::features::TurnFeatures {
        role: crate::features::TurnRole::Listener,
        turn_id: listener_turn.id.clone(),
        prosody: extract_prosody(&listener_wave)?,
        lexical: count_lexical(&listener_tokens, lexicons),
    };
    let cond_inputs = ConditioningInputs::from_turns(&speaker_features, &listener_features)?;

    // embeddings
    let speaker_emb = embed_audio(
        provider,
        &TurnAudio {
            dyad_id: &window.dyad_id,
            side: speaker_turn.side,
            turn_id: &speaker_turn.id,
            waveform: &data.audio[&speaker_turn.side],
            turn_start_s: speaker_turn.start_s,
            span_s: speaker_span,
        },
    )?;
    let listener_emb = embed_audio(
        provider,
        &TurnAudio {
            dyad_id: &window.dyad_id,
            side: listener_side,
            turn_id: &listener_turn.id,
            waveform: &data.audio[&listener_side],
            turn_start_s: listener_turn.start_s,
            span_s: (listener_turn.start_s, listener_turn.end_s),
        },
    )?;

    // displacement targets from the listener's aligned landmark grid
    let grid = &data.grid[&listener_side];
    let grid_start = grid_index(anchor, data.record.video_fps, config.downsample_factor);
    let need = grid_start + config.output_steps + 1;
    if need > grid.len() {
        return Err(Error::invalid(format!(
            "dyad {}: window at {anchor:.2}s runs past the landmark track",
            window.dyad_id
        )));
    }
    let seq = LandmarkSequence::new(
        grid.frames[grid_start..need].to_vec(),
        grid.fps,
        anchor,
    )?;
    let normalized = minmax_normalize(&to_displacements(&seq)?)?;
    let target = normalized.to_flat_rows();
    let normalization = normalized.normalization.clone().expect("just normalized");
    let last_frame = seq.frames[0].to_flat();
    let gt_frames: Vec<Vec<f64>> = seq.frames[1..].iter().map(|f| f.to_flat()).collect();

    Ok(InstanceDraft {
        speaker_sex: data.record.person(listener_side.other()).sex,
        listener_sex: data.record.person(listener_side).sex,
        relationship: data.record.relationship,
        window,
        speaker_features,
        listener_features,
        cond_inputs,
        speaker_frames: speaker_emb.frames,
        listener_mean: listener_emb.mean_frame(),
        target,
        normalization,
        last_frame,
        gt_frames,
        fps: grid.fps,
    })
}

fn find_covering_turn(
    data: &DyadData,
    anchor: f64,
    listener_side: Side,
) -> Option<&TurnSegment> {
    data.turns[&listener_side.other()]
        .iter()
        .find(|t| t.start_s + 1e-9 < anchor && anchor < t.end_s)
}

/// Downsampled grid index at-or-after time `t`, tolerant of float noise on
/// exact grid times.
fn grid_index(t: f64, fps: f64, factor: usize) -> usize {
    let x = t * fps / factor as f64;
    if (x - x.round()).abs() < 1e-6 {
        x.round() as usize
    } else {
        x.ceil() as usize
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_features_csv(path: &Path, rows: &[(InstanceBundle, &InstanceDraft)]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut header: Vec<String> = [
        "instance_id", "dyad_id", "kind", "listener_side", "window_start_s", "duration_s",
        "intensity", "listener_sex", "speaker_sex", "relationship",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for role in ["spk", "lst"] {
        for feat in [
            "mean_pitch", "pitch_range", "rms", "word_count", "negations", "comparisons",
            "interrogatives", "positive_emotion", "negative_emotion", "focus_past",
            "focus_present", "focus_future",
        ] {
            header.push(format!("{role}_{feat}"));
        }
    }
    for name in crate::features::CONDITIONING_ORDER {
        header.push(format!("cond_{name}"));
    }
    writeln!(f, "{}", header.join(",")).map_err(|e| Error::io(path.display().to_string(), e))?;

    for (bundle, draft) in rows {
        let mut cells: Vec<String> = vec![
            bundle.id.clone(),
            bundle.dyad_id.clone(),
            match bundle.kind {
                WindowKind::Smile => "smile".into(),
                WindowKind::NonSmile => "nonsmile".into(),
            },
            bundle.listener_side.to_string(),
            format!("{:.6}", bundle.window_start_s),
            format!("{:.6}", bundle.duration_s),
            bundle.intensity.map(|i| i.to_string()).unwrap_or_default(),
            draft.listener_sex.to_string(),
            draft.speaker_sex.to_string(),
            draft.relationship.to_string(),
        ];
        for features in [&draft.speaker_features, &draft.listener_features] {
            let p = &features.prosody;
            let l = &features.lexical;
            for v in [p.mean_pitch, p.pitch_range, p.rms_energy] {
                cells.push(format!("{v:.6}"));
            }
            for v in [
                l.word_count, l.negations, l.comparisons, l.interrogatives, l.positive_emotion,
                l.negative_emotion, l.focus_past, l.focus_present, l.focus_future,
            ] {
                cells.push(v.to_string());
            }
        }
        for v in bundle.conditioning {
            cells.push(format!("{v:.6}"));
        }
        writeln!(f, "{}", cells.join(",")).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}
