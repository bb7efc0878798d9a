//! Synthetic corpus generator: a desk-scale stand-in for a real dyad corpus
//! in which the listener's facial motion is a known function of the speaker
//! turn, the listener turn, and the conditioning features, so ablation
//! orderings are testable by construction.
//!
//! Layout per dyad: alternating 10 s turns (left speaks even slots, right
//! odd). Each smile sits inside a slot; its listener is the non-speaking
//! side. During a smile the listener's lip corners and brows follow a
//! mixture of two fixed motion shapes; the mixture weight is a logistic
//! function of three planted latents carried by (a) the speaker-turn
//! embedding frames, (b) the listener's previous-turn embedding mean, and
//! (c) audio/lexical features that the real feature extractors recover
//! (sine amplitude -> RMS, sine frequency -> pitch, planted token counts).

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    write_annotations_csv, write_manifest, write_turns_csv, DyadRecord, Intensity, PersonMeta,
    Relationship, Sex, Side, SidePaths, SmileAnnotation, TurnSegment, Word,
};
use crate::error::{Error, Result};
use crate::features::wav::{write_wav, Waveform};
use crate::landmark::{write_landmark_csv, LandmarkFrame, LandmarkIndexMap, LandmarkSequence, Point};
use crate::seeds::stream_rng;
use crate::seq2seq::write_embedding_file;

pub const SLOT_LEN_S: f64 = 10.0;
pub const VIDEO_FPS: f64 = 25.0;
pub const DOWNSAMPLE: usize = 3;
const EXTRA_SLOTS: usize = 3;
/// Landmark layout is fixed to [`LandmarkIndexMap::synthetic_8`].
pub const SYNTH_LANDMARKS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dyad_count: usize,
    pub smiles_per_dyad: usize,
    pub embed_dim: usize,
    pub sample_rate: u32,
    /// Logit weight of the speaker-turn latent in the motion mixture.
    pub speaker_effect: f64,
    /// Logit weight of the listener-turn latent.
    pub listener_effect: f64,
    /// Logit weight of the conditioning latent (0 decouples targets from
    /// the conditioning vector).
    pub conditioning_effect: f64,
    /// Per-step landmark motion scale (mean-face units).
    pub motion_scale: f64,
    /// Baseline landmark jitter amplitude.
    pub noise_level: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            dyad_count: 8,
            smiles_per_dyad: 8,
            embed_dim: 16,
            sample_rate: 8000,
            speaker_effect: 0.1,
            listener_effect: 0.7,
            conditioning_effect: 1.8,
            motion_scale: 3.0,
            noise_level: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSummary {
    pub manifest_path: PathBuf,
    pub annotations_path: PathBuf,
    pub index_map_path: PathBuf,
    pub embeddings_dir: PathBuf,
    pub dyad_count: usize,
    pub smile_count: usize,
}

/// Base face for the 8-point layout: indices 0-3 are the stable subset
/// (eye corners, nose bridge), 4/5 lip corners, 6/7 brows.
fn base_face() -> [Point; SYNTH_LANDMARKS] {
    [
        Point::new(-0.45, -0.35),
        Point::new(0.45, -0.35),
        Point::new(0.0, -0.15),
        Point::new(0.0, 0.1),
        Point::new(-0.4, 0.55),
        Point::new(0.4, 0.55),
        Point::new(-0.45, -0.6),
        Point::new(0.45, -0.6),
    ]
}

/// Per-step motion direction of each non-stable landmark (lip corners move
/// outward and slightly up, brows up).
fn motion_dirs() -> [(usize, Point); 4] {
    [
        (4, Point::new(-0.3, -0.15)),
        (5, Point::new(0.3, -0.15)),
        (6, Point::new(-0.05, -0.25)),
        (7, Point::new(0.05, -0.25)),
    ]
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Base smile-displacement template over the first 8 steps (rise, peak,
/// release) and the additive modulation scaled by the mixture weight. The
/// template's extremes sit at fixed steps for every weight in [0, 1], so
/// per-instance min-max normalization leaves the target exactly affine in
/// the weight.
const PATTERN_BASE: [f64; 8] = [0.0, 0.5, 1.0, 0.5, 0.5, 0.5, 0.5, 0.5];
const PATTERN_MOD: [f64; 8] = [0.0, 0.45, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];

/// Motion mixture shape at step `g` of a smile spanning `len` steps; the
/// per-pattern mean is removed by the caller so the face returns to rest.
fn pattern_value(w: f64, g: usize, _len: usize) -> f64 {
    if g < 8 {
        PATTERN_BASE[g] + w * PATTERN_MOD[g]
    } else {
        0.0
    }
}

fn pattern_mean(w: f64, len: usize) -> f64 {
    (0..len).map(|g| pattern_value(w, g, len)).sum::<f64>() / len as f64
}

fn intensity_for(w: f64) -> Intensity {
    match w {
        v if v < 0.2 => Intensity::A,
        v if v < 0.4 => Intensity::B,
        v if v < 0.6 => Intensity::C,
        v if v < 0.8 => Intensity::D,
        _ => Intensity::E,
    }
}

struct SlotPlan {
    /// Latent carried by this slot's speaker-turn embedding.
    lambda: f64,
    /// Conditioning latent of anchors in this slot.
    cond: f64,
}

struct SmilePlan {
    listener_side: Side,
    onset_grid: usize,
    len_steps: usize,
    mix_weight: f64,
}

/// Emits a complete corpus under `out_dir`; fully deterministic per seed.
pub fn generate_synthetic_corpus(
    spec: &SyntheticSpec,
    seed: u64,
    out_dir: &Path,
) -> Result<SynthSummary> {
    if spec.dyad_count == 0 {
        return Err(Error::invalid("dyad_count must be positive"));
    }
    if spec.smiles_per_dyad == 0 {
        return Err(Error::invalid("smiles_per_dyad must be positive"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let embeddings_dir = out_dir.join("embeddings");
    std::fs::create_dir_all(&embeddings_dir)
        .map_err(|e| Error::io(embeddings_dir.display().to_string(), e))?;

    let slots = spec.smiles_per_dyad + 1 + EXTRA_SLOTS;
    let duration_s = slots as f64 * SLOT_LEN_S;
    let grid_dt = DOWNSAMPLE as f64 / VIDEO_FPS;

    // two shared mixing vectors for the embedding pattern
    let mut mix_rng = stream_rng(seed, "synth/mixing");
    let u_latent: Vec<f64> = (0..spec.embed_dim).map(|_| mix_rng.gen_range(-1.0..1.0)).collect();
    let u_wiggle: Vec<f64> = (0..spec.embed_dim).map(|_| mix_rng.gen_range(-1.0..1.0)).collect();
    // a position ramp lets models read how deep into the turn a frame sits
    let u_ramp: Vec<f64> = (0..spec.embed_dim).map(|_| mix_rng.gen_range(-1.0..1.0)).collect();

    let mut records = Vec::new();
    let mut annotations = Vec::new();
    let mut smile_count = 0usize;

    for d in 0..spec.dyad_count {
        let dyad_id = format!("dyad{d:03}");
        let mut rng = stream_rng(seed, &format!("synth/{dyad_id}"));

        let relationship = Relationship::ALL[d % Relationship::ALL.len()];
        // cycle sex compositions out of phase with the relationship cycle so
        // the sex x relationship ANOVA cells all get populated
        let compositions = [
            (Sex::Male, Sex::Female),
            (Sex::Female, Sex::Male),
            (Sex::Male, Sex::Male),
            (Sex::Female, Sex::Female),
        ];
        let (left_sex, right_sex) = compositions[(d + d / 4) % compositions.len()];

        // Per-slot latents; the slot speaker's embedding carries `lambda`.
        // The latents feeding the dyad's smiles are a shuffled symmetric
        // grid rather than iid draws, so every dyad spans the planted-effect
        // range and no split can land on a degenerate dyad.
        let grid = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            let mut g: Vec<f64> = (0..n)
                .map(|i| {
                    if n == 1 {
                        0.0
                    } else {
                        -0.9 + 1.8 * i as f64 / (n - 1) as f64
                    }
                })
                .collect();
            g.shuffle(rng);
            g
        };
        let n_smiles = spec.smiles_per_dyad;
        // smiles live in slots 1..=n_smiles; their listener latents come
        // from slots 0..n_smiles
        let cond_grid = grid(n_smiles, &mut rng);
        let lambda_grid = grid(n_smiles, &mut rng);
        let slot_plans: Vec<SlotPlan> = (0..slots)
            .map(|slot| SlotPlan {
                lambda: if slot < n_smiles {
                    lambda_grid[slot]
                } else {
                    rng.gen_range(-1.0..1.0)
                },
                cond: if (1..=n_smiles).contains(&slot) {
                    cond_grid[slot - 1]
                } else {
                    rng.gen_range(-1.0..1.0)
                },
            })
            .collect();

        // one smile per slot, slots 1..=smiles_per_dyad
        let mut smiles = Vec::new();
        for i in 0..spec.smiles_per_dyad {
            let slot = i + 1;
            let speaker_side = slot_side(slot);
            let listener_side = speaker_side.other();
            let raw_frame = (slot as f64 * SLOT_LEN_S + 4.0) * VIDEO_FPS;
            let onset_grid = (raw_frame / DOWNSAMPLE as f64).ceil() as usize;
            let len_steps = rng.gen_range(10..=16);
            let s_lat = slot_plans[slot].lambda;
            let l_lat = slot_plans[slot - 1].lambda;
            let c_lat = slot_plans[slot].cond;
            let mix_weight = sigmoid(
                spec.speaker_effect * s_lat
                    + spec.listener_effect * l_lat
                    + spec.conditioning_effect * c_lat,
            );
            let onset_s = onset_grid as f64 * grid_dt;
            let offset_s = onset_s + len_steps as f64 * grid_dt;
            annotations.push(SmileAnnotation {
                dyad_id: dyad_id.clone(),
                listener_side,
                onset_s,
                offset_s,
                intensity: Some(intensity_for(mix_weight)),
            });
            smiles.push(SmilePlan {
                listener_side,
                onset_grid,
                len_steps,
                mix_weight,
            });
            smile_count += 1;
        }

        // ---- turns + audio + embeddings per side ----
        for side in [Side::Left, Side::Right] {
            let mut turns = Vec::new();
            let mut samples = vec![0.0f64; (duration_s * spec.sample_rate as f64) as usize];
            for (slot, plan) in slot_plans.iter().enumerate() {
                if slot_side(slot) != side {
                    continue;
                }
                let start = slot as f64 * SLOT_LEN_S;
                let end = start + SLOT_LEN_S;
                let next_cond = slot_plans.get(slot + 1).map_or(0.0, |p| p.cond);

                // audio: amplitude encodes this slot's cond latent (read as
                // speaker RMS), frequency the next slot's (read as listener
                // mean pitch by anchors in slot+1)
                let amplitude = 0.15 + 0.05 * plan.cond;
                let freq = 150.0 + 60.0 * (0.8 * next_cond + 0.2 * next_cond.powi(3));
                let sr = spec.sample_rate as f64;
                let (a, b) = (
                    (start * sr) as usize,
                    ((end * sr) as usize).min(samples.len()),
                );
                for (i, s) in samples[a..b].iter_mut().enumerate() {
                    *s = amplitude * (2.0 * std::f64::consts::PI * freq * i as f64 / sr).sin();
                }

                // words: negations early (they must survive trimming at the
                // onset), comparisons + fillers spread over the turn
                let n_neg = (4.0 + 3.0 * plan.cond).round().max(0.0) as usize;
                let n_cmp = (4.5 + 2.4 * next_cond).round().max(0.0) as usize;
                let n_fill = (8.0 + 1.7 * next_cond).round().max(1.0) as usize;
                let mut words = Vec::new();
                let mut t = start + 0.2;
                for _ in 0..n_neg {
                    words.push(Word { token: "no".into(), start_s: t, end_s: t + 0.2 });
                    t += 0.3;
                }
                let mut t = start + 4.2;
                for i in 0..(n_cmp + n_fill) {
                    let token = if i < n_cmp { "best" } else { "the" };
                    words.push(Word { token: token.into(), start_s: t, end_s: t + 0.15 });
                    t += 0.25;
                }
                let turn = TurnSegment {
                    id: format!("t{slot}"),
                    dyad_id: dyad_id.clone(),
                    side,
                    start_s: start,
                    end_s: end,
                    words,
                };
                turn.validate()?;

                // embedding file: latent along u_latent plus a wiggle
                let n_frames = (SLOT_LEN_S / crate::seq2seq::EMBED_HOP_S).floor() as usize;
                let frames: Vec<Vec<f64>> = (0..n_frames)
                    .map(|f| {
                        (0..spec.embed_dim)
                            .map(|k| {
                                plan.lambda * u_latent[k]
                                    + 0.1 * f as f64 * u_ramp[k]
                                    + 0.05 * ((1.7 * f as f64 + slot as f64).sin()) * u_wiggle[k]
                            })
                            .collect()
                    })
                    .collect();
                let emb_name = crate::seq2seq::FileBackedProvider::turn_file_name(
                    &dyad_id,
                    side,
                    &format!("t{slot}"),
                );
                write_embedding_file(&embeddings_dir.join(emb_name), &frames, spec.embed_dim)?;

                turns.push(turn);
            }
            write_turns_csv(&out_dir.join(format!("{dyad_id}_{side}_turns.csv")), &turns)?;
            write_wav(
                &out_dir.join(format!("{dyad_id}_{side}.wav")),
                &Waveform { samples, sample_rate: spec.sample_rate },
            )?;
        }

        // ---- landmarks per side ----
        let n_grid = (duration_s * VIDEO_FPS) as usize / DOWNSAMPLE;
        for side in [Side::Left, Side::Right] {
            // slow per-dimension jitter so non-smile windows carry motion
            // below the smile scale
            let phases: Vec<f64> = (0..2 * SYNTH_LANDMARKS)
                .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                .collect();
            let rates: Vec<f64> = (0..2 * SYNTH_LANDMARKS)
                .map(|_| rng.gen_range(0.15..0.45))
                .collect();

            // positions on the downsampled grid
            let mut grid_frames: Vec<Vec<Point>> = Vec::with_capacity(n_grid);
            let base = base_face();
            let mut smile_offset = [Point::new(0.0, 0.0); SYNTH_LANDMARKS];
            let my_smiles: Vec<&SmilePlan> =
                smiles.iter().filter(|s| s.listener_side == side).collect();
            for g in 0..n_grid {
                // accumulate smile deltas that end at grid step g
                for smile in &my_smiles {
                    if g > smile.onset_grid && g <= smile.onset_grid + smile.len_steps {
                        let step = g - smile.onset_grid - 1;
                        let v = pattern_value(smile.mix_weight, step, smile.len_steps)
                            - pattern_mean(smile.mix_weight, smile.len_steps);
                        for (idx, dir) in motion_dirs() {
                            smile_offset[idx].x += spec.motion_scale * v * dir.x;
                            smile_offset[idx].y += spec.motion_scale * v * dir.y;
                        }
                    }
                }
                let t = g as f64 * grid_dt;
                let frame: Vec<Point> = (0..SYNTH_LANDMARKS)
                    .map(|p| {
                        if p < 4 {
                            base[p] // stable subset is pinned: alignment is exact identity
                        } else {
                            let jx = spec.noise_level
                                * (rates[2 * p] * t + phases[2 * p]).sin();
                            let jy = spec.noise_level
                                * (rates[2 * p + 1] * t + phases[2 * p + 1]).sin();
                            Point::new(
                                base[p].x + smile_offset[p].x + jx,
                                base[p].y + smile_offset[p].y + jy,
                            )
                        }
                    })
                    .collect();
                grid_frames.push(frame);
            }

            // upsample to 25 fps by linear interpolation between grid frames
            let n_full = n_grid * DOWNSAMPLE;
            let mut full = Vec::with_capacity(n_full);
            for f in 0..n_full {
                let g = f / DOWNSAMPLE;
                let rem = (f % DOWNSAMPLE) as f64 / DOWNSAMPLE as f64;
                let a = &grid_frames[g];
                let b = &grid_frames[(g + 1).min(n_grid - 1)];
                let frame: Vec<Point> = (0..SYNTH_LANDMARKS)
                    .map(|p| {
                        Point::new(
                            a[p].x + (b[p].x - a[p].x) * rem,
                            a[p].y + (b[p].y - a[p].y) * rem,
                        )
                    })
                    .collect();
                full.push(LandmarkFrame::new(frame));
            }
            let seq = LandmarkSequence::new(full, VIDEO_FPS, 0.0)?;
            write_landmark_csv(&out_dir.join(format!("{dyad_id}_{side}_landmarks.csv")), &seq)?;
        }

        records.push(DyadRecord {
            dyad_id: dyad_id.clone(),
            relationship,
            left_person: PersonMeta { person_id: format!("{dyad_id}L"), sex: left_sex },
            right_person: PersonMeta { person_id: format!("{dyad_id}R"), sex: right_sex },
            video_fps: VIDEO_FPS,
            video_duration_s: duration_s,
            landmark_count: SYNTH_LANDMARKS,
            audio: SidePaths {
                left: out_dir.join(format!("{dyad_id}_left.wav")),
                right: out_dir.join(format!("{dyad_id}_right.wav")),
            },
            landmarks: SidePaths {
                left: out_dir.join(format!("{dyad_id}_left_landmarks.csv")),
                right: out_dir.join(format!("{dyad_id}_right_landmarks.csv")),
            },
            transcripts: SidePaths {
                left: out_dir.join(format!("{dyad_id}_left_turns.csv")),
                right: out_dir.join(format!("{dyad_id}_right_turns.csv")),
            },
        });
    }

    let manifest_path = out_dir.join("manifest.json");
    write_manifest(&manifest_path, &records)?;
    let annotations_path = out_dir.join("annotations.csv");
    write_annotations_csv(&annotations_path, &annotations)?;
    let index_map_path = out_dir.join("index_map.json");
    let map = LandmarkIndexMap::synthetic_8();
    std::fs::write(&index_map_path, serde_json::to_string_pretty(&map)?)
        .map_err(|e| Error::io(index_map_path.display().to_string(), e))?;
    let lexicons_path = out_dir.join("lexicons.json");
    crate::features::write_lexicons(&lexicons_path, &crate::features::default_lexicons())?;
    let spec_echo = out_dir.join("synthetic_spec.json");
    std::fs::write(&spec_echo, serde_json::to_string_pretty(spec)?)
        .map_err(|e| Error::io(spec_echo.display().to_string(), e))?;

    Ok(SynthSummary {
        manifest_path,
        annotations_path,
        index_map_path,
        embeddings_dir,
        dyad_count: spec.dyad_count,
        smile_count,
    })
}

/// Which side speaks in a slot: left on even, right on odd.
pub fn slot_side(slot: usize) -> Side {
    if slot.is_multiple_of(2) {
        Side::Left
    } else {
        Side::Right
    }
}
