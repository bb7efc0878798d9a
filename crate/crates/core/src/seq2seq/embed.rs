//! Turn audio embeddings.
//!
//! The pretrained embedding network itself is out of scope; embeddings come
//! either from precomputed per-turn binary files or from a deterministic
//! synthetic provider (log band energies pooled per hop, mixed by a seeded
//! projection) for desk-scale runs.
//!
//! File layout: `[magic u32][D u32][T u32][T*D float32]`, all little-endian,
//! one file per turn, named `{dyad_id}_{side}_{turn_id}.bin`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::corpus::Side;
use crate::error::{Error, Result};
use crate::features::wav::Waveform;
use crate::seeds::stream_rng;

/// One embedding frame per 0.96 s hop.
pub const EMBED_HOP_S: f64 = 0.96;
/// Input context cap: 60 s of turn audio.
pub const MAX_CONTEXT_FRAMES: usize = 63;

pub const EMBED_MAGIC: u32 = u32::from_le_bytes(*b"BCE1");

#[derive(Debug, Clone, PartialEq)]
pub struct AudioEmbeddingSequence {
    /// `T` frames of `D` values.
    pub frames: Vec<Vec<f64>>,
    /// Source span in seconds, relative to the side audio.
    pub span_s: (f64, f64),
    /// True when empty audio was padded with a single zero frame.
    pub padded: bool,
}

impl AudioEmbeddingSequence {
    pub fn dim(&self) -> usize {
        self.frames.first().map_or(0, |f| f.len())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Mean over frames; used to initialize the encoder hidden state.
    pub fn mean_frame(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for f in &self.frames {
            for (o, v) in out.iter_mut().zip(f) {
                *o += v / self.frames.len() as f64;
            }
        }
        out
    }
}

/// Everything a provider may need to embed one turn span.
#[derive(Debug)]
pub struct TurnAudio<'a> {
    pub dyad_id: &'a str,
    pub side: Side,
    pub turn_id: &'a str,
    /// Full side audio. The synthetic provider slices it by `span_s`.
    pub waveform: &'a Waveform,
    pub turn_start_s: f64,
    /// Absolute span within the side audio (already trimmed to the onset
    /// for speaker turns).
    pub span_s: (f64, f64),
}

pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed_turn(&self, turn: &TurnAudio) -> Result<AudioEmbeddingSequence>;
}

/// Embeds a turn span and applies the shared contract: empty audio becomes
/// a single zero frame (flagged), and only the most recent
/// [`MAX_CONTEXT_FRAMES`] frames are kept.
pub fn embed_audio(
    provider: &dyn EmbeddingProvider,
    turn: &TurnAudio,
) -> Result<AudioEmbeddingSequence> {
    let mut seq = provider.embed_turn(turn)?;
    if seq.frames.is_empty() {
        seq.frames.push(vec![0.0; provider.dim()]);
        seq.padded = true;
    }
    if seq.frames.len() > MAX_CONTEXT_FRAMES {
        let drop = seq.frames.len() - MAX_CONTEXT_FRAMES;
        seq.frames.drain(..drop);
        seq.span_s.0 += drop as f64 * EMBED_HOP_S;
    }
    Ok(seq)
}

// ---------------------------------------------------------------------------
// file-backed provider
// ---------------------------------------------------------------------------

pub fn write_embedding_file(path: &Path, frames: &[Vec<f64>], dim: usize) -> Result<()> {
    let mut buf: Vec<u8> = Vec::with_capacity(12 + frames.len() * dim * 4);
    buf.extend_from_slice(&EMBED_MAGIC.to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    buf.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    for frame in frames {
        if frame.len() != dim {
            return Err(Error::invalid("embedding frame dimension mismatch"));
        }
        for &v in frame {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(&buf).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_embedding_file(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    if bytes.len() < 12 {
        return Err(Error::invalid(format!("{}: truncated embedding file", path.display())));
    }
    let magic = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if magic != EMBED_MAGIC {
        return Err(Error::invalid(format!(
            "{}: bad magic {magic:#010x}",
            path.display()
        )));
    }
    let d = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let t = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let want = 12 + 4 * d * t;
    if bytes.len() != want {
        return Err(Error::invalid(format!(
            "{}: expected {want} bytes for D={d} T={t}, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let mut frames = Vec::with_capacity(t);
    let mut off = 12;
    for _ in 0..t {
        let mut frame = Vec::with_capacity(d);
        for _ in 0..d {
            frame.push(f64::from(f32::from_le_bytes(
                bytes[off..off + 4].try_into().unwrap(),
            )));
            off += 4;
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Precomputed per-turn embeddings on disk.
pub struct FileBackedProvider {
    dir: PathBuf,
    dim: usize,
}

impl FileBackedProvider {
    pub fn new(dir: impl Into<PathBuf>, dim: usize) -> Self {
        FileBackedProvider { dir: dir.into(), dim }
    }

    pub fn turn_file_name(dyad_id: &str, side: Side, turn_id: &str) -> String {
        format!("{dyad_id}_{side}_{turn_id}.bin")
    }
}

impl EmbeddingProvider for FileBackedProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_turn(&self, turn: &TurnAudio) -> Result<AudioEmbeddingSequence> {
        let path = self
            .dir
            .join(Self::turn_file_name(turn.dyad_id, turn.side, turn.turn_id));
        let frames = read_embedding_file(&path)?;
        if let Some(f) = frames.first() {
            if f.len() != self.dim {
                return Err(Error::invalid(format!(
                    "{}: dimension {} does not match configured {}",
                    path.display(),
                    f.len(),
                    self.dim
                )));
            }
        }
        // keep the frames whose hop lies inside the requested span
        let rel_start = (turn.span_s.0 - turn.turn_start_s).max(0.0);
        let rel_end = (turn.span_s.1 - turn.turn_start_s).max(0.0);
        let first = (rel_start / EMBED_HOP_S).floor() as usize;
        let last = ((rel_end / EMBED_HOP_S).floor() as usize).min(frames.len());
        let kept = if first >= last {
            Vec::new()
        } else {
            frames[first..last].to_vec()
        };
        Ok(AudioEmbeddingSequence {
            frames: kept,
            span_s: turn.span_s,
            padded: false,
        })
    }
}

// ---------------------------------------------------------------------------
// synthetic provider
// ---------------------------------------------------------------------------

const BAND_COUNT: usize = 16;

/// Deterministic waveform-derived embeddings: per 0.96 s hop, log band
/// energies over [`BAND_COUNT`] frequency bands, mixed into `dim` outputs by
/// a projection drawn once from the seed.
pub struct SyntheticProvider {
    dim: usize,
    projection: Vec<Vec<f64>>, // dim x BAND_COUNT
}

impl SyntheticProvider {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, "synthetic-embeddings");
        let projection = (0..dim)
            .map(|_| (0..BAND_COUNT).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        SyntheticProvider { dim, projection }
    }

    fn embed_window(&self, window: &[f64], sample_rate: u32) -> Vec<f64> {
        // Goertzel-style band energies at log-spaced center frequencies.
        let sr = sample_rate as f64;
        let mut bands = [0.0f64; BAND_COUNT];
        for (b, band) in bands.iter_mut().enumerate() {
            let freq = 60.0 * (sr / 2.0 / 60.0).powf(b as f64 / (BAND_COUNT - 1) as f64);
            let omega = 2.0 * std::f64::consts::PI * freq / sr;
            let (mut re, mut im) = (0.0, 0.0);
            // stride long windows for speed; determinism is unaffected
            let stride = (window.len() / 2048).max(1);
            let mut idx = 0;
            while idx < window.len() {
                let phase = omega * idx as f64;
                re += window[idx] * phase.cos();
                im += window[idx] * phase.sin();
                idx += stride;
            }
            let n = (window.len() / stride).max(1) as f64;
            *band = ((re * re + im * im) / (n * n) + 1e-12).ln();
        }
        self.projection
            .iter()
            .map(|row| row.iter().zip(bands.iter()).map(|(p, b)| p * b).sum())
            .collect()
    }
}

impl EmbeddingProvider for SyntheticProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_turn(&self, turn: &TurnAudio) -> Result<AudioEmbeddingSequence> {
        if turn.waveform.sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        let span = turn.waveform.slice_span(turn.span_s.0, turn.span_s.1);
        let hop = (EMBED_HOP_S * span.sample_rate as f64).round() as usize;
        let n_frames = span.samples.len().checked_div(hop).unwrap_or(0);
        let frames = (0..n_frames)
            .map(|i| self.embed_window(&span.samples[i * hop..(i + 1) * hop], span.sample_rate))
            .collect();
        Ok(AudioEmbeddingSequence {
            frames,
            span_s: turn.span_s,
            padded: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(dur_s: f64, sr: u32) -> Waveform {
        let n = (dur_s * sr as f64) as usize;
        Waveform {
            samples: (0..n)
                .map(|i| 0.3 * (2.0 * std::f64::consts::PI * 200.0 * i as f64 / sr as f64).sin())
                .collect(),
            sample_rate: sr,
        }
    }

    fn turn_for(wave: &Waveform, span: (f64, f64)) -> TurnAudio<'_> {
        TurnAudio {
            dyad_id: "d0",
            side: Side::Left,
            turn_id: "t0",
            waveform: wave,
            turn_start_s: span.0,
            span_s: span,
        }
    }

    #[test]
    fn two_seconds_give_two_frames() {
        // hop arithmetic: floor(2.0 / 0.96) = 2
        let wave = tone(2.0, 8000);
        let provider = SyntheticProvider::new(8, 1);
        let seq = embed_audio(&provider, &turn_for(&wave, (0.0, 2.0))).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.dim(), 8);
    }

    #[test]
    fn long_audio_is_capped_at_context_frames() {
        let wave = tone(120.0, 8000);
        let provider = SyntheticProvider::new(4, 1);
        let seq = embed_audio(&provider, &turn_for(&wave, (0.0, 120.0))).unwrap();
        assert_eq!(seq.len(), MAX_CONTEXT_FRAMES);
        // the kept frames are the most recent ones
        assert!(seq.span_s.0 > 0.0);
    }

    #[test]
    fn identical_waveforms_embed_identically() {
        let wave = tone(3.0, 8000);
        let provider = SyntheticProvider::new(6, 7);
        let a = embed_audio(&provider, &turn_for(&wave, (0.0, 3.0))).unwrap();
        let b = embed_audio(&provider, &turn_for(&wave, (0.0, 3.0))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_audio_pads_one_zero_frame() {
        let wave = tone(0.5, 8000);
        let provider = SyntheticProvider::new(5, 1);
        let seq = embed_audio(&provider, &turn_for(&wave, (0.0, 0.5))).unwrap();
        assert!(seq.padded);
        assert_eq!(seq.len(), 1);
        assert!(seq.frames[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embedding_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        let frames = vec![vec![1.5, -2.25, 0.5], vec![0.0, 3.75, -1.0]];
        write_embedding_file(&path, &frames, 3).unwrap();
        let back = read_embedding_file(&path).unwrap();
        assert_eq!(back, frames);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        std::fs::write(&path, [0u8; 16]).unwrap();
        assert!(read_embedding_file(&path).is_err());
    }

    #[test]
    fn file_backed_slices_span_frames() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let name = FileBackedProvider::turn_file_name("d0", Side::Left, "t3");
        write_embedding_file(&dir.path().join(name), &frames, 1).unwrap();
        let provider = FileBackedProvider::new(dir.path(), 1);
        let wave = tone(0.1, 8000); // unused by this provider
        let turn = TurnAudio {
            dyad_id: "d0",
            side: Side::Left,
            turn_id: "t3",
            waveform: &wave,
            turn_start_s: 100.0,
            // 2.0 s into the turn: floor(2.0/0.96) = 2 frames kept
            span_s: (100.0, 102.0),
        };
        let seq = embed_audio(&provider, &turn).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.frames[0], vec![0.0]);
        assert_eq!(seq.frames[1], vec![1.0]);
    }
}
