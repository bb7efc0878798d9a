//! Prosody extraction: frame-wise autocorrelation pitch tracking plus RMS
//! energy.
//!
//! Pitch uses 25 ms windows with a 10 ms hop. A frame is voiced when the
//! best normalized autocorrelation peak in the 60-400 Hz lag band reaches
//! 0.3; the peak lag is refined with parabolic interpolation before
//! converting to Hz.

use serde::{Deserialize, Serialize};

use super::wav::Waveform;
use crate::error::{Error, Result};

const WINDOW_S: f64 = 0.025;
const HOP_S: f64 = 0.010;
const VOICING_THRESHOLD: f64 = 0.3;
const PITCH_MIN_HZ: f64 = 60.0;
const PITCH_MAX_HZ: f64 = 400.0;
// frames quieter than this are treated as silence, not voicing candidates
const SILENCE_RMS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsodyFeatures {
    /// Mean F0 over voiced frames, Hz; 0 when fully unvoiced.
    pub mean_pitch: f64,
    /// Max minus min voiced F0, Hz; 0 with fewer than 2 voiced frames.
    pub pitch_range: f64,
    /// RMS amplitude over the whole span.
    pub rms_energy: f64,
}

pub fn extract_prosody(wave: &Waveform) -> Result<ProsodyFeatures> {
    if wave.sample_rate == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    if wave.samples.is_empty() {
        return Err(Error::invalid("empty audio span"));
    }
    let sr = wave.sample_rate as f64;
    let window = (WINDOW_S * sr).round() as usize;
    let hop = ((HOP_S * sr).round() as usize).max(1);

    let rms_energy = rms(&wave.samples);

    let mut voiced: Vec<f64> = Vec::new();
    if window >= 8 && wave.samples.len() >= window {
        let lag_min = (sr / PITCH_MAX_HZ).floor().max(2.0) as usize;
        let lag_max = ((sr / PITCH_MIN_HZ).ceil() as usize).min(window - 1);
        let mut start = 0;
        while start + window <= wave.samples.len() {
            let frame = &wave.samples[start..start + window];
            if rms(frame) > SILENCE_RMS {
                if let Some(f0) = frame_pitch(frame, sr, lag_min, lag_max) {
                    voiced.push(f0);
                }
            }
            start += hop;
        }
    }

    let (mean_pitch, pitch_range) = match voiced.len() {
        0 => (0.0, 0.0),
        1 => (voiced[0], 0.0),
        _ => {
            let mean = voiced.iter().sum::<f64>() / voiced.len() as f64;
            let max = voiced.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = voiced.iter().cloned().fold(f64::INFINITY, f64::min);
            (mean, max - min)
        }
    };
    Ok(ProsodyFeatures {
        mean_pitch,
        pitch_range,
        rms_energy,
    })
}

fn rms(samples: &[f64]) -> f64 {
    (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt()
}

/// Best-lag pitch of one frame, or `None` when unvoiced.
fn frame_pitch(frame: &[f64], sr: f64, lag_min: usize, lag_max: usize) -> Option<f64> {
    if lag_max <= lag_min {
        return None;
    }
    // normalized cross-correlation per lag
    let ncc = |lag: usize| -> f64 {
        let n = frame.len() - lag;
        let mut dot = 0.0;
        let mut e0 = 0.0;
        let mut e1 = 0.0;
        for i in 0..n {
            dot += frame[i] * frame[i + lag];
            e0 += frame[i] * frame[i];
            e1 += frame[i + lag] * frame[i + lag];
        }
        if e0 <= 0.0 || e1 <= 0.0 {
            0.0
        } else {
            dot / (e0 * e1).sqrt()
        }
    };
    let values: Vec<f64> = (lag_min..=lag_max).map(&ncc).collect();
    let global_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if global_max < VOICING_THRESHOLD {
        return None;
    }
    // A periodic signal peaks at every multiple of its period. Take the
    // shortest-lag local maximum within reach of the global one so
    // subharmonics do not win.
    let keep = (0.95 * global_max).max(VOICING_THRESHOLD);
    let mut chosen = None;
    for (i, &v) in values.iter().enumerate() {
        let left = if i == 0 { f64::NEG_INFINITY } else { values[i - 1] };
        let right = if i + 1 == values.len() { f64::NEG_INFINITY } else { values[i + 1] };
        if v >= keep && v >= left && v >= right {
            chosen = Some(lag_min + i);
            break;
        }
    }
    let best_lag = chosen.unwrap_or_else(|| {
        // no interior local maximum cleared the bar; fall back to the peak
        let (i, _) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        lag_min + i
    });
    let best = values[best_lag - lag_min];
    // parabolic refinement around the integer peak
    let refined = if best_lag > lag_min && best_lag < lag_max {
        let ym = ncc(best_lag - 1);
        let y0 = best;
        let yp = ncc(best_lag + 1);
        let denom = ym - 2.0 * y0 + yp;
        if denom.abs() > 1e-12 {
            let delta = 0.5 * (ym - yp) / denom;
            best_lag as f64 + delta.clamp(-0.5, 0.5)
        } else {
            best_lag as f64
        }
    } else {
        best_lag as f64
    };
    Some(sr / refined)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, amp: f64, dur_s: f64, sr: u32) -> Waveform {
        let n = (dur_s * sr as f64) as usize;
        Waveform {
            samples: (0..n)
                .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin())
                .collect(),
            sample_rate: sr,
        }
    }

    #[test]
    fn pure_tone_pitch_is_recovered() {
        // synthetic-signal oracle: 220 Hz sine, 1 s at 16 kHz
        let p = extract_prosody(&sine(220.0, 0.5, 1.0, 16000)).unwrap();
        assert!((p.mean_pitch - 220.0).abs() <= 3.0, "mean_pitch {}", p.mean_pitch);
        assert!(p.pitch_range <= 6.0, "pitch_range {}", p.pitch_range);
    }

    #[test]
    fn silence_is_fully_unvoiced() {
        let wave = Waveform {
            samples: vec![0.0; 16000],
            sample_rate: 16000,
        };
        let p = extract_prosody(&wave).unwrap();
        assert_eq!(p.mean_pitch, 0.0);
        assert_eq!(p.pitch_range, 0.0);
        assert_eq!(p.rms_energy, 0.0);
    }

    #[test]
    fn rms_scales_linearly_with_gain() {
        let a = extract_prosody(&sine(150.0, 0.8, 0.5, 8000)).unwrap();
        let b = extract_prosody(&sine(150.0, 0.4, 0.5, 8000)).unwrap();
        assert!((a.rms_energy - 2.0 * b.rms_energy).abs() < 1e-12);
    }

    #[test]
    fn empty_audio_is_an_error() {
        let wave = Waveform {
            samples: vec![],
            sample_rate: 8000,
        };
        assert!(extract_prosody(&wave).is_err());
    }

    #[test]
    fn extraction_is_deterministic() {
        let wave = sine(180.0, 0.3, 0.7, 8000);
        let a = extract_prosody(&wave).unwrap();
        let b = extract_prosody(&wave).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn low_sample_rate_tone_works() {
        // the synthetic corpus uses 8 kHz audio
        let p = extract_prosody(&sine(150.0, 0.4, 1.0, 8000)).unwrap();
        assert!((p.mean_pitch - 150.0).abs() <= 3.0, "mean_pitch {}", p.mean_pitch);
    }
}
