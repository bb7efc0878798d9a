//! Model parameters and the forward pass.
//!
//! Encoder: one-layer GRU over speaker embedding frames, hidden state
//! initialized from a linear projection of the listener's mean turn
//! embedding (zero when the listener input is ablated).
//!
//! Decoder init: ReLU(Linear([encoder final hidden ; conditioning vector])),
//! with the conditioning entries zeroed when ablated so every configuration
//! shares parameter shapes.
//!
//! Per decode step: additive attention `score_i = v' tanh(W_a h_i + W_b s)`
//! over encoder outputs, context = attention-weighted sum; the decoder GRU
//! consumes `[context ; previous output frame]` and a linear head emits the
//! next normalized displacement frame.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Ablation;
use crate::error::{Error, Result};
use crate::seeds::stream_rng;

pub const COND_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Embedding dimension D.
    pub embed_dim: usize,
    /// Encoder hidden size.
    pub enc_hidden: usize,
    /// Decoder hidden size.
    pub dec_hidden: usize,
    /// Attention projection size.
    pub attn_dim: usize,
    /// Landmarks per frame; output frames carry 2K values.
    pub landmark_count: usize,
    /// Decoder steps per generation (one second at the downsampled rate).
    pub output_steps: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 128,
            enc_hidden: 128,
            dec_hidden: 128,
            attn_dim: 64,
            landmark_count: 68,
            output_steps: 8,
        }
    }
}

impl ModelConfig {
    pub fn output_dim(&self) -> usize {
        2 * self.landmark_count
    }

    pub fn dec_input_dim(&self) -> usize {
        self.enc_hidden + self.output_dim()
    }
}

/// All trainable tensors. Gate blocks are ordered `[reset, update, candidate]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub enc_w_ih: Array2<f64>,
    pub enc_w_hh: Array2<f64>,
    pub enc_b_ih: Array1<f64>,
    pub enc_b_hh: Array1<f64>,
    pub listener_w: Array2<f64>,
    pub listener_b: Array1<f64>,
    pub dec_init_w: Array2<f64>,
    pub dec_init_b: Array1<f64>,
    pub attn_w_enc: Array2<f64>,
    pub attn_w_dec: Array2<f64>,
    pub attn_v: Array1<f64>,
    pub dec_w_ih: Array2<f64>,
    pub dec_w_hh: Array2<f64>,
    pub dec_b_ih: Array1<f64>,
    pub dec_b_hh: Array1<f64>,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let (d, he, hd, ha) = (
            config.embed_dim,
            config.enc_hidden,
            config.dec_hidden,
            config.attn_dim,
        );
        let out = config.output_dim();
        ModelParams {
            enc_w_ih: Array2::zeros((3 * he, d)),
            enc_w_hh: Array2::zeros((3 * he, he)),
            enc_b_ih: Array1::zeros(3 * he),
            enc_b_hh: Array1::zeros(3 * he),
            listener_w: Array2::zeros((he, d)),
            listener_b: Array1::zeros(he),
            dec_init_w: Array2::zeros((hd, he + COND_DIM)),
            dec_init_b: Array1::zeros(hd),
            attn_w_enc: Array2::zeros((ha, he)),
            attn_w_dec: Array2::zeros((ha, hd)),
            attn_v: Array1::zeros(ha),
            dec_w_ih: Array2::zeros((3 * hd, config.dec_input_dim())),
            dec_w_hh: Array2::zeros((3 * hd, hd)),
            dec_b_ih: Array1::zeros(3 * hd),
            dec_b_hh: Array1::zeros(3 * hd),
            out_w: Array2::zeros((out, hd)),
            out_b: Array1::zeros(out),
        }
    }

    /// Uniform(-1/sqrt(fan_in), +) initialization, deterministic per seed.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = stream_rng(seed, "init");
        let mut params = Self::zeros(config);
        for (fan_in, tensor) in [
            (config.embed_dim, &mut params.enc_w_ih),
            (config.enc_hidden, &mut params.enc_w_hh),
            (config.embed_dim, &mut params.listener_w),
            (config.enc_hidden + COND_DIM, &mut params.dec_init_w),
            (config.enc_hidden, &mut params.attn_w_enc),
            (config.dec_hidden, &mut params.attn_w_dec),
            (config.dec_input_dim(), &mut params.dec_w_ih),
            (config.dec_hidden, &mut params.dec_w_hh),
            (config.dec_hidden, &mut params.out_w),
        ] {
            let a = 1.0 / (fan_in as f64).sqrt();
            for v in tensor.iter_mut() {
                *v = rng.gen_range(-a..a);
            }
        }
        for (fan_in, bias) in [
            (config.enc_hidden, &mut params.enc_b_ih),
            (config.enc_hidden, &mut params.enc_b_hh),
            (config.embed_dim, &mut params.listener_b),
            (config.enc_hidden + COND_DIM, &mut params.dec_init_b),
            (config.attn_dim, &mut params.attn_v),
            (config.dec_hidden, &mut params.dec_b_ih),
            (config.dec_hidden, &mut params.dec_b_hh),
            (config.dec_hidden, &mut params.out_b),
        ] {
            let a = 1.0 / (fan_in as f64).sqrt();
            for v in bias.iter_mut() {
                *v = rng.gen_range(-a..a);
            }
        }
        params
    }

    /// Flat mutable views in a fixed field order; the basis for SGD,
    /// clipping, checkpoints, and finite-difference checks.
    pub fn flat_views_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.enc_w_ih.as_slice_mut().unwrap(),
            self.enc_w_hh.as_slice_mut().unwrap(),
            self.enc_b_ih.as_slice_mut().unwrap(),
            self.enc_b_hh.as_slice_mut().unwrap(),
            self.listener_w.as_slice_mut().unwrap(),
            self.listener_b.as_slice_mut().unwrap(),
            self.dec_init_w.as_slice_mut().unwrap(),
            self.dec_init_b.as_slice_mut().unwrap(),
            self.attn_w_enc.as_slice_mut().unwrap(),
            self.attn_w_dec.as_slice_mut().unwrap(),
            self.attn_v.as_slice_mut().unwrap(),
            self.dec_w_ih.as_slice_mut().unwrap(),
            self.dec_w_hh.as_slice_mut().unwrap(),
            self.dec_b_ih.as_slice_mut().unwrap(),
            self.dec_b_hh.as_slice_mut().unwrap(),
            self.out_w.as_slice_mut().unwrap(),
            self.out_b.as_slice_mut().unwrap(),
        ]
    }

    pub fn flat_views(&self) -> Vec<&[f64]> {
        vec![
            self.enc_w_ih.as_slice().unwrap(),
            self.enc_w_hh.as_slice().unwrap(),
            self.enc_b_ih.as_slice().unwrap(),
            self.enc_b_hh.as_slice().unwrap(),
            self.listener_w.as_slice().unwrap(),
            self.listener_b.as_slice().unwrap(),
            self.dec_init_w.as_slice().unwrap(),
            self.dec_init_b.as_slice().unwrap(),
            self.attn_w_enc.as_slice().unwrap(),
            self.attn_w_dec.as_slice().unwrap(),
            self.attn_v.as_slice().unwrap(),
            self.dec_w_ih.as_slice().unwrap(),
            self.dec_w_hh.as_slice().unwrap(),
            self.dec_b_ih.as_slice().unwrap(),
            self.dec_b_hh.as_slice().unwrap(),
            self.out_w.as_slice().unwrap(),
            self.out_b.as_slice().unwrap(),
        ]
    }

    pub fn flat_len(&self) -> usize {
        self.flat_views().iter().map(|v| v.len()).sum()
    }

    pub fn get_flat(&self, mut idx: usize) -> f64 {
        for view in self.flat_views() {
            if idx < view.len() {
                return view[idx];
            }
            idx -= view.len();
        }
        panic!("flat index out of range");
    }

    pub fn add_flat(&mut self, mut idx: usize, delta: f64) {
        for view in self.flat_views_mut() {
            if idx < view.len() {
                view[idx] += delta;
                return;
            }
            idx -= view.len();
        }
        panic!("flat index out of range");
    }

    pub fn grad_norm(&self) -> f64 {
        self.flat_views()
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for view in self.flat_views_mut() {
            for v in view.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.flat_views().iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// One training/generation input.
#[derive(Debug, Clone)]
pub struct ModelInput<'a> {
    /// Speaker embedding frames, T x D.
    pub speaker: &'a [Vec<f64>],
    /// Mean listener turn embedding, D.
    pub listener_mean: &'a [f64],
    /// Conditioning vector entries.
    pub conditioning: &'a [f64; 6],
}

pub(crate) struct GruCache {
    pub x: Array1<f64>,
    pub r: Array1<f64>,
    pub z: Array1<f64>,
    pub n: Array1<f64>,
    /// W_hn h_prev + b_hn, needed for the reset-gate gradient.
    pub hh: Array1<f64>,
}

pub(crate) struct AttnCache {
    /// tanh activations, T x attn_dim.
    pub u: Array2<f64>,
    pub alpha: Array1<f64>,
}

/// Everything the backward pass needs from a forward run.
pub struct Forward {
    pub loss: Option<f64>,
    /// Unclamped output frames, steps x 2K.
    pub predictions: Vec<Array1<f64>>,
    pub(crate) enc_h: Vec<Array1<f64>>,
    pub(crate) enc_caches: Vec<GruCache>,
    pub(crate) init_in: Array1<f64>,
    pub(crate) s0_pre: Array1<f64>,
    pub(crate) s: Vec<Array1<f64>>,
    pub(crate) dec_caches: Vec<GruCache>,
    pub(crate) attn: Vec<AttnCache>,
    pub(crate) tf_used: Vec<bool>,
}

/// Attention applied at one decode step.
#[derive(Debug, Clone)]
pub struct AttentionOutput {
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GruModel {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl GruModel {
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        GruModel {
            params: ModelParams::init(&config, seed),
            config,
        }
    }

    fn check_input(&self, input: &ModelInput) -> Result<()> {
        if input.speaker.is_empty() {
            return Err(Error::invalid("speaker embedding sequence is empty"));
        }
        if input.speaker.iter().any(|f| f.len() != self.config.embed_dim) {
            return Err(Error::invalid(format!(
                "speaker embedding dim mismatch (expected {})",
                self.config.embed_dim
            )));
        }
        if input.listener_mean.len() != self.config.embed_dim {
            return Err(Error::invalid(format!(
                "listener embedding dim mismatch (expected {})",
                self.config.embed_dim
            )));
        }
        Ok(())
    }

    /// Encoder pass: returns hidden states `h_0..h_T` and step caches.
    fn encode(
        &self,
        input: &ModelInput,
        ablation: Ablation,
    ) -> (Vec<Array1<f64>>, Vec<GruCache>) {
        let p = &self.params;
        let h0 = if ablation.uses_listener() {
            let lmean = Array1::from_vec(input.listener_mean.to_vec());
            p.listener_w.dot(&lmean) + &p.listener_b
        } else {
            Array1::zeros(self.config.enc_hidden)
        };
        let mut hs = Vec::with_capacity(input.speaker.len() + 1);
        let mut caches = Vec::with_capacity(input.speaker.len());
        hs.push(h0);
        for frame in input.speaker {
            let x = Array1::from_vec(frame.clone());
            let (h, cache) = gru_step(&p.enc_w_ih, &p.enc_w_hh, &p.enc_b_ih, &p.enc_b_hh, x, hs.last().unwrap());
            hs.push(h);
            caches.push(cache);
        }
        (hs, caches)
    }

    /// Additive attention of `s_prev` over encoder outputs `enc_h[1..]`.
    fn attend(&self, enc_h: &[Array1<f64>], s_prev: &Array1<f64>) -> (Array1<f64>, AttnCache) {
        let p = &self.params;
        let t = enc_h.len() - 1;
        let wb_s = p.attn_w_dec.dot(s_prev);
        let mut u = Array2::zeros((t, self.config.attn_dim));
        let mut scores = Array1::zeros(t);
        for i in 0..t {
            let pre = p.attn_w_enc.dot(&enc_h[i + 1]) + &wb_s;
            let ui = pre.mapv(f64::tanh);
            scores[i] = p.attn_v.dot(&ui);
            u.row_mut(i).assign(&ui);
        }
        // max-subtracted softmax
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut alpha = scores.mapv(|s| (s - max).exp());
        let sum = alpha.sum();
        alpha.mapv_inplace(|a| a / sum);
        let mut context = Array1::zeros(self.config.enc_hidden);
        for i in 0..t {
            context.scaled_add(alpha[i], &enc_h[i + 1]);
        }
        (context, AttnCache { u, alpha })
    }

    /// Standalone attention entry point (weights + context).
    pub fn attention(&self, enc_outputs: &[Vec<f64>], s_prev: &[f64]) -> Result<AttentionOutput> {
        if enc_outputs.is_empty() {
            return Err(Error::invalid("attention needs at least one encoder output"));
        }
        let mut enc_h = Vec::with_capacity(enc_outputs.len() + 1);
        enc_h.push(Array1::zeros(self.config.enc_hidden)); // unattended slot
        for h in enc_outputs {
            enc_h.push(Array1::from_vec(h.clone()));
        }
        let (context, cache) = self.attend(&enc_h, &Array1::from_vec(s_prev.to_vec()));
        Ok(AttentionOutput {
            weights: cache.alpha.to_vec(),
            context: context.to_vec(),
        })
    }

    /// Decoder initialization: ReLU(Linear([final hidden ; conditioning])).
    fn init_decoder(
        &self,
        final_hidden: &Array1<f64>,
        conditioning: &[f64; 6],
        ablation: Ablation,
    ) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
        let p = &self.params;
        let mut init_in = Array1::zeros(self.config.enc_hidden + COND_DIM);
        init_in.slice_mut(ndarray::s![..self.config.enc_hidden]).assign(final_hidden);
        if ablation.uses_conditioning() {
            for (j, &c) in conditioning.iter().enumerate() {
                init_in[self.config.enc_hidden + j] = c;
            }
        }
        let s0_pre = p.dec_init_w.dot(&init_in) + &p.dec_init_b;
        let s0 = s0_pre.mapv(|v| v.max(0.0));
        (init_in, s0_pre, s0)
    }

    /// Full forward pass.
    ///
    /// `targets` drives the loss and teacher forcing; `tf_mask[t]` feeds the
    /// ground-truth frame `targets[t-1]` into step `t` (step 0 always gets
    /// `first_prev`, the zero frame by default). Without targets the decode
    /// is fully recursive and no loss is produced.
    pub fn forward(
        &self,
        input: &ModelInput,
        targets: Option<&[Vec<f64>]>,
        tf_mask: Option<&[bool]>,
        n_steps: usize,
        first_prev: Option<&[f64]>,
        ablation: Ablation,
    ) -> Result<Forward> {
        self.check_input(input)?;
        if n_steps == 0 {
            return Err(Error::invalid("n_steps must be >= 1"));
        }
        let out_dim = self.config.output_dim();
        if let Some(ts) = targets {
            if ts.len() != n_steps || ts.iter().any(|t| t.len() != out_dim) {
                return Err(Error::invalid("target shape mismatch"));
            }
        }
        let p = &self.params;
        let (enc_h, enc_caches) = self.encode(input, ablation);
        let final_hidden = enc_h.last().unwrap().clone();
        let (init_in, s0_pre, s0) = self.init_decoder(&final_hidden, input.conditioning, ablation);

        let mut s = Vec::with_capacity(n_steps + 1);
        s.push(s0);
        let mut dec_caches = Vec::with_capacity(n_steps);
        let mut attn = Vec::with_capacity(n_steps);
        let mut predictions: Vec<Array1<f64>> = Vec::with_capacity(n_steps);
        let mut tf_used = vec![false; n_steps];

        for t in 0..n_steps {
            let s_prev = s.last().unwrap().clone();
            let (context, attn_cache) = self.attend(&enc_h, &s_prev);
            let prev_frame: Array1<f64> = if t == 0 {
                match first_prev {
                    Some(f) => {
                        if f.len() != out_dim {
                            return Err(Error::invalid("first_prev frame dim mismatch"));
                        }
                        Array1::from_vec(f.to_vec())
                    }
                    None => Array1::zeros(out_dim),
                }
            } else {
                let forced = tf_mask.is_some_and(|m| m[t]);
                if forced {
                    tf_used[t] = true;
                    Array1::from_vec(targets.expect("tf requires targets")[t - 1].clone())
                } else {
                    predictions[t - 1].clone()
                }
            };
            let mut x = Array1::zeros(self.config.dec_input_dim());
            x.slice_mut(ndarray::s![..self.config.enc_hidden]).assign(&context);
            x.slice_mut(ndarray::s![self.config.enc_hidden..]).assign(&prev_frame);
            let (s_next, cache) = gru_step(&p.dec_w_ih, &p.dec_w_hh, &p.dec_b_ih, &p.dec_b_hh, x, &s_prev);
            let y = p.out_w.dot(&s_next) + &p.out_b;
            s.push(s_next);
            dec_caches.push(cache);
            attn.push(attn_cache);
            predictions.push(y);
        }

        let loss = targets.map(|ts| {
            let denom = (n_steps * out_dim) as f64;
            predictions
                .iter()
                .zip(ts)
                .map(|(pred, target)| {
                    pred.iter()
                        .zip(target)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .sum::<f64>()
                / denom
        });

        Ok(Forward {
            loss,
            predictions,
            enc_h,
            enc_caches,
            init_in,
            s0_pre,
            s,
            dec_caches,
            attn,
            tf_used,
        })
    }

    /// Recursive generation; returned frames are clamped to [0, 1].
    pub fn generate(
        &self,
        input: &ModelInput,
        first_prev: Option<&[f64]>,
        n_steps: usize,
        ablation: Ablation,
    ) -> Result<Vec<Vec<f64>>> {
        let fwd = self.forward(input, None, None, n_steps, first_prev, ablation)?;
        Ok(fwd
            .predictions
            .iter()
            .map(|p| p.iter().map(|&v| v.clamp(0.0, 1.0)).collect())
            .collect())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One GRU cell step; gate blocks are `[reset, update, candidate]`.
pub(crate) fn gru_step(
    w_ih: &Array2<f64>,
    w_hh: &Array2<f64>,
    b_ih: &Array1<f64>,
    b_hh: &Array1<f64>,
    x: Array1<f64>,
    h_prev: &Array1<f64>,
) -> (Array1<f64>, GruCache) {
    let h = h_prev.len();
    let gi = w_ih.dot(&x) + b_ih;
    let gh = w_hh.dot(h_prev) + b_hh;
    let mut r = Array1::zeros(h);
    let mut z = Array1::zeros(h);
    let mut n = Array1::zeros(h);
    let mut hh = Array1::zeros(h);
    for j in 0..h {
        r[j] = sigmoid(gi[j] + gh[j]);
        z[j] = sigmoid(gi[h + j] + gh[h + j]);
        hh[j] = gh[2 * h + j];
        n[j] = (gi[2 * h + j] + r[j] * hh[j]).tanh();
    }
    let mut h_new = Array1::zeros(h);
    for j in 0..h {
        h_new[j] = (1.0 - z[j]) * n[j] + z[j] * h_prev[j];
    }
    (h_new, GruCache { x, r, z, n, hh })
}
