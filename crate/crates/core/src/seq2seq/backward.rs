//! Reverse-mode gradients through the full unrolled graph: output head,
//! decoder GRU, attention, recursive prediction feeding, decoder init, and
//! encoder GRU back to the listener projection.
//!
//! Validated against central finite differences on a tiny model (see tests
//! and the acceptance suite).

use ndarray::{s, Array1, Array2};

use super::model::{Forward, GruCache, GruModel, ModelInput, ModelParams};
use super::Ablation;
use crate::error::{Error, Result};

impl GruModel {
    /// Gradients of the forward MSE loss with respect to every parameter.
    pub fn backward(
        &self,
        input: &ModelInput,
        targets: &[Vec<f64>],
        fwd: &Forward,
    ) -> Result<ModelParams> {
        self.backward_with_ablation(input, targets, fwd, Ablation::SpeakerListenerCond)
    }

    pub fn backward_with_ablation(
        &self,
        input: &ModelInput,
        targets: &[Vec<f64>],
        fwd: &Forward,
        ablation: Ablation,
    ) -> Result<ModelParams> {
        let n = fwd.predictions.len();
        if targets.len() != n {
            return Err(Error::invalid("target/prediction length mismatch"));
        }
        let he = self.config.enc_hidden;
        let out_dim = self.config.output_dim();
        let t_enc = fwd.enc_caches.len();
        let p = &self.params;
        let mut g = ModelParams::zeros(&self.config);

        // d loss / d prediction; recursive feeding adds to earlier entries
        let denom = (n * out_dim) as f64;
        let mut dy: Vec<Array1<f64>> = fwd
            .predictions
            .iter()
            .zip(targets)
            .map(|(pred, tgt)| {
                Array1::from_iter(pred.iter().zip(tgt).map(|(a, b)| 2.0 * (a - b) / denom))
            })
            .collect();

        let mut ds: Vec<Array1<f64>> = (0..=n).map(|_| Array1::zeros(self.config.dec_hidden)).collect();
        let mut dh_enc: Vec<Array1<f64>> = (0..=t_enc).map(|_| Array1::zeros(he)).collect();

        for t in (0..n).rev() {
            // output head: y_t = out_w s_{t+1} + out_b
            let dyt = dy[t].clone();
            outer_add(&mut g.out_w, &dyt, &fwd.s[t + 1]);
            g.out_b += &dyt;
            ds[t + 1] += &p.out_w.t().dot(&dyt);

            // decoder GRU step t: s_prev = s[t]
            let (dx, dh_prev) = gru_backward(
                &p.dec_w_ih,
                &p.dec_w_hh,
                &mut g.dec_w_ih,
                &mut g.dec_w_hh,
                &mut g.dec_b_ih,
                &mut g.dec_b_hh,
                &fwd.dec_caches[t],
                &fwd.s[t],
                &ds[t + 1],
            );
            ds[t] += &dh_prev;

            let dctx = dx.slice(s![..he]).to_owned();
            let dprev = dx.slice(s![he..]).to_owned();
            if t > 0 && !fwd.tf_used[t] {
                // the model's own prediction was fed forward
                dy[t - 1] += &dprev;
            }

            // attention at step t (queries s[t], attends enc_h[1..])
            let cache = &fwd.attn[t];
            let t_out = cache.alpha.len();
            let mut d_alpha = Array1::zeros(t_out);
            for i in 0..t_out {
                d_alpha[i] = dctx.dot(&fwd.enc_h[i + 1]);
                dh_enc[i + 1].scaled_add(cache.alpha[i], &dctx);
            }
            let dot: f64 = (0..t_out).map(|i| cache.alpha[i] * d_alpha[i]).sum();
            let mut sum_da = Array1::zeros(self.config.attn_dim);
            for i in 0..t_out {
                let dscore = cache.alpha[i] * (d_alpha[i] - dot);
                let u_i = cache.u.row(i);
                g.attn_v.scaled_add(dscore, &u_i);
                // da = dscore * v ⊙ (1 - u²)
                let da: Array1<f64> = (0..self.config.attn_dim)
                    .map(|a| dscore * p.attn_v[a] * (1.0 - u_i[a] * u_i[a]))
                    .collect();
                outer_add(&mut g.attn_w_enc, &da, &fwd.enc_h[i + 1]);
                dh_enc[i + 1] += &p.attn_w_enc.t().dot(&da);
                sum_da += &da;
            }
            outer_add(&mut g.attn_w_dec, &sum_da, &fwd.s[t]);
            ds[t] += &p.attn_w_dec.t().dot(&sum_da);
        }

        // decoder init: s_0 = ReLU(dec_init_w [h_T ; cond] + dec_init_b)
        let ds0_pre: Array1<f64> = fwd.s0_pre
            .iter()
            .zip(ds[0].iter())
            .map(|(&pre, &d)| if pre > 0.0 { d } else { 0.0 })
            .collect();
        outer_add(&mut g.dec_init_w, &ds0_pre, &fwd.init_in);
        g.dec_init_b += &ds0_pre;
        let dinit = p.dec_init_w.t().dot(&ds0_pre);
        dh_enc[t_enc] += &dinit.slice(s![..he]);

        // encoder backward through time
        let mut dh = Array1::zeros(he);
        for t in (0..t_enc).rev() {
            dh += &dh_enc[t + 1];
            let (_dx, dh_prev) = gru_backward(
                &p.enc_w_ih,
                &p.enc_w_hh,
                &mut g.enc_w_ih,
                &mut g.enc_w_hh,
                &mut g.enc_b_ih,
                &mut g.enc_b_hh,
                &fwd.enc_caches[t],
                &fwd.enc_h[t],
                &dh,
            );
            dh = dh_prev;
        }
        dh += &dh_enc[0];

        // listener projection fed h_0 only when the listener path is active
        if ablation.uses_listener() {
            let lmean = Array1::from_vec(input.listener_mean.to_vec());
            outer_add(&mut g.listener_w, &dh, &lmean);
            g.listener_b += &dh;
        }

        Ok(g)
    }
}

/// GRU cell backward. Returns (dx, dh_prev) and accumulates weight grads.
#[allow(clippy::too_many_arguments)]
fn gru_backward(
    w_ih: &Array2<f64>,
    w_hh: &Array2<f64>,
    gw_ih: &mut Array2<f64>,
    gw_hh: &mut Array2<f64>,
    gb_ih: &mut Array1<f64>,
    gb_hh: &mut Array1<f64>,
    cache: &GruCache,
    h_prev: &Array1<f64>,
    dh: &Array1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let h = h_prev.len();
    let mut d_gi = Array1::zeros(3 * h);
    let mut d_gh = Array1::zeros(3 * h);
    for j in 0..h {
        let (r, z, n, hh) = (cache.r[j], cache.z[j], cache.n[j], cache.hh[j]);
        let dz = dh[j] * (h_prev[j] - n);
        let da_z = dz * z * (1.0 - z);
        let dn = dh[j] * (1.0 - z);
        let da_n = dn * (1.0 - n * n);
        let dhh = da_n * r;
        let dr = da_n * hh;
        let da_r = dr * r * (1.0 - r);
        d_gi[j] = da_r;
        d_gi[h + j] = da_z;
        d_gi[2 * h + j] = da_n;
        d_gh[j] = da_r;
        d_gh[h + j] = da_z;
        d_gh[2 * h + j] = dhh;
    }
    outer_add(gw_ih, &d_gi, &cache.x);
    *gb_ih += &d_gi;
    outer_add(gw_hh, &d_gh, h_prev);
    *gb_hh += &d_gh;
    let dx = w_ih.t().dot(&d_gi);
    let mut dh_prev = w_hh.t().dot(&d_gh);
    for j in 0..h {
        dh_prev[j] += dh[j] * cache.z[j];
    }
    (dx, dh_prev)
}

fn outer_add(m: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        let mut row = m.row_mut(i);
        for (j, &bj) in b.iter().enumerate() {
            row[j] += ai * bj;
        }
    }
}
