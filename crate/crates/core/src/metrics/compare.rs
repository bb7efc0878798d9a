//! Significance of metric differences across seeded repeats. Repeats share
//! seeds across configurations, so the paired test is the default; a
//! Wilcoxon signed-rank alternative is exposed for skeptics of normality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{normal_cdf, t_two_sided_p};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOutcome {
    pub mean_diff: f64,
    pub p_value: f64,
    pub t_statistic: f64,
    /// Set when the differences had zero variance around a nonzero mean,
    /// which makes the t statistic degenerate (p reported as 0).
    pub degenerate: bool,
}

/// Two-sided test of `metric_a - metric_b` over repeats.
///
/// `paired = true` runs the paired t-test on per-repeat differences;
/// `paired = false` runs the pooled-variance two-sample t-test.
pub fn compare_runs(metric_a: &[f64], metric_b: &[f64], paired: bool) -> Result<CompareOutcome> {
    if paired {
        if metric_a.len() != metric_b.len() {
            return Err(Error::invalid("paired comparison needs equal repeat counts"));
        }
        if metric_a.len() < 2 {
            return Err(Error::invalid("need at least 2 repeats"));
        }
        let n = metric_a.len() as f64;
        let diffs: Vec<f64> = metric_a.iter().zip(metric_b).map(|(a, b)| a - b).collect();
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        if var <= 0.0 {
            return Ok(if mean.abs() <= 0.0 {
                CompareOutcome { mean_diff: 0.0, p_value: 1.0, t_statistic: 0.0, degenerate: false }
            } else {
                CompareOutcome { mean_diff: mean, p_value: 0.0, t_statistic: f64::INFINITY, degenerate: true }
            });
        }
        let t = mean / (var / n).sqrt();
        Ok(CompareOutcome {
            mean_diff: mean,
            p_value: t_two_sided_p(t, n - 1.0)?,
            t_statistic: t,
            degenerate: false,
        })
    } else {
        let (na, nb) = (metric_a.len() as f64, metric_b.len() as f64);
        if metric_a.len() < 2 || metric_b.len() < 2 {
            return Err(Error::invalid("need at least 2 repeats per side"));
        }
        let ma = metric_a.iter().sum::<f64>() / na;
        let mb = metric_b.iter().sum::<f64>() / nb;
        let ss = metric_a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>()
            + metric_b.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>();
        let df = na + nb - 2.0;
        let sp2 = ss / df;
        let mean = ma - mb;
        if sp2 <= 0.0 {
            return Ok(if mean.abs() <= 0.0 {
                CompareOutcome { mean_diff: 0.0, p_value: 1.0, t_statistic: 0.0, degenerate: false }
            } else {
                CompareOutcome { mean_diff: mean, p_value: 0.0, t_statistic: f64::INFINITY, degenerate: true }
            });
        }
        let t = mean / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
        Ok(CompareOutcome {
            mean_diff: mean,
            p_value: t_two_sided_p(t, df)?,
            t_statistic: t,
            degenerate: false,
        })
    }
}

/// Two-sided Wilcoxon signed-rank test on paired differences. Exact null
/// distribution up to n = 20 pairs, normal approximation beyond.
pub fn wilcoxon_signed_rank(metric_a: &[f64], metric_b: &[f64]) -> Result<f64> {
    if metric_a.len() != metric_b.len() {
        return Err(Error::invalid("signed-rank test needs equal repeat counts"));
    }
    let mut diffs: Vec<f64> = metric_a
        .iter()
        .zip(metric_b)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(1.0);
    }
    diffs.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
    // average ranks over ties on |d|
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for r in ranks.iter_mut().take(j + 1).skip(i) {
            *r = avg;
        }
        i = j + 1;
    }
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();

    if n <= 20 {
        // enumerate all sign assignments
        let mut at_least_as_extreme = 0u64;
        let total = 1u64 << n;
        let w_mean = ranks.iter().sum::<f64>() / 2.0;
        let observed_dev = (w_plus - w_mean).abs();
        for mask in 0..total {
            let w: f64 = ranks
                .iter()
                .enumerate()
                .filter(|(idx, _)| mask >> idx & 1 == 1)
                .map(|(_, r)| r)
                .sum();
            if (w - w_mean).abs() >= observed_dev - 1e-12 {
                at_least_as_extreme += 1;
            }
        }
        Ok(at_least_as_extreme as f64 / total as f64)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0).sqrt();
        let z = (w_plus - mean) / sd;
        Ok((2.0 * (1.0 - normal_cdf(z.abs()))).clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_vectors_have_p_one() {
        let x = vec![1.0, 2.0, 3.0, 2.5];
        let out = compare_runs(&x, &x, true).unwrap();
        assert_eq!(out.mean_diff, 0.0);
        assert_eq!(out.p_value, 1.0);
    }

    #[test]
    fn constant_offset_with_tiny_noise_is_significant() {
        // t-distribution oracle: +1 offset, noise << 1, 10 repeats
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let a: Vec<f64> = (0..10).map(|_| rng.gen_range(-0.01..0.01)).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 1.0 + rng.gen_range(-0.01..0.01)).collect();
        let out = compare_runs(&b, &a, true).unwrap();
        assert!(out.p_value < 0.001, "p = {}", out.p_value);
        assert!(out.mean_diff > 0.9);
    }

    #[test]
    fn zero_variance_nonzero_mean_flags_degenerate() {
        let a = vec![1.0, 1.0, 1.0];
        let b = vec![2.0, 2.0, 2.0];
        let out = compare_runs(&a, &b, true).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.p_value, 0.0);
        assert_eq!(out.mean_diff, -1.0);
    }

    #[test]
    fn paired_beats_unpaired_on_shared_seed_noise() {
        // repeats share seed-driven noise; pairing removes it
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let base: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..5.0)).collect();
        let a: Vec<f64> = base.iter().map(|x| x + 0.1).collect();
        let paired = compare_runs(&a, &base, true).unwrap();
        let unpaired = compare_runs(&a, &base, false).unwrap();
        assert!(paired.p_value < unpaired.p_value);
    }

    #[test]
    fn wilcoxon_agrees_directionally_with_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let a: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.5 + rng.gen_range(-0.05..0.05)).collect();
        let p_w = wilcoxon_signed_rank(&a, &b).unwrap();
        // all 10 differences share a sign: the exact two-sided p is 2/1024
        assert!(p_w < 0.01, "wilcoxon p = {p_w}");
        assert_eq!(wilcoxon_signed_rank(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn mismatched_paired_lengths_error() {
        assert!(compare_runs(&[1.0, 2.0], &[1.0], true).is_err());
    }
}
