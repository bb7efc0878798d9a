//! Tukey HSD post hoc: all pairwise group comparisons against the
//! studentized-range distribution with pooled within-group variance.

use std::collections::BTreeMap;

use super::dist::{studentized_range_critical, studentized_range_upper_tail};
use crate::error::{Error, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TukeyPair {
    pub group_a: String,
    pub group_b: String,
    pub mean_diff: f64,
    pub adjusted_p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TukeyResult {
    pub pairs: Vec<TukeyPair>,
    pub pooled_variance: f64,
    pub df: usize,
    pub alpha: f64,
}

/// Tukey-Kramer comparisons over labeled samples.
pub fn tukey_hsd(groups: &BTreeMap<String, Vec<f64>>, alpha: f64) -> Result<TukeyResult> {
    if groups.len() < 2 {
        return Err(Error::invalid("Tukey HSD needs at least 2 groups"));
    }
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::invalid("alpha must be in (0, 1)"));
    }
    for (label, xs) in groups {
        if xs.len() < 2 {
            return Err(Error::invalid(format!(
                "group `{label}` has fewer than 2 samples"
            )));
        }
    }
    let k = groups.len();
    let n_total: usize = groups.values().map(|v| v.len()).sum();
    let df = n_total - k;

    let means: BTreeMap<&String, f64> = groups
        .iter()
        .map(|(l, xs)| (l, xs.iter().sum::<f64>() / xs.len() as f64))
        .collect();
    let ss_within: f64 = groups
        .iter()
        .map(|(l, xs)| xs.iter().map(|x| (x - means[l]).powi(2)).sum::<f64>())
        .sum();
    let pooled_variance = ss_within / df as f64;

    let q_crit = studentized_range_critical(k, df as f64, alpha)?;

    let labels: Vec<&String> = groups.keys().collect();
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let (a, b) = (labels[i], labels[j]);
            let (na, nb) = (groups[a].len() as f64, groups[b].len() as f64);
            let mean_diff = means[a] - means[b];
            // Tukey-Kramer standard error
            let se = (pooled_variance / 2.0 * (1.0 / na + 1.0 / nb)).sqrt();
            let adjusted_p = if se <= 1e-300 {
                if mean_diff.abs() <= 1e-300 { 1.0 } else { 0.0 }
            } else {
                studentized_range_upper_tail(mean_diff.abs() / se, k, df as f64)?
            };
            pairs.push(TukeyPair {
                group_a: a.clone(),
                group_b: b.clone(),
                mean_diff,
                adjusted_p,
                ci_low: mean_diff - q_crit * se,
                ci_high: mean_diff + q_crit * se,
            });
        }
    }
    Ok(TukeyResult {
        pairs,
        pooled_variance,
        df,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::dist::t_two_sided_p;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn groups_of(data: &[(&str, Vec<f64>)]) -> BTreeMap<String, Vec<f64>> {
        data.iter().map(|(l, v)| (l.to_string(), v.clone())).collect()
    }

    #[test]
    fn identical_groups_have_null_difference() {
        let g = groups_of(&[
            ("a", vec![1.0, 2.0, 3.0, 4.0]),
            ("b", vec![1.0, 2.0, 3.0, 4.0]),
        ]);
        let result = tukey_hsd(&g, 0.05).unwrap();
        assert_eq!(result.pairs.len(), 1);
        assert!(result.pairs[0].mean_diff.abs() < 1e-12);
        assert!(result.pairs[0].adjusted_p > 0.99);
        assert!(result.pairs[0].ci_low <= 0.0 && result.pairs[0].ci_high >= 0.0);
    }

    #[test]
    fn two_groups_reduce_to_pooled_t_test() {
        // q = √2 |t| identity: with k = 2 the adjusted p equals the
        // two-sided pooled t-test p.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let a: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..15).map(|_| rng.gen_range(-0.5..1.5)).collect();
            let g = groups_of(&[("a", a.clone()), ("b", b.clone())]);
            let result = tukey_hsd(&g, 0.05).unwrap();

            let (na, nb) = (a.len() as f64, b.len() as f64);
            let (ma, mb) = (
                a.iter().sum::<f64>() / na,
                b.iter().sum::<f64>() / nb,
            );
            let ss = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>()
                + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
            let df = na + nb - 2.0;
            let sp2 = ss / df;
            let t = (ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
            let p_t = t_two_sided_p(t, df).unwrap();
            assert!(
                (result.pairs[0].adjusted_p - p_t).abs() < 1e-3,
                "tukey={} t={}",
                result.pairs[0].adjusted_p,
                p_t
            );
        }
    }

    #[test]
    fn shifted_group_is_detected() {
        // simulation oracle: one group shifted by 5 sigma, n = 30 each
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = |rng: &mut ChaCha8Rng| {
            // sum of uniforms approximates a normal with sigma ~ 0.5
            (0..3).map(|_| rng.gen_range(-0.5..0.5)).sum::<f64>()
        };
        let a: Vec<f64> = (0..30).map(|_| noise(&mut rng)).collect();
        let b: Vec<f64> = (0..30).map(|_| noise(&mut rng)).collect();
        let c: Vec<f64> = (0..30).map(|_| noise(&mut rng) + 2.5).collect();
        let g = groups_of(&[("a", a), ("b", b), ("c", c)]);
        let result = tukey_hsd(&g, 0.05).unwrap();
        for pair in &result.pairs {
            let involves_c = pair.group_a == "c" || pair.group_b == "c";
            if involves_c {
                assert!(pair.adjusted_p < 0.01, "{pair:?}");
            } else {
                assert!(pair.adjusted_p > 0.05, "{pair:?}");
            }
        }
    }

    #[test]
    fn ci_brackets_mean_diff() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = groups_of(&[
            ("a", (0..10).map(|_| rng.gen_range(0.0..1.0)).collect()),
            ("b", (0..10).map(|_| rng.gen_range(0.5..1.5)).collect()),
            ("c", (0..10).map(|_| rng.gen_range(1.0..2.0)).collect()),
        ]);
        let result = tukey_hsd(&g, 0.05).unwrap();
        assert_eq!(result.pairs.len(), 3);
        for p in &result.pairs {
            assert!(p.ci_low <= p.mean_diff && p.mean_diff <= p.ci_high);
            assert!((0.0..=1.0).contains(&p.adjusted_p));
        }
    }

    #[test]
    fn small_group_is_rejected() {
        let g = groups_of(&[("a", vec![1.0]), ("b", vec![1.0, 2.0])]);
        assert!(tukey_hsd(&g, 0.05).is_err());
    }

    #[test]
    fn p_is_monotone_in_mean_difference() {
        // fixed variance/sizes: larger |mean_diff| cannot raise adjusted p
        let base: Vec<f64> = vec![0.1, -0.2, 0.3, 0.0, -0.1, 0.2];
        let mut last_p = 1.0;
        for shift in [0.0, 0.2, 0.5, 1.0, 2.0] {
            let shifted: Vec<f64> = base.iter().map(|x| x + shift).collect();
            let g = groups_of(&[("a", base.clone()), ("b", shifted)]);
            let p = tukey_hsd(&g, 0.05).unwrap().pairs[0].adjusted_p;
            assert!(p <= last_p + 1e-9, "shift {shift}: {p} > {last_p}");
            last_p = p;
        }
    }
}
