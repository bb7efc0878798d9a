//! Performance regression: per-instance metric values modeled as a linear
//! combination of smile duration, intensity level (one-hot, B as the
//! reference level), and model configuration (baseline = speaker only).

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::corpus::Intensity;
use crate::error::{Error, Result};
use crate::stats::{fit_ols, t_two_sided_p};

#[derive(Debug, Clone)]
pub struct RegressionRow {
    pub metric: f64,
    pub duration_s: f64,
    pub intensity: Intensity,
    /// Configuration label; rows with the baseline label get no dummy.
    pub config: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerformanceRegression {
    /// Term names: duration, intensity dummies, config dummies.
    pub terms: Vec<String>,
    pub slopes: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    pub intercept: f64,
    pub n: usize,
}

const INTENSITY_REFERENCE: Intensity = Intensity::B;

/// Ordinary least squares of the metric on duration + intensity dummies +
/// configuration dummies, with Wald two-sided p-values.
pub fn performance_regression(
    rows: &[RegressionRow],
    baseline_config: &str,
) -> Result<PerformanceRegression> {
    if rows.len() < 10 {
        return Err(Error::invalid(format!(
            "need at least 10 instances, got {}",
            rows.len()
        )));
    }
    if !rows.iter().any(|r| r.config == baseline_config) {
        return Err(Error::invalid(format!(
            "baseline config `{baseline_config}` absent from rows"
        )));
    }
    let mut configs: Vec<String> = rows.iter().map(|r| r.config.clone()).collect();
    configs.sort();
    configs.dedup();
    let config_dummies: Vec<String> = configs
        .into_iter()
        .filter(|c| c != baseline_config)
        .collect();

    // dummies only for levels that occur, or absent levels would give
    // all-zero columns
    let intensity_dummies: Vec<Intensity> = Intensity::ALL
        .iter()
        .copied()
        .filter(|&i| i != INTENSITY_REFERENCE && rows.iter().any(|r| r.intensity == i))
        .collect();

    let mut terms = vec!["duration".to_string()];
    terms.extend(intensity_dummies.iter().map(|i| format!("intensity_{i}")));
    terms.extend(config_dummies.iter().map(|c| format!("config_{c}")));

    let p = 1 + terms.len();
    let n = rows.len();
    let mut x = Array2::zeros((n, p));
    let mut y = Array1::zeros(n);
    for (row_idx, row) in rows.iter().enumerate() {
        x[[row_idx, 0]] = 1.0;
        x[[row_idx, 1]] = row.duration_s;
        for (j, &level) in intensity_dummies.iter().enumerate() {
            if row.intensity == level {
                x[[row_idx, 2 + j]] = 1.0;
            }
        }
        for (j, c) in config_dummies.iter().enumerate() {
            if &row.config == c {
                x[[row_idx, 2 + intensity_dummies.len() + j]] = 1.0;
            }
        }
        y[row_idx] = row.metric;
    }

    let fit = fit_ols(&x, &y)?;
    let sigma2 = fit.residual_ss / fit.df_resid as f64;
    let mut slopes = Vec::with_capacity(terms.len());
    let mut standard_errors = Vec::with_capacity(terms.len());
    let mut p_values = Vec::with_capacity(terms.len());
    for j in 1..p {
        let beta = fit.coefficients[j];
        let se = (sigma2 * fit.unscaled_covariance[[j, j]]).max(0.0).sqrt();
        let pv = if se <= 1e-300 {
            if beta.abs() <= 1e-300 { 1.0 } else { 0.0 }
        } else {
            t_two_sided_p(beta / se, fit.df_resid as f64)?
        };
        slopes.push(beta);
        standard_errors.push(se);
        p_values.push(pv);
    }
    Ok(PerformanceRegression {
        terms,
        slopes,
        standard_errors,
        p_values,
        intercept: fit.coefficients[0],
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rows_with(metric: impl Fn(f64, Intensity, &str) -> f64) -> Vec<RegressionRow> {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let configs = ["speaker_only", "speaker_listener", "speaker_listener_cond", "speaker_cond"];
        let mut rows = Vec::new();
        for i in 0..120 {
            let duration = rng.gen_range(0.8..3.0);
            let intensity = Intensity::ALL[i % 5];
            let config = configs[i % 4];
            rows.push(RegressionRow {
                metric: metric(duration, intensity, config),
                duration_s: duration,
                intensity,
                config: config.to_string(),
            });
        }
        rows
    }

    #[test]
    fn planted_duration_slope_is_recovered() {
        let rows = rows_with(|d, _, _| 2.0 * d);
        let fit = performance_regression(&rows, "speaker_only").unwrap();
        assert_eq!(fit.terms[0], "duration");
        assert!((fit.slopes[0] - 2.0).abs() < 1e-9, "slope {}", fit.slopes[0]);
        assert!(fit.p_values[0] < 1e-6);
    }

    #[test]
    fn constant_metric_has_null_slopes() {
        let rows = rows_with(|_, _, _| 3.5);
        let fit = performance_regression(&rows, "speaker_only").unwrap();
        for (slope, p) in fit.slopes.iter().zip(&fit.p_values) {
            assert!(slope.abs() < 1e-9);
            assert!(*p > 0.99);
        }
    }

    #[test]
    fn term_set_is_duration_intensity_config() {
        let rows = rows_with(|d, i, c| d + i.score() + c.len() as f64);
        let fit = performance_regression(&rows, "speaker_only").unwrap();
        assert_eq!(
            fit.terms,
            vec![
                "duration",
                "intensity_A",
                "intensity_C",
                "intensity_D",
                "intensity_E",
                "config_speaker_cond",
                "config_speaker_listener",
                "config_speaker_listener_cond",
            ]
        );
        assert_eq!(fit.slopes.len(), 8);
    }

    #[test]
    fn intensity_effect_lands_on_its_dummy() {
        let rows = rows_with(|_, i, _| if i == Intensity::E { 5.0 } else { 1.0 });
        let fit = performance_regression(&rows, "speaker_only").unwrap();
        let e_idx = fit.terms.iter().position(|t| t == "intensity_E").unwrap();
        assert!((fit.slopes[e_idx] - 4.0).abs() < 1e-9);
        assert!(fit.p_values[e_idx] < 1e-6);
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let rows = rows_with(|d, _, _| d);
        assert!(performance_regression(&rows[..5], "speaker_only").is_err());
    }

    #[test]
    fn missing_baseline_is_an_error() {
        let rows = rows_with(|d, _, _| d);
        assert!(performance_regression(&rows, "not_a_config").is_err());
    }
}
