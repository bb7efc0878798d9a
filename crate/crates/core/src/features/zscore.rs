//! Z-score normalization with train-split statistics (population standard
//! deviation). Constant features are flagged and map to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreSummary {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

/// Per-feature mean/std fitted on one set of rows and applied to any other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreModel {
    summary: ZScoreSummary,
}

impl ZScoreModel {
    /// Fits on the training rows (each row one instance, fixed column order).
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("z-score fit needs a non-empty train split"))?;
        let dims = first.len();
        if rows.iter().any(|r| r.len() != dims) {
            return Err(Error::invalid("inconsistent feature row lengths"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dims];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dims];
        for row in rows {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(row) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let std: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        let constant = std.iter().map(|&s| s == 0.0).collect();
        Ok(ZScoreModel {
            summary: ZScoreSummary { mean, std, constant },
        })
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let s = &self.summary;
        if row.len() != s.mean.len() {
            return Err(Error::invalid("feature row length mismatch"));
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(d, &x)| {
                if s.constant[d] {
                    0.0
                } else {
                    (x - s.mean[d]) / s.std[d]
                }
            })
            .collect())
    }

    pub fn summary(&self) -> &ZScoreSummary {
        &self.summary
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_three_values() {
        // population std of {1,2,3} is sqrt(2/3); z = ±1.2247, 0
        let model = ZScoreModel::fit(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let z: Vec<f64> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&x| model.apply_row(&[x]).unwrap()[0])
            .collect();
        assert!((z[0] + 1.2247).abs() < 1e-4);
        assert!(z[1].abs() < 1e-12);
        assert!((z[2] - 1.2247).abs() < 1e-4);
    }

    #[test]
    fn constant_feature_flags_and_zeroes() {
        let model = ZScoreModel::fit(&[vec![4.0, 1.0], vec![4.0, 2.0]]).unwrap();
        assert!(model.summary().constant[0]);
        assert!(!model.summary().constant[1]);
        assert_eq!(model.apply_row(&[4.0, 1.5]).unwrap()[0], 0.0);
    }

    #[test]
    fn train_stats_preserve_test_ordering() {
        let model = ZScoreModel::fit(&[vec![0.0], vec![10.0], vec![5.0]]).unwrap();
        let test = [-3.0, 2.0, 7.0, 30.0];
        let z: Vec<f64> = test
            .iter()
            .map(|&x| model.apply_row(&[x]).unwrap()[0])
            .collect();
        for w in z.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn train_split_itself_standardizes() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![i as f64 * 0.37 + 2.0, (i as f64).sin()])
            .collect();
        let model = ZScoreModel::fit(&rows).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|r| model.apply_row(r).unwrap()).collect();
        for d in 0..2 {
            let n = z.len() as f64;
            let mean: f64 = z.iter().map(|r| r[d]).sum::<f64>() / n;
            let var: f64 = z.iter().map(|r| (r[d] - mean) * (r[d] - mean)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9, "dim {d} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-9, "dim {d} std {}", var.sqrt());
        }
    }

    #[test]
    fn empty_fit_is_an_error() {
        assert!(ZScoreModel::fit(&[]).is_err());
    }
}
