//! Dyad-level dataset splitting. Instances never cross splits because the
//! partition is over dyads, not instances.

use rand::seq::SliceRandom;

use super::DatasetSplit;
use crate::error::{Error, Result};
use crate::seeds::stream_rng;

/// Splits dyads into train/val/test by the given proportions.
///
/// Ratios are normalized to sum to 1; counts use floors with the remainder
/// assigned to train. Deterministic for a given seed.
pub fn split_by_dyad(dyads: &[String], ratios: (f64, f64, f64), seed: u64) -> Result<DatasetSplit> {
    if dyads.len() < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 dyads to split, got {}",
            dyads.len()
        )));
    }
    let (a, b, c) = ratios;
    if a <= 0.0 || b <= 0.0 || c <= 0.0 {
        return Err(Error::invalid("split ratios must be positive"));
    }
    {
        let mut seen = dyads.to_vec();
        seen.sort();
        seen.dedup();
        if seen.len() != dyads.len() {
            return Err(Error::invalid("duplicate dyad ids in split input"));
        }
    }
    let total = a + b + c;
    let n = dyads.len();
    let mut n_val = ((b / total) * n as f64).floor() as usize;
    let mut n_test = ((c / total) * n as f64).floor() as usize;
    // every split gets at least one dyad
    n_val = n_val.max(1);
    n_test = n_test.max(1);
    if n_val + n_test >= n {
        return Err(Error::invalid("split ratios leave no training dyads"));
    }
    let n_train = n - n_val - n_test;

    let mut shuffled = dyads.to_vec();
    // shuffle a sorted copy so the outcome is independent of input order
    shuffled.sort();
    let mut rng = stream_rng(seed, "split");
    shuffled.shuffle(&mut rng);

    let mut train: Vec<String> = shuffled[..n_train].to_vec();
    let mut val: Vec<String> = shuffled[n_train..n_train + n_val].to_vec();
    let mut test: Vec<String> = shuffled[n_train + n_val..].to_vec();
    train.sort();
    val.sort();
    test.sort();
    Ok(DatasetSplit {
        train_dyads: train,
        val_dyads: val,
        test_dyads: test,
        seed,
    })
}
