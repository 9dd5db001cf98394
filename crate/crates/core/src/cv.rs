//! K-fold cross-validated winsorization threshold, used as a baseline.
//!
//! Criterion: for each level `M` and fold, winsorize the training part at
//! `M`, take its mean, and score the squared distance to the plain mean of
//! the held-out fold. The level with the smallest fold-averaged score wins;
//! ties go to the larger level. The final estimate is the full-sample
//! winsorized mean at that level.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::balancing::ThresholdLadder;
use crate::error::{invalid, Result};
use crate::rng;
use crate::weights::{clamp_unchecked, compensated_sum, CompensatedSum, Sample};

/// Short description written into experiment metadata.
pub const CV_CRITERION: &str =
    "k-fold CV: squared error of the training-fold winsorized mean against the held-out fold's plain mean; ties to larger level";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub folds: usize,
    pub shuffle_seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            shuffle_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSelection {
    pub level: f64,
    pub estimate: f64,
    /// Fold-averaged score per ladder level, ascending by level.
    pub scores: Vec<f64>,
}

/// Splits `0..n` into `folds` shuffled groups whose sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    (0..folds)
        .map(|f| idx[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect()
}

pub fn cv_select_threshold(sample: &Sample, ladder: &ThresholdLadder, cfg: &CvConfig) -> Result<CvSelection> {
    let n = sample.len();
    if cfg.folds < 2 {
        return invalid(format!("cross-validation needs at least 2 folds, got {}", cfg.folds));
    }
    if cfg.folds > n {
        return invalid(format!("{} folds requested for a sample of {n}", cfg.folds));
    }
    let values = sample.values();
    let folds = fold_assignment(n, cfg.folds, cfg.shuffle_seed);
    let held_out_means: Vec<f64> = folds
        .iter()
        .map(|f| compensated_sum(f.iter().map(|&i| values[i])) / f.len() as f64)
        .collect();

    let scores: Vec<f64> = ladder
        .levels()
        .iter()
        .map(|&level| {
            let total: CompensatedSum = values.iter().map(|&y| clamp_unchecked(y, level)).collect();
            let total = total.total();
            let per_fold = folds.iter().zip(&held_out_means).map(|(fold, &target)| {
                let held = compensated_sum(fold.iter().map(|&i| clamp_unchecked(values[i], level)));
                let train_mean = (total - held) / (n - fold.len()) as f64;
                (train_mean - target).powi(2)
            });
            compensated_sum(per_fold) / cfg.folds as f64
        })
        .collect();

    // Walk from the top level down, replacing only on a strict improvement.
    let mut best = ladder.len() - 1;
    for i in (0..ladder.len() - 1).rev() {
        if scores[i] < scores[best] {
            best = i;
        }
    }
    let level = ladder.levels()[best];
    let estimate = compensated_sum(values.iter().map(|&y| clamp_unchecked(y, level))) / n as f64;
    Ok(CvSelection { level, estimate, scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_indices() {
        for (n, k) in [(10, 3), (7, 7), (100, 10), (11, 2)] {
            let folds = fold_assignment(n, k, 42);
            assert_eq!(folds.len(), k);
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(hi - lo <= 1);
            let mut all: Vec<usize> = folds.concat();
            all.sort();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn no_clipping_ties_to_largest_level() {
        let s = Sample::new(vec![0.1, 0.5, -0.3, 0.9, 0.2, 0.0, -0.8, 0.4, 0.7, 0.3]).unwrap();
        let ladder = ThresholdLadder::new(vec![1.0, 2.0, 5.0]).unwrap();
        let r = cv_select_threshold(&s, &ladder, &CvConfig { folds: 5, shuffle_seed: 3 }).unwrap();
        assert_eq!(r.level, 5.0);
        assert!((r.estimate - crate::is_estimate(&s)).abs() < 1e-15);
    }

    #[test]
    fn singleton_ladder() {
        let s = Sample::new(vec![3.0, -1.0, 10.0, 0.5]).unwrap();
        let ladder = ThresholdLadder::new(vec![2.0]).unwrap();
        let r = cv_select_threshold(&s, &ladder, &CvConfig { folds: 2, shuffle_seed: 0 }).unwrap();
        assert_eq!(r.level, 2.0);
        assert_eq!(r.estimate, (2.0 - 1.0 + 2.0 + 0.5) / 4.0);
    }

    #[test]
    fn rejects_bad_fold_counts() {
        let s = Sample::new(vec![1.0, 2.0, 3.0]).unwrap();
        let ladder = ThresholdLadder::new(vec![1.0]).unwrap();
        assert!(cv_select_threshold(&s, &ladder, &CvConfig { folds: 4, shuffle_seed: 0 }).is_err());
        assert!(cv_select_threshold(&s, &ladder, &CvConfig { folds: 1, shuffle_seed: 0 }).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let v: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64).powf(1.7)).collect();
        let s = Sample::new(v).unwrap();
        let ladder = ThresholdLadder::new(vec![10.0, 100.0, 1000.0]).unwrap();
        let cfg = CvConfig { folds: 10, shuffle_seed: 9 };
        assert_eq!(cv_select_threshold(&s, &ladder, &cfg).unwrap(), cv_select_threshold(&s, &ladder, &cfg).unwrap());
    }
}
