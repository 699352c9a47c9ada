use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{MeanMetrics, Metrics};
use super::tree::DecisionTree;
use super::LearnError;
use crate::corpus::{balance_examples, class_counts, Label, LabeledDataset, LabeledExample};
use crate::instrument::NUM_SIGNALS;

pub const MIN_FOLD_SIZE: usize = 10;
pub const DEFAULT_FOLDS: usize = 10;

/// 10 folds from 100 examples up, otherwise the most folds that keep at
/// least ten examples in each.
pub fn fold_count(n: usize) -> Result<usize, LearnError> {
    if n < 2 * MIN_FOLD_SIZE {
        return Err(LearnError::TooFewExamples(n));
    }
    Ok(if n >= 100 { DEFAULT_FOLDS } else { n / MIN_FOLD_SIZE })
}

/// Seeded permutation of `0..n` cut into `k` contiguous test folds.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    (0..k)
        .map(|i| perm[i * n / k..(i + 1) * n / k].to_vec())
        .collect()
}

fn fold_seed(seed: u64, fold: usize, part: u64) -> u64 {
    seed.wrapping_add(1 + 2 * fold as u64 + part)
}

/// Train and test examples of one fold, each balanced on its own.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub train_size: usize,
    pub test_size: usize,
    /// False when the portion held a single class and could not be
    /// balanced.
    pub train_balanced: bool,
    pub test_balanced: bool,
}

fn balanced_or_raw(examples: Vec<LabeledExample>, seed: u64) -> (Vec<LabeledExample>, bool) {
    match balance_examples(&examples, seed) {
        Ok(b) => (b, true),
        Err(_) => (examples, false),
    }
}

pub fn fold_plans(dataset: &LabeledDataset, seed: u64) -> Result<Vec<FoldPlan>, LearnError> {
    let n = dataset.len();
    let k = fold_count(n)?;
    let folds = fold_indices(n, k, seed);
    Ok(folds
        .iter()
        .enumerate()
        .map(|(i, test_idx)| {
            let mut in_test = vec![false; n];
            test_idx.iter().for_each(|&j| in_test[j] = true);
            let train: Vec<LabeledExample> = folds
                .iter()
                .flatten()
                .filter(|&&j| !in_test[j])
                .map(|&j| dataset.examples[j].clone())
                .collect();
            let test: Vec<LabeledExample> = test_idx
                .iter()
                .map(|&j| dataset.examples[j].clone())
                .collect();
            let (train_size, test_size) = (train.len(), test.len());
            let (train, train_balanced) = balanced_or_raw(train, fold_seed(seed, i, 0));
            let (test, test_balanced) = balanced_or_raw(test, fold_seed(seed, i, 1));
            FoldPlan {
                train,
                test,
                train_size,
                test_size,
                train_balanced,
                test_balanced,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    /// `(pass, fail)` after balancing.
    pub train_counts: (usize, usize),
    pub test_counts: (usize, usize),
    pub test_balanced: bool,
    pub degenerate: bool,
    pub metrics: Metrics,
    pub importances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub feature_mask: Option<Vec<usize>>,
    pub folds: Vec<FoldReport>,
    pub mean: MeanMetrics,
    pub mean_importances: Vec<f64>,
}

fn split_xy(examples: &[LabeledExample]) -> (Vec<Vec<f64>>, Vec<Label>) {
    examples
        .iter()
        .map(|e| (e.features.to_features(), e.label))
        .unzip()
}

/// Seeded K-fold cross-validation with per-fold balancing.
pub fn kfold(
    dataset: &LabeledDataset,
    seed: u64,
    feature_mask: Option<&[usize]>,
) -> Result<CvReport, LearnError> {
    let plans = fold_plans(dataset, seed)?;
    let folds = plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| -> Result<FoldReport, LearnError> {
            let (x, y) = split_xy(&plan.train);
            let tree = DecisionTree::fit_matrix(&x, &y, feature_mask)?;
            let (tx, ty) = split_xy(&plan.test);
            let predicted = tree.predict_batch(&tx)?;
            Ok(FoldReport {
                fold: i,
                train_size: plan.train_size,
                test_size: plan.test_size,
                train_counts: class_counts(&plan.train),
                test_counts: class_counts(&plan.test),
                test_balanced: plan.test_balanced,
                degenerate: tree.degenerate,
                metrics: Metrics::from_predictions(&ty, &predicted),
                importances: tree.importances,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let metrics: Vec<Metrics> = folds.iter().map(|f| f.metrics).collect();
    let k = folds.len();
    let mean_importances = (0..NUM_SIGNALS)
        .map(|s| folds.iter().map(|f| f.importances[s]).sum::<f64>() / k as f64)
        .collect();
    let mask = feature_mask.map(|m| {
        let mut v = m.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    });
    Ok(CvReport {
        k,
        n: dataset.len(),
        seed,
        feature_mask: mask,
        folds,
        mean: MeanMetrics::of(&metrics),
        mean_importances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_counts() {
        assert!(fold_count(19).is_err());
        assert_eq!(fold_count(20).unwrap(), 2);
        assert_eq!(fold_count(25).unwrap(), 2);
        assert_eq!(fold_count(50).unwrap(), 5);
        assert_eq!(fold_count(99).unwrap(), 9);
        assert_eq!(fold_count(100).unwrap(), 10);
        assert_eq!(fold_count(1778).unwrap(), 10);
    }

    #[test]
    fn folds_partition() {
        let folds = fold_indices(57, 5, 9);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..57).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| f.len() >= 11));
    }
}
