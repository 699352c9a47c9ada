use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cv::{kfold, CvReport, MIN_FOLD_SIZE};
use super::metrics::{MeanMetrics, Metrics};
use super::tree::DecisionTree;
use super::LearnError;
use crate::corpus::{balance, Corpus, Label, LabeledDataset, SummaryPoint};

/// Balances and fits on `train`, then scores the unbalanced `test` set.
pub fn cross_version_eval(
    train: &LabeledDataset,
    test: &LabeledDataset,
    seed: u64,
) -> Result<Metrics, LearnError> {
    if train.version_tag == test.version_tag {
        log::warn!(
            "cross-version evaluation with identical version tags ({})",
            train.version_tag
        );
    }
    let tree = DecisionTree::fit(&balance(train, seed)?, None)?;
    let (x, y): (Vec<Vec<f64>>, Vec<Label>) = test
        .examples
        .iter()
        .map(|e| (e.features.to_features(), e.label))
        .unzip();
    Ok(Metrics::from_predictions(&y, &tree.predict_batch(&x)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyRow {
    pub point: SummaryPoint,
    /// Instructions executed at the boundary; `None` for the final row.
    pub instructions: Option<u64>,
    pub n: usize,
    pub report: Option<CvReport>,
    /// Why `report` is absent.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyReport {
    pub interval_size: u64,
    pub seed: u64,
    /// Interval rows in boundary order, then the final row.
    pub rows: Vec<EarlyRow>,
}

fn early_row(
    corpus: &Corpus,
    point: SummaryPoint,
    instructions: Option<u64>,
    seed: u64,
) -> EarlyRow {
    let examples = corpus.examples_at(point);
    let n = examples.len();
    let (report, skipped) = match LabeledDataset::new(examples, corpus.meta.version_tag.clone()) {
        Err(_) => (None, Some("no executions".to_string())),
        Ok(ds) => {
            let (pass, fail) = ds.class_counts();
            if n < 2 * MIN_FOLD_SIZE {
                (None, Some(format!("only {n} executions")))
            } else if pass == 0 || fail == 0 {
                (None, Some("single class".to_string()))
            } else {
                match kfold(&ds, seed, None) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            }
        }
    };
    EarlyRow {
        point,
        instructions,
        n,
        report,
        skipped,
    }
}

/// Cross-validates on the summaries at every interval boundary, stopping
/// at the first boundary reached by fewer than 20 executions, then on the
/// final summaries.
pub fn early_detection_sweep(corpus: &Corpus, seed: u64) -> Result<EarlyReport, LearnError> {
    if corpus.streams.is_empty() {
        return Err(LearnError::NoStreams);
    }
    let interval = corpus.meta.config.interval;
    let mut rows = Vec::new();
    for i in 1..=corpus.max_interval() {
        let row = early_row(
            corpus,
            SummaryPoint::Interval(i),
            Some(interval.saturating_mul(i as u64)),
            seed,
        );
        let stop = row.n < 2 * MIN_FOLD_SIZE;
        if stop {
            log::info!("early detection: stopping at interval {i} ({} executions)", row.n);
        }
        rows.push(row);
        if stop {
            break;
        }
    }
    rows.push(early_row(corpus, SummaryPoint::Final, None, seed));
    Ok(EarlyReport {
        interval_size: interval,
        seed,
        rows,
    })
}

/// Seeded class-stratified subsample of `size` examples in their original
/// order. At least one example of each class is kept when possible.
pub fn stratified_subsample(
    dataset: &LabeledDataset,
    size: usize,
    seed: u64,
) -> Result<LabeledDataset, LearnError> {
    let n = dataset.len();
    if size > n {
        return Err(LearnError::SizeTooLarge { size, n });
    }
    let mut pass: Vec<usize> = Vec::new();
    let mut fail: Vec<usize> = Vec::new();
    for (i, e) in dataset.examples.iter().enumerate() {
        match e.label {
            Label::Pass => pass.push(i),
            Label::Fail => fail.push(i),
        }
    }
    let mut want_fail = ((size * fail.len()) as f64 / n as f64).round() as usize;
    if size >= 2 && !fail.is_empty() && !pass.is_empty() {
        want_fail = want_fail.clamp(1, size - 1);
    }
    want_fail = want_fail.min(fail.len()).max(size.saturating_sub(pass.len()));
    let want_pass = size - want_fail;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pass.shuffle(&mut rng);
    fail.shuffle(&mut rng);
    let mut chosen: Vec<usize> = pass[..want_pass]
        .iter()
        .chain(&fail[..want_fail])
        .copied()
        .collect();
    chosen.sort_unstable();
    Ok(dataset.subset(&chosen))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub size: usize,
    pub report: CvReport,
}

impl CurveRow {
    pub fn mean(&self) -> MeanMetrics {
        self.report.mean
    }
}

/// 100, 200, ... up to `n`, ending with `n` itself.
pub fn default_curve_sizes(n: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = (1..=n / 100).map(|i| i * 100).collect();
    if sizes.last() != Some(&n) {
        sizes.push(n);
    }
    sizes
}

/// Cross-validation on stratified subsamples of each requested size.
pub fn learning_curve(
    dataset: &LabeledDataset,
    sizes: &[usize],
    seed: u64,
) -> Result<Vec<CurveRow>, LearnError> {
    sizes
        .iter()
        .map(|&size| {
            let sub = stratified_subsample(dataset, size, seed)?;
            Ok(CurveRow {
                size,
                report: kfold(&sub, seed, None)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedFeatureReport {
    pub top_k: usize,
    /// Selected features, most important first.
    pub selected: Vec<usize>,
    pub full: CvReport,
    pub reduced: CvReport,
}

/// Feature indices ordered by decreasing importance, ties by index.
pub fn rank_features(importances: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importances.len()).collect();
    order.sort_by(|&a, &b| importances[b].total_cmp(&importances[a]).then(a.cmp(&b)));
    order
}

pub fn reduced_feature_eval(
    dataset: &LabeledDataset,
    top_k: usize,
    seed: u64,
) -> Result<ReducedFeatureReport, LearnError> {
    if !(1..=crate::instrument::NUM_SIGNALS).contains(&top_k) {
        return Err(LearnError::BadTopK(top_k));
    }
    let full = kfold(dataset, seed, None)?;
    let selected: Vec<usize> = rank_features(&full.mean_importances)
        .into_iter()
        .take(top_k)
        .collect();
    let mask = (top_k < crate::instrument::NUM_SIGNALS).then_some(selected.as_slice());
    let reduced = kfold(dataset, seed, mask)?;
    Ok(ReducedFeatureReport {
        top_k,
        selected,
        full,
        reduced,
    })
}
