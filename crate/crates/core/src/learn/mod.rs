//! Decision-tree failure classifier, cross-validation and the experiment
//! procedures built on them.

mod cv;
mod experiments;
mod metrics;
mod model;
pub mod report;
mod tree;

use thiserror::Error;

pub use cv::{
    fold_count, fold_indices, fold_plans, kfold, CvReport, FoldPlan, FoldReport, DEFAULT_FOLDS,
    MIN_FOLD_SIZE,
};
pub use experiments::{
    cross_version_eval, default_curve_sizes, early_detection_sweep, learning_curve, rank_features,
    reduced_feature_eval, stratified_subsample, CurveRow, EarlyReport, EarlyRow,
    ReducedFeatureReport,
};
pub use metrics::{MeanMetrics, Metrics};
pub use model::{SavedModel, MODEL_FORMAT, MODEL_VERSION};
pub use tree::{gini, DecisionTree, Node};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("need at least 20 examples for cross-validation, have {0}")]
    TooFewExamples(usize),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature vector has length {found}, expected {expected}")]
    FeatureLength { expected: usize, found: usize },
    #[error("feature mask must name features in 0..26")]
    BadMask,
    #[error("top-k must be in 1..=26, got {0}")]
    BadTopK(usize),
    #[error("sample size {size} exceeds dataset size {n}")]
    SizeTooLarge { size: usize, n: usize },
    #[error("corpus has no summary streams")]
    NoStreams,
    #[error("model: {0}")]
    Model(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}
