//! Mutant generation, labeled corpus construction and class balancing.

mod build;
mod dataset;
mod mutate;
pub mod store;

use thiserror::Error;

pub use build::{
    build_corpus, build_corpus_with, run_id, run_seed, Corpus, CorpusConfig, CorpusMeta, RunRecord,
    DEFAULT_CORPUS_SEED, DEFAULT_DISCARD_WINDOW,
};
pub use dataset::{
    balance, balance_draws, balance_examples, class_counts, label, Label, LabeledDataset,
    LabeledExample, Provenance, SummaryPoint,
};
pub use mutate::{
    enumerate_mutants, enumerate_with, AddrPerturb, ArithSwap, BranchFlip, ConstPerturb,
    Enumeration, InstrDelete, Mutant, MutationOperator, OperatorKind, OperatorRegistry,
    RejectedMutant, Site,
};
pub use store::{load_corpus, write_corpus};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("balancing needs both classes present")]
    SingleClass,
    #[error("at least one mission is required")]
    NoMissions,
    #[error("program does not validate: {0}")]
    InvalidProgram(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] crate::instrument::csvio::SummaryCsvError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("corpus format: {0}")]
    Format(String),
}
