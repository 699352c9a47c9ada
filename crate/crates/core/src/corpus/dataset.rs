use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::instrument::SignalSummary;
use crate::robosim::{trajectory_metrics, Mission, Trajectory};
use crate::vm::ExitKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Pass = 0,
    Fail = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Pass),
            1 => Some(Label::Fail),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Pass => "pass",
            Label::Fail => "fail",
        })
    }
}

/// Pass iff the controller halted, every waypoint was approached within
/// tolerance, and the robot ended within tolerance of the final waypoint.
pub fn label(trajectory: &Trajectory, mission: &Mission, exit: ExitKind) -> Label {
    if exit != ExitKind::Halted {
        return Label::Fail;
    }
    match trajectory_metrics(trajectory, mission) {
        Some(m) if m.reached_all && m.final_dist <= mission.tolerance => Label::Pass,
        _ => Label::Fail,
    }
}

/// Which summary of a run an example was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SummaryPoint {
    /// 1-based interval boundary.
    Interval(usize),
    Final,
}

impl fmt::Display for SummaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SummaryPoint::Interval(i) => write!(f, "i{i}"),
            SummaryPoint::Final => f.write_str("final"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub mutant_id: String,
    pub mission_id: String,
    pub point: SummaryPoint,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.mutant_id, self.mission_id, self.point)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub features: SignalSummary,
    pub label: Label,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    pub examples: Vec<LabeledExample>,
    pub version_tag: String,
}

impl LabeledDataset {
    pub fn new(
        examples: Vec<LabeledExample>,
        version_tag: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        if examples.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        Ok(LabeledDataset {
            examples,
            version_tag: version_tag.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// `(pass, fail)` counts.
    pub fn class_counts(&self) -> (usize, usize) {
        class_counts(&self.examples)
    }

    /// Same version tag, examples at `indices` in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            version_tag: self.version_tag.clone(),
        }
    }
}

pub fn class_counts(examples: &[LabeledExample]) -> (usize, usize) {
    let fail = examples.iter().filter(|e| e.label == Label::Fail).count();
    (examples.len() - fail, fail)
}

/// Indices (into `examples`) of the minority-class duplicates that
/// [`balance_examples`] appends, in append order.
pub fn balance_draws(examples: &[LabeledExample], seed: u64) -> Result<Vec<usize>, CorpusError> {
    let (pass, fail) = class_counts(examples);
    if pass == 0 || fail == 0 {
        return Err(CorpusError::SingleClass);
    }
    let minority = if fail < pass { Label::Fail } else { Label::Pass };
    let pool: Vec<usize> = examples
        .iter()
        .enumerate()
        .filter(|(_, e)| e.label == minority)
        .map(|(i, _)| i)
        .collect();
    let deficit = pass.max(fail) - pass.min(fail);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..deficit)
        .map(|_| pool[rng.random_range(0..pool.len())])
        .collect())
}

/// Original examples followed by seeded minority duplicates.
pub fn balance_examples(
    examples: &[LabeledExample],
    seed: u64,
) -> Result<Vec<LabeledExample>, CorpusError> {
    let draws = balance_draws(examples, seed)?;
    let mut out = examples.to_vec();
    out.extend(draws.into_iter().map(|i| examples[i].clone()));
    Ok(out)
}

/// Upsamples the minority class by seeded duplication until both classes
/// have equal counts. The majority class and all feature vectors are left
/// untouched.
pub fn balance(dataset: &LabeledDataset, seed: u64) -> Result<LabeledDataset, CorpusError> {
    Ok(LabeledDataset {
        examples: balance_examples(&dataset.examples, seed)?,
        version_tag: dataset.version_tag.clone(),
    })
}
