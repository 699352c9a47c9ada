use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{label, Label, LabeledDataset, LabeledExample, Provenance, SummaryPoint};
use super::mutate::{enumerate_with, Mutant, OperatorKind, OperatorRegistry, Site};
use super::CorpusError;
use crate::instrument::{InstrumentationMode, SummaryStream};
use crate::robosim::{run_mission, Mission, MissionConfig, WorldConfig};
use crate::vm::{validate, ExitKind, Program};

pub const DEFAULT_DISCARD_WINDOW: u64 = 1_000;
pub const DEFAULT_CORPUS_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub interval: u64,
    /// Runs that crash before executing this many instructions are dropped.
    pub discard_window: u64,
    pub base_seed: u64,
    pub world: WorldConfig,
    /// Worker threads; `None` uses the global pool.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            interval: crate::instrument::DEFAULT_INTERVAL,
            discard_window: DEFAULT_DISCARD_WINDOW,
            base_seed: DEFAULT_CORPUS_SEED,
            world: WorldConfig::default(),
            workers: None,
        }
    }
}

/// One mutant × mission execution as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub mutant_id: String,
    pub operator: OperatorKind,
    pub site: Site,
    pub mission_id: String,
    pub seed: u64,
    pub exit_kind: String,
    pub instructions: u64,
    /// 0 = pass, 1 = fail; absent when the run errored.
    pub label: Option<u8>,
    pub discarded: bool,
    pub error: Option<String>,
    pub summary_file: Option<String>,
}

impl RunRecord {
    pub fn retained(&self) -> bool {
        !self.discarded && self.error.is_none() && self.label.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub program: String,
    pub version_tag: String,
    pub missions: Vec<String>,
    pub mutants: usize,
    pub rejected_mutants: usize,
    pub config: CorpusConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub meta: CorpusMeta,
    pub records: Vec<RunRecord>,
    /// Streams of retained runs, by run id.
    pub streams: BTreeMap<String, SummaryStream>,
}

impl Corpus {
    pub fn retained(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(|r| r.retained())
    }

    /// Largest interval index reached by any retained run.
    pub fn max_interval(&self) -> usize {
        self.streams
            .values()
            .map(|s| s.entries.len())
            .max()
            .unwrap_or(0)
    }

    /// One example per retained run that has a summary at `point`, in
    /// manifest order.
    pub fn examples_at(&self, point: SummaryPoint) -> Vec<LabeledExample> {
        self.retained()
            .filter_map(|r| {
                let stream = self.streams.get(&r.run_id)?;
                let features = match point {
                    SummaryPoint::Final => stream.final_summary,
                    SummaryPoint::Interval(i) if i >= 1 => stream.entries.get(i - 1)?.summary,
                    SummaryPoint::Interval(_) => return None,
                };
                Some(LabeledExample {
                    features,
                    label: Label::from_u8(r.label?)?,
                    provenance: Provenance {
                        mutant_id: r.mutant_id.clone(),
                        mission_id: r.mission_id.clone(),
                        point,
                    },
                })
            })
            .collect()
    }

    pub fn dataset_at(&self, point: SummaryPoint) -> Result<LabeledDataset, CorpusError> {
        LabeledDataset::new(self.examples_at(point), self.meta.version_tag.clone())
    }

    /// Final-summary dataset.
    pub fn dataset(&self) -> Result<LabeledDataset, CorpusError> {
        self.dataset_at(SummaryPoint::Final)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// World seed of a run: a function of the base seed and the run id only,
/// so adding operators or missions does not reseed existing runs.
pub fn run_seed(base_seed: u64, run_id: &str) -> u64 {
    base_seed ^ fnv1a(run_id.as_bytes())
}

pub fn run_id(mutant_id: &str, mission_id: &str) -> String {
    format!("{mutant_id}.{mission_id}")
}

fn execute(
    mutant: &Mutant,
    mission: &Mission,
    config: &CorpusConfig,
) -> (RunRecord, Option<SummaryStream>) {
    let id = run_id(&mutant.id, &mission.name);
    let seed = run_seed(config.base_seed, &id);
    let mut record = RunRecord {
        run_id: id.clone(),
        mutant_id: mutant.id.clone(),
        operator: mutant.operator,
        site: mutant.site,
        mission_id: mission.name.clone(),
        seed,
        exit_kind: String::new(),
        instructions: 0,
        label: None,
        discarded: false,
        error: None,
        summary_file: None,
    };
    let mission_config = MissionConfig {
        seed,
        mode: InstrumentationMode::Optimized,
        interval: config.interval,
        delay: None,
        world: config.world,
    };
    match run_mission(&mutant.program, mission, &mission_config) {
        Ok(run) => {
            record.exit_kind = run.exit.to_string();
            record.instructions = run.outcome.state.executed;
            record.label = Some(label(&run.trajectory, mission, run.exit).as_u8());
            record.discarded = matches!(run.exit, ExitKind::Crashed(_))
                && run.outcome.state.executed < config.discard_window;
            if record.discarded || run.stream.is_none() {
                record.discarded = true;
                return (record, None);
            }
            record.summary_file = Some(format!("summaries/{id}.csv"));
            (record, run.stream)
        }
        Err(e) => {
            log::warn!("run {id} failed: {e}");
            record.exit_kind = "error".into();
            record.error = Some(e.to_string());
            (record, None)
        }
    }
}

/// Runs every valid mutant of `program` on every mission under optimized
/// instrumentation and labels each execution.
pub fn build_corpus(
    program: &Program,
    missions: &[Mission],
    config: &CorpusConfig,
) -> Result<Corpus, CorpusError> {
    build_corpus_with(program, missions, config, &OperatorRegistry::default())
}

pub fn build_corpus_with(
    program: &Program,
    missions: &[Mission],
    config: &CorpusConfig,
    registry: &OperatorRegistry,
) -> Result<Corpus, CorpusError> {
    if missions.is_empty() {
        return Err(CorpusError::NoMissions);
    }
    let report = validate(program);
    if !report.is_ok() {
        return Err(CorpusError::InvalidProgram(
            report
                .defects
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    let enumeration = enumerate_with(program, registry);
    if enumeration.mutants.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let jobs: Vec<(&Mutant, &Mission)> = enumeration
        .mutants
        .iter()
        .flat_map(|m| missions.iter().map(move |mission| (m, mission)))
        .collect();
    log::info!(
        "{}: {} mutants x {} missions",
        program.version,
        enumeration.mutants.len(),
        missions.len()
    );
    let run_all = || -> Vec<(RunRecord, Option<SummaryStream>)> {
        jobs.par_iter()
            .map(|(m, mission)| execute(m, mission, config))
            .collect()
    };
    let results = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CorpusError::Format(e.to_string()))?
            .install(run_all),
        None => run_all(),
    };
    let mut records = Vec::with_capacity(results.len());
    let mut streams = BTreeMap::new();
    for (record, stream) in results {
        if let Some(stream) = stream {
            streams.insert(record.run_id.clone(), stream);
        }
        records.push(record);
    }
    let corpus = Corpus {
        meta: CorpusMeta {
            program: program.name.clone(),
            version_tag: program.version.clone(),
            missions: missions.iter().map(|m| m.name.clone()).collect(),
            mutants: enumeration.mutants.len(),
            rejected_mutants: enumeration.rejected.len(),
            config: config.clone(),
        },
        records,
        streams,
    };
    if corpus.retained().next().is_none() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(corpus)
}
