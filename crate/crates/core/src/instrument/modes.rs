//! Instrumentation strategies, selectable by name.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::collector::{Collector, SummaryStream};
use crate::vm::{run, ExitKind, Limits, NoHooks, PortIo, Program, RunOutcome, VmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InstrumentationMode {
    None,
    NaivePerInstruction,
    Optimized,
}

impl InstrumentationMode {
    pub const ALL: [InstrumentationMode; 3] = [
        InstrumentationMode::None,
        InstrumentationMode::NaivePerInstruction,
        InstrumentationMode::Optimized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InstrumentationMode::None => "none",
            InstrumentationMode::NaivePerInstruction => "naive",
            InstrumentationMode::Optimized => "optimized",
        }
    }
}

impl fmt::Display for InstrumentationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InstrumentationMode {
    type Err = InstrumentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InstrumentationMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| InstrumentError::UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum InstrumentError {
    #[error("unknown instrumentation mode `{0}` (expected none, naive or optimized)")]
    UnknownMode(String),
    #[error("interval size must be at least 1")]
    ZeroInterval,
    #[error("mode `none` collects no summaries")]
    NothingToCollect,
    #[error("instrumentation changed the execution result under mode `{0}`")]
    Interference(InstrumentationMode),
    #[error("overhead measurement needs a halting run, got {0}")]
    DidNotHalt(ExitKind),
    #[error(transparent)]
    Vm(#[from] VmError),
}

/// Wall time and hook invocations of one instrumented run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverheadMeter {
    pub wall: Duration,
    pub hook_calls: u64,
}

#[derive(Debug, Clone)]
pub struct Collected {
    pub outcome: RunOutcome,
    /// Absent for the uninstrumented baseline.
    pub stream: Option<SummaryStream>,
    pub meter: OverheadMeter,
}

/// One way of observing an execution.
pub trait Instrumenter: Send + Sync {
    fn mode(&self) -> InstrumentationMode;

    fn execute(
        &self,
        program: &Program,
        io: &mut dyn PortIo,
        limits: &Limits,
        interval: u64,
    ) -> Result<Collected, InstrumentError>;
}

struct Uninstrumented;

impl Instrumenter for Uninstrumented {
    fn mode(&self) -> InstrumentationMode {
        InstrumentationMode::None
    }

    fn execute(
        &self,
        program: &Program,
        io: &mut dyn PortIo,
        limits: &Limits,
        _interval: u64,
    ) -> Result<Collected, InstrumentError> {
        let start = Instant::now();
        let outcome = run(program, io, limits, &mut NoHooks)?;
        Ok(Collected {
            outcome,
            stream: None,
            meter: OverheadMeter {
                wall: start.elapsed(),
                hook_calls: 0,
            },
        })
    }
}

struct PerInstruction;

impl Instrumenter for PerInstruction {
    fn mode(&self) -> InstrumentationMode {
        InstrumentationMode::NaivePerInstruction
    }

    fn execute(
        &self,
        program: &Program,
        io: &mut dyn PortIo,
        limits: &Limits,
        interval: u64,
    ) -> Result<Collected, InstrumentError> {
        if interval == 0 {
            return Err(InstrumentError::ZeroInterval);
        }
        let start = Instant::now();
        let mut hooks = Collector::naive(program, interval);
        let outcome = run(program, io, limits, &mut hooks)?;
        let wall = start.elapsed();
        let (stream, hook_calls) = hooks.finish();
        Ok(Collected {
            outcome,
            stream: Some(stream),
            meter: OverheadMeter { wall, hook_calls },
        })
    }
}

struct BlockLevel;

impl Instrumenter for BlockLevel {
    fn mode(&self) -> InstrumentationMode {
        InstrumentationMode::Optimized
    }

    fn execute(
        &self,
        program: &Program,
        io: &mut dyn PortIo,
        limits: &Limits,
        interval: u64,
    ) -> Result<Collected, InstrumentError> {
        if interval == 0 {
            return Err(InstrumentError::ZeroInterval);
        }
        let start = Instant::now();
        let mut hooks = Collector::optimized(program, interval);
        let outcome = run(program, io, limits, &mut hooks)?;
        let wall = start.elapsed();
        let (stream, hook_calls) = hooks.finish();
        Ok(Collected {
            outcome,
            stream: Some(stream),
            meter: OverheadMeter { wall, hook_calls },
        })
    }
}

/// Name-indexed table of instrumentation strategies.
pub struct InstrumenterRegistry {
    entries: BTreeMap<InstrumentationMode, Box<dyn Instrumenter>>,
}

impl Default for InstrumenterRegistry {
    fn default() -> Self {
        let mut registry = InstrumenterRegistry {
            entries: BTreeMap::new(),
        };
        registry.register(Box::new(Uninstrumented));
        registry.register(Box::new(PerInstruction));
        registry.register(Box::new(BlockLevel));
        registry
    }
}

impl InstrumenterRegistry {
    /// Replaces any strategy previously registered for the same mode.
    pub fn register(&mut self, instrumenter: Box<dyn Instrumenter>) {
        self.entries.insert(instrumenter.mode(), instrumenter);
    }

    pub fn get(&self, mode: InstrumentationMode) -> &dyn Instrumenter {
        self.entries
            .get(&mode)
            .map(|b| b.as_ref())
            .expect("every mode has a registered instrumenter")
    }

    pub fn by_name(&self, name: &str) -> Result<&dyn Instrumenter, InstrumentError> {
        Ok(self.get(name.parse()?))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().map(|m| m.name()).collect()
    }
}

/// Summaries of one instrumented execution.
#[derive(Debug, Clone)]
pub struct Collection {
    pub stream: SummaryStream,
    pub exit: ExitKind,
    pub outcome: RunOutcome,
    pub meter: OverheadMeter,
}

pub fn collect(
    program: &Program,
    io: &mut dyn PortIo,
    limits: &Limits,
    mode: InstrumentationMode,
    interval: u64,
) -> Result<Collection, InstrumentError> {
    if mode == InstrumentationMode::None {
        return Err(InstrumentError::NothingToCollect);
    }
    if interval == 0 {
        return Err(InstrumentError::ZeroInterval);
    }
    let collected = InstrumenterRegistry::default()
        .get(mode)
        .execute(program, io, limits, interval)?;
    Ok(Collection {
        stream: collected.stream.expect("instrumented modes produce a stream"),
        exit: collected.outcome.exit,
        outcome: collected.outcome,
        meter: collected.meter,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverheadReport {
    pub repeats: usize,
    pub instructions: u64,
    pub none_s: f64,
    pub naive_s: f64,
    pub optimized_s: f64,
    pub none_hooks: u64,
    pub naive_hooks: u64,
    pub optimized_hooks: u64,
}

impl OverheadReport {
    pub fn naive_ratio(&self) -> f64 {
        self.naive_s / self.none_s
    }
    pub fn optimized_ratio(&self) -> f64 {
        self.optimized_s / self.none_s
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Runs the same execution `repeats` times under each mode (interleaved)
/// and reports the median wall time per mode. `make_io` must return a fresh,
/// identically seeded environment on every call.
pub fn measure_overhead<F>(
    program: &Program,
    mut make_io: F,
    limits: &Limits,
    repeats: usize,
) -> Result<OverheadReport, InstrumentError>
where
    F: FnMut() -> Box<dyn PortIo>,
{
    let registry = InstrumenterRegistry::default();
    let repeats = repeats.max(1);
    let mut times: BTreeMap<InstrumentationMode, Vec<f64>> = BTreeMap::new();
    let mut hooks: BTreeMap<InstrumentationMode, u64> = BTreeMap::new();
    let mut reference: Option<RunOutcome> = None;

    for _ in 0..repeats {
        for mode in InstrumentationMode::ALL {
            let mut io = make_io();
            let collected =
                registry
                    .get(mode)
                    .execute(program, io.as_mut(), limits, u64::MAX)?;
            if collected.outcome.exit != ExitKind::Halted {
                return Err(InstrumentError::DidNotHalt(collected.outcome.exit));
            }
            match &reference {
                None => reference = Some(collected.outcome.clone()),
                Some(r) if *r != collected.outcome => {
                    return Err(InstrumentError::Interference(mode))
                }
                Some(_) => {}
            }
            times
                .entry(mode)
                .or_default()
                .push(collected.meter.wall.as_secs_f64());
            hooks.insert(mode, collected.meter.hook_calls);
        }
    }

    let mut med = |m| median(times.get_mut(&m).expect("timed"));
    Ok(OverheadReport {
        repeats,
        instructions: reference.map(|r| r.state.executed).unwrap_or(0),
        none_s: med(InstrumentationMode::None),
        naive_s: med(InstrumentationMode::NaivePerInstruction),
        optimized_s: med(InstrumentationMode::Optimized),
        none_hooks: hooks[&InstrumentationMode::None],
        naive_hooks: hooks[&InstrumentationMode::NaivePerInstruction],
        optimized_hooks: hooks[&InstrumentationMode::Optimized],
    })
}
