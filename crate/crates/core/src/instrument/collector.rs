use serde::{Deserialize, Serialize};

use super::signals::{Accumulator, BlockDelta, SignalSummary};
use crate::vm::{BlockId, ExecHooks, Granularity, InsEvent, Program};

/// Default number of instructions between interval summaries.
pub const DEFAULT_INTERVAL: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamEntry {
    pub instructions_executed: u64,
    pub summary: SignalSummary,
}

/// Cumulative summaries emitted every `interval_size` instructions, plus the
/// summary at the end of execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryStream {
    pub interval_size: u64,
    pub entries: Vec<StreamEntry>,
    pub final_summary: SignalSummary,
}

impl SummaryStream {
    /// Checks entry spacing and cumulative monotonicity.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut prev: Option<&SignalSummary> = None;
        let all = self
            .entries
            .iter()
            .map(|e| &e.summary)
            .chain(std::iter::once(&self.final_summary));
        for (i, entry) in self.entries.iter().enumerate() {
            let expected = (i as u64 + 1) * self.interval_size;
            if entry.instructions_executed != expected {
                return Err(format!(
                    "entry {i} at {} instructions, expected {expected}",
                    entry.instructions_executed
                ));
            }
        }
        for (i, s) in all.enumerate() {
            s.check_invariants().map_err(|e| format!("summary {i}: {e}"))?;
            if let Some(p) = prev {
                monotone(p, s).map_err(|e| format!("summary {i}: {e}"))?;
            }
            prev = Some(s);
        }
        Ok(())
    }
}

/// `next` must be a cumulative continuation of `prev`.
pub fn monotone(prev: &SignalSummary, next: &SignalSummary) -> Result<(), String> {
    use super::signals::{Signal, EXTREMES, UNDEFINED};
    for s in Signal::ALL.iter().filter(|s| s.is_count()) {
        if next[*s] < prev[*s] {
            return Err(format!("{} decreased", s.name()));
        }
    }
    for (min, max, _) in EXTREMES {
        if prev[min] == UNDEFINED {
            continue;
        }
        if next[min] == UNDEFINED || next[min] > prev[min] || next[max] < prev[max] {
            return Err(format!("{} / {} not widening", min.name(), max.name()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Policy {
    PerInstruction,
    BlockWherePossible,
}

struct BlockProfile {
    len: u64,
    /// Contains a LOAD/STORE through a runtime address.
    dynamic: bool,
    delta: BlockDelta,
}

/// Execution hooks that maintain the 26-slot tally and cut interval
/// summaries.
pub struct Collector<'p> {
    program: &'p Program,
    policy: Policy,
    profiles: Vec<BlockProfile>,
    acc: Accumulator,
    interval: u64,
    next_boundary: u64,
    granularity: Granularity,
    entries: Vec<StreamEntry>,
    hook_calls: u64,
}

impl<'p> Collector<'p> {
    /// Hooks every instruction.
    pub fn naive(program: &'p Program, interval: u64) -> Self {
        Self::new(program, interval, Policy::PerInstruction)
    }

    /// Hooks block entry and exit only, falling back to per-instruction
    /// hooks inside blocks with runtime addresses or an interval boundary.
    pub fn optimized(program: &'p Program, interval: u64) -> Self {
        Self::new(program, interval, Policy::BlockWherePossible)
    }

    fn new(program: &'p Program, interval: u64, policy: Policy) -> Self {
        assert!(interval >= 1, "interval size must be at least 1");
        let profiles = match policy {
            Policy::PerInstruction => Vec::new(),
            Policy::BlockWherePossible => program
                .blocks
                .iter()
                .map(|b| BlockProfile {
                    len: b.len() as u64,
                    dynamic: b.instructions.iter().any(|i| i.has_runtime_address()),
                    delta: BlockDelta::of(&b.instructions, b.start_addr),
                })
                .collect(),
        };
        Collector {
            program,
            policy,
            profiles,
            acc: Accumulator::default(),
            interval,
            next_boundary: interval,
            granularity: Granularity::Instruction,
            entries: Vec::new(),
            hook_calls: 0,
        }
    }

    pub fn hook_calls(&self) -> u64 {
        self.hook_calls
    }

    pub fn current(&self) -> SignalSummary {
        self.acc.snapshot()
    }

    pub fn finish(self) -> (SummaryStream, u64) {
        let stream = SummaryStream {
            interval_size: self.interval,
            entries: self.entries,
            final_summary: self.acc.snapshot(),
        };
        (stream, self.hook_calls)
    }
}

impl ExecHooks for Collector<'_> {
    #[inline]
    fn block_enter(&mut self, block: BlockId, _executed: u64) -> Granularity {
        self.hook_calls += 1;
        self.acc.bump(super::signals::Signal::SBEnter);
        self.granularity = match self.policy {
            Policy::PerInstruction => Granularity::Instruction,
            Policy::BlockWherePossible => {
                let profile = &self.profiles[block];
                if profile.dynamic || self.acc.ins_count() + profile.len >= self.next_boundary {
                    Granularity::Instruction
                } else {
                    Granularity::Block
                }
            }
        };
        self.granularity
    }

    #[inline]
    fn instruction(&mut self, event: &InsEvent<'_>) {
        self.hook_calls += 1;
        let info = &event.info;
        self.acc
            .record(event.instruction, info.addr, info.mem_addr, info.taken);
        if self.acc.ins_count() == self.next_boundary {
            self.entries.push(StreamEntry {
                instructions_executed: self.next_boundary,
                summary: self.acc.snapshot(),
            });
            self.next_boundary += self.interval;
        }
    }

    #[inline]
    fn block_exit(&mut self, block: BlockId, taken: Option<bool>) {
        self.hook_calls += 1;
        if self.granularity == Granularity::Block {
            self.acc.apply(&self.profiles[block].delta);
            if taken == Some(true) {
                self.acc.bump(super::signals::Signal::BranchTakenCount);
            }
        }
        self.acc.bump(super::signals::Signal::SBExit);
    }

    fn block_abort(&mut self, block: BlockId, completed: usize) {
        if self.granularity == Granularity::Block && completed > 0 {
            self.hook_calls += 1;
            let b = &self.program.blocks[block];
            self.acc
                .apply(&BlockDelta::of(&b.instructions[..completed], b.start_addr));
        }
    }
}

/// One record of the raw debug log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceEvent {
    Enter(BlockId),
    Exit(BlockId),
    Instruction {
        addr: u64,
        opcode: crate::vm::Opcode,
        mem_addr: Option<u64>,
        taken: Option<bool>,
    },
}

/// Debug hooks that keep every event. Never used for timing.
#[derive(Debug, Default, Clone)]
pub struct TraceRecorder {
    pub events: Vec<TraceEvent>,
}

impl ExecHooks for TraceRecorder {
    fn block_enter(&mut self, block: BlockId, _executed: u64) -> Granularity {
        self.events.push(TraceEvent::Enter(block));
        Granularity::Instruction
    }

    fn instruction(&mut self, event: &InsEvent<'_>) {
        self.events.push(TraceEvent::Instruction {
            addr: event.info.addr,
            opcode: event.instruction.opcode(),
            mem_addr: event.info.mem_addr,
            taken: event.info.taken,
        });
    }

    fn block_exit(&mut self, block: BlockId, _taken: Option<bool>) {
        self.events.push(TraceEvent::Exit(block));
    }

    fn block_abort(&mut self, _block: BlockId, _completed: usize) {}
}
