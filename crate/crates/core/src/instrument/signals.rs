//! The 26 cumulative execution signals.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::vm::{Instruction, Opcode};

pub const NUM_SIGNALS: usize = 26;

/// Number of leading count signals; the rest are address extremes.
pub const NUM_COUNTS: usize = 17;

/// Value of an address extreme whose event never happened.
pub const UNDEFINED: i64 = -1;

macro_rules! signals {
    ($($variant:ident),* $(,)?) => {
        /// Signal identifiers in canonical (column) order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum Signal {
            $($variant),*
        }

        impl Signal {
            pub const ALL: [Signal; NUM_SIGNALS] = [$(Signal::$variant),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Signal::$variant => stringify!($variant)),*
                }
            }
        }
    };
}

signals!(
    InsCount,
    LoadCount,
    StoreCount,
    WrTmpCount,
    ExitCount,
    BranchTakenCount,
    JumpCount,
    SBEnter,
    SBExit,
    ALUCount,
    ImmCount,
    CmpCount,
    MovCount,
    InPortCount,
    OutPortCount,
    NopCount,
    HaltSeen,
    MinInsAddr,
    MaxInsAddr,
    InsAddrDiff,
    MinLoadAddr,
    MaxLoadAddr,
    LoadAddrDiff,
    MinStoreAddr,
    MaxStoreAddr,
    StoreAddrDiff,
);

impl Signal {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Signal> {
        Signal::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn is_count(self) -> bool {
        self.index() < NUM_COUNTS
    }

    pub fn names() -> impl Iterator<Item = &'static str> {
        Signal::ALL.into_iter().map(Signal::name)
    }
}

/// Categories that partition every executed instruction.
pub const PARTITION: [Signal; 8] = [
    Signal::WrTmpCount,
    Signal::StoreCount,
    Signal::ExitCount,
    Signal::JumpCount,
    Signal::CmpCount,
    Signal::OutPortCount,
    Signal::NopCount,
    Signal::HaltSeen,
];

/// (min, max, diff) triples.
pub const EXTREMES: [(Signal, Signal, Signal); 3] = [
    (Signal::MinInsAddr, Signal::MaxInsAddr, Signal::InsAddrDiff),
    (Signal::MinLoadAddr, Signal::MaxLoadAddr, Signal::LoadAddrDiff),
    (Signal::MinStoreAddr, Signal::MaxStoreAddr, Signal::StoreAddrDiff),
];

/// A cumulative 26-signal summary of an execution prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignalSummary {
    values: [i64; NUM_SIGNALS],
}

impl Default for SignalSummary {
    fn default() -> Self {
        let mut values = [0; NUM_SIGNALS];
        for (min, max, diff) in EXTREMES {
            values[min.index()] = UNDEFINED;
            values[max.index()] = UNDEFINED;
            values[diff.index()] = UNDEFINED;
        }
        SignalSummary { values }
    }
}

impl SignalSummary {
    pub fn from_values(values: [i64; NUM_SIGNALS]) -> Self {
        SignalSummary { values }
    }

    pub fn values(&self) -> &[i64; NUM_SIGNALS] {
        &self.values
    }

    pub fn get(&self, signal: Signal) -> i64 {
        self.values[signal.index()]
    }

    pub fn to_features(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    /// Checks the structural invariants every summary must satisfy.
    pub fn check_invariants(&self) -> Result<(), String> {
        for s in Signal::ALL.iter().take(NUM_COUNTS) {
            if self.get(*s) < 0 {
                return Err(format!("{} is negative", s.name()));
            }
        }
        let partition: i64 = PARTITION.iter().map(|s| self.get(*s)).sum();
        if partition != self.get(Signal::InsCount) {
            return Err(format!(
                "category partition {partition} != InsCount {}",
                self.get(Signal::InsCount)
            ));
        }
        if self.get(Signal::LoadCount) > self.get(Signal::WrTmpCount) {
            return Err("LoadCount exceeds WrTmpCount".into());
        }
        let (enter, exit) = (self.get(Signal::SBEnter), self.get(Signal::SBExit));
        if !(exit <= enter && enter <= exit + 1) {
            return Err(format!("SBEnter {enter} / SBExit {exit} out of step"));
        }
        if self.get(Signal::BranchTakenCount) > self.get(Signal::ExitCount) {
            return Err("BranchTakenCount exceeds ExitCount".into());
        }
        for (min, max, diff) in EXTREMES {
            let (lo, hi, d) = (self.get(min), self.get(max), self.get(diff));
            let all_undefined = lo == UNDEFINED && hi == UNDEFINED && d == UNDEFINED;
            if !all_undefined && (lo < 0 || hi < lo || d != hi - lo) {
                return Err(format!("inconsistent extremes for {}", diff.name()));
            }
        }
        Ok(())
    }
}

impl Index<Signal> for SignalSummary {
    type Output = i64;
    fn index(&self, signal: Signal) -> &i64 {
        &self.values[signal.index()]
    }
}

/// Fixed-slot running tally updated in place by the instrumentation hooks.
/// Diff slots are only materialised on [`Accumulator::snapshot`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Accumulator {
    slots: [i64; NUM_SIGNALS],
}

impl Default for Accumulator {
    fn default() -> Self {
        Accumulator {
            slots: SignalSummary::default().values,
        }
    }
}

#[inline]
fn widen(slots: &mut [i64; NUM_SIGNALS], min: Signal, max: Signal, lo: i64, hi: i64) {
    let (mi, ma) = (min.index(), max.index());
    if slots[mi] == UNDEFINED || lo < slots[mi] {
        slots[mi] = lo;
    }
    if slots[ma] == UNDEFINED || hi > slots[ma] {
        slots[ma] = hi;
    }
}

impl Accumulator {
    #[inline]
    pub fn bump(&mut self, signal: Signal) {
        self.slots[signal.index()] += 1;
    }

    #[inline]
    pub fn ins_count(&self) -> u64 {
        self.slots[Signal::InsCount.index()] as u64
    }

    /// Counts one executed instruction with its dynamic operands.
    #[inline]
    pub fn record(&mut self, ins: &Instruction, addr: u64, mem_addr: Option<u64>, taken: Option<bool>) {
        tally_static(&mut self.slots, ins);
        let a = addr as i64;
        widen(&mut self.slots, Signal::MinInsAddr, Signal::MaxInsAddr, a, a);
        if let Some(m) = mem_addr {
            let m = m as i64;
            match ins.opcode() {
                Opcode::Load => widen(&mut self.slots, Signal::MinLoadAddr, Signal::MaxLoadAddr, m, m),
                Opcode::Store => {
                    widen(&mut self.slots, Signal::MinStoreAddr, Signal::MaxStoreAddr, m, m)
                }
                _ => {}
            }
        }
        if taken == Some(true) {
            self.bump(Signal::BranchTakenCount);
        }
    }

    /// Adds a precomputed block aggregate.
    #[inline]
    pub fn apply(&mut self, delta: &BlockDelta) {
        for (slot, d) in self.slots.iter_mut().zip(delta.counts.iter()) {
            *slot += d;
        }
        for (idx, &(min, max, _)) in EXTREMES.iter().enumerate() {
            let (lo, hi) = delta.extremes[idx];
            if lo != UNDEFINED {
                widen(&mut self.slots, min, max, lo, hi);
            }
        }
    }

    pub fn snapshot(&self) -> SignalSummary {
        let mut values = self.slots;
        for (min, max, diff) in EXTREMES {
            values[diff.index()] = if values[min.index()] == UNDEFINED {
                UNDEFINED
            } else {
                values[max.index()] - values[min.index()]
            };
        }
        SignalSummary { values }
    }
}

/// Static category counts for one instruction (no address or branch outcome).
#[inline]
fn tally_static(slots: &mut [i64], ins: &Instruction) {
    use Signal::*;
    slots[InsCount.index()] += 1;
    let extra: &[Signal] = match ins.opcode() {
        Opcode::LoadI => &[WrTmpCount, ImmCount],
        Opcode::Load => &[WrTmpCount, LoadCount],
        Opcode::Mov => &[WrTmpCount, MovCount],
        Opcode::Add | Opcode::Sub | Opcode::Mul | Opcode::Div => &[WrTmpCount, ALUCount],
        Opcode::In => &[WrTmpCount, InPortCount],
        Opcode::Store => &[StoreCount],
        Opcode::Br => &[ExitCount],
        Opcode::Jmp => &[JumpCount],
        Opcode::Cmp => &[CmpCount],
        Opcode::Out => &[OutPortCount],
        Opcode::Sleep | Opcode::Nop => &[NopCount],
        Opcode::Halt => &[HaltSeen],
    };
    for s in extra {
        slots[s.index()] += 1;
    }
}

/// Aggregate of a straight run of instructions whose memory addresses are
/// all static.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct BlockDelta {
    counts: [i64; NUM_COUNTS],
    /// (min, max) for instruction, load and store addresses.
    extremes: [(i64, i64); 3],
}

impl BlockDelta {
    /// Aggregates `instructions` laid out from `start_addr`. Runtime
    /// addresses are ignored; callers only use this for static blocks or
    /// prefixes of them.
    pub fn of(instructions: &[Instruction], start_addr: u64) -> Self {
        let mut counts = [0i64; NUM_COUNTS];
        let mut extremes = [(UNDEFINED, UNDEFINED); 3];
        let mut widen_pair = |idx: usize, v: i64| {
            let (lo, hi) = &mut extremes[idx];
            if *lo == UNDEFINED || v < *lo {
                *lo = v;
            }
            if *hi == UNDEFINED || v > *hi {
                *hi = v;
            }
        };
        for (off, ins) in instructions.iter().enumerate() {
            tally_static(&mut counts, ins);
            widen_pair(0, (start_addr + off as u64) as i64);
            match *ins {
                Instruction::Load { addr: crate::vm::MemAddr::Direct(a), .. } => widen_pair(1, a as i64),
                Instruction::Store { addr: crate::vm::MemAddr::Direct(a), .. } => {
                    widen_pair(2, a as i64)
                }
                _ => {}
            }
        }
        BlockDelta { counts, extremes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vm::{MemAddr, Reg};

    #[test]
    fn canonical_order_and_names() {
        assert_eq!(Signal::ALL.len(), 26);
        assert_eq!(Signal::ALL[0].name(), "InsCount");
        assert_eq!(Signal::ALL[25].name(), "StoreAddrDiff");
        for (i, s) in Signal::ALL.iter().enumerate() {
            assert_eq!(s.index(), i);
            assert_eq!(Signal::from_name(s.name()), Some(*s));
        }
    }

    #[test]
    fn empty_summary_uses_sentinels() {
        let s = SignalSummary::default();
        assert_eq!(s[Signal::MinStoreAddr], UNDEFINED);
        assert_eq!(s[Signal::InsAddrDiff], UNDEFINED);
        assert_eq!(s[Signal::InsCount], 0);
        s.check_invariants().unwrap();
    }

    #[test]
    fn block_delta_matches_per_instruction_recording() {
        let body = [
            Instruction::LoadI { dst: Reg(0), imm: 4 },
            Instruction::Store { src: Reg(0), addr: MemAddr::Direct(9) },
            Instruction::Load { dst: Reg(1), addr: MemAddr::Direct(2) },
            Instruction::Nop,
            Instruction::Jmp { target: 0 },
        ];
        let mut per_ins = Accumulator::default();
        for (off, ins) in body.iter().enumerate() {
            let mem = match ins {
                Instruction::Store { .. } => Some(9),
                Instruction::Load { .. } => Some(2),
                _ => None,
            };
            per_ins.record(ins, 0x2000 + off as u64, mem, None);
        }
        let mut block = Accumulator::default();
        block.apply(&BlockDelta::of(&body, 0x2000));
        assert_eq!(per_ins.snapshot(), block.snapshot());
        per_ins.snapshot().check_invariants().unwrap();
    }
}
