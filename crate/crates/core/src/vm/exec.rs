//! Interpreter: single-step semantics and the hooked run loop.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::io::PortIo;
use super::isa::{ArithOp, BlockId, Flags, Instruction, MemAddr, NUM_REGISTERS};
use super::program::Program;
use super::validate::{validate, ValidationReport};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrashReason {
    DivideByZero,
    MemoryFault { addr: i64 },
}

impl fmt::Display for CrashReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CrashReason::DivideByZero => f.write_str("divide-by-zero"),
            CrashReason::MemoryFault { addr } => write!(f, "memory-fault@{addr}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Running,
    Halted,
    Crashed(CrashReason),
    TimedOut,
}

/// How an execution ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExitKind {
    Halted,
    Crashed(CrashReason),
    TimedOut,
}

impl ExitKind {
    pub fn is_halted(self) -> bool {
        self == ExitKind::Halted
    }
}

impl fmt::Display for ExitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExitKind::Halted => f.write_str("halted"),
            ExitKind::Crashed(r) => write!(f, "crashed:{r}"),
            ExitKind::TimedOut => f.write_str("timed-out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Pc {
    pub block: BlockId,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionState {
    pub registers: [i64; NUM_REGISTERS],
    pub flags: Flags,
    pub memory: Vec<i64>,
    pub pc: Pc,
    pub sim_clock: SimTime,
    pub status: Status,
    /// Instructions completed so far.
    pub executed: u64,
}

impl ExecutionState {
    pub fn new(program: &Program) -> Self {
        ExecutionState {
            registers: [0; NUM_REGISTERS],
            flags: Flags::default(),
            memory: vec![0; program.memory_size],
            pc: Pc {
                block: program.entry_block,
                offset: 0,
            },
            sim_clock: SimTime::ZERO,
            status: Status::Running,
            executed: 0,
        }
    }

    pub fn exit_kind(&self) -> Option<ExitKind> {
        match self.status {
            Status::Running => None,
            Status::Halted => Some(ExitKind::Halted),
            Status::Crashed(r) => Some(ExitKind::Crashed(r)),
            Status::TimedOut => Some(ExitKind::TimedOut),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_instructions: u64,
    pub max_sim_time: SimTime,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_instructions: 500_000,
            max_sim_time: SimTime::from_secs(120),
        }
    }
}

#[derive(Debug, Error)]
pub enum VmError {
    #[error("program failed validation: {}", .0.defects.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(ValidationReport),
    #[error("execution is not running")]
    NotRunning,
    #[error("program counter L{}+{} is outside the program", .0.block, .0.offset)]
    BadPc(Pc),
}

/// Observable effect of one executed instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInfo {
    pub block: BlockId,
    pub offset: usize,
    pub addr: u64,
    /// Effective data address for `LOAD`/`STORE`.
    pub mem_addr: Option<u64>,
    /// Outcome of a conditional branch.
    pub taken: Option<bool>,
    /// The instruction was the last one executed in its block visit.
    pub block_done: bool,
}

/// Executes the instruction at `state.pc`. A fault leaves the state
/// `Crashed`; it is an outcome, not an `Err`.
pub fn step<P: PortIo + ?Sized>(
    state: &mut ExecutionState,
    program: &Program,
    io: &mut P,
) -> Result<Option<StepInfo>, VmError> {
    if state.status != Status::Running {
        return Err(VmError::NotRunning);
    }
    if program.instruction(state.pc.block, state.pc.offset).is_none() {
        return Err(VmError::BadPc(state.pc));
    }
    match execute(state, program, io) {
        Ok(info) => {
            state.executed += 1;
            Ok(Some(info))
        }
        Err(reason) => {
            state.status = Status::Crashed(reason);
            Ok(None)
        }
    }
}

fn resolve(state: &ExecutionState, addr: MemAddr) -> Result<usize, CrashReason> {
    let raw = match addr {
        MemAddr::Direct(a) => i64::try_from(a).unwrap_or(i64::MAX),
        MemAddr::Indexed { base, offset } => state.registers[base.index()].wrapping_add(offset),
    };
    if raw < 0 || raw as u64 >= state.memory.len() as u64 {
        return Err(CrashReason::MemoryFault { addr: raw });
    }
    Ok(raw as usize)
}

#[inline]
fn execute<P: PortIo + ?Sized>(
    state: &mut ExecutionState,
    program: &Program,
    io: &mut P,
) -> Result<StepInfo, CrashReason> {
    let Pc { block, offset } = state.pc;
    let blk = &program.blocks[block];
    let ins = blk.instructions[offset];
    let addr = blk.start_addr + offset as u64;
    let mut mem_addr = None;
    let mut taken = None;
    let mut next = Pc {
        block,
        offset: offset + 1,
    };
    let regs = &mut state.registers;

    match ins {
        Instruction::LoadI { dst, imm } => regs[dst.index()] = imm,
        Instruction::Load { dst, addr: a } => {
            let ea = resolve(state, a)?;
            state.registers[dst.index()] = state.memory[ea];
            mem_addr = Some(ea as u64);
        }
        Instruction::Store { src, addr: a } => {
            let ea = resolve(state, a)?;
            state.memory[ea] = state.registers[src.index()];
            mem_addr = Some(ea as u64);
        }
        Instruction::Mov { dst, src } => regs[dst.index()] = regs[src.index()],
        Instruction::Arith { op, dst, lhs, rhs } => {
            let (a, b) = (regs[lhs.index()], regs[rhs.index()]);
            regs[dst.index()] = match op {
                ArithOp::Add => a.wrapping_add(b),
                ArithOp::Sub => a.wrapping_sub(b),
                ArithOp::Mul => a.wrapping_mul(b),
                ArithOp::Div => {
                    if b == 0 {
                        return Err(CrashReason::DivideByZero);
                    }
                    a.wrapping_div(b)
                }
            };
        }
        Instruction::Cmp { lhs, rhs } => {
            state.flags = match regs[lhs.index()].cmp(&regs[rhs.index()]) {
                std::cmp::Ordering::Less => Flags::Lt,
                std::cmp::Ordering::Equal => Flags::Eq,
                std::cmp::Ordering::Greater => Flags::Gt,
            };
        }
        Instruction::Br { cond, target } => {
            let t = cond.holds(state.flags);
            taken = Some(t);
            next = if t {
                Pc { block: target, offset: 0 }
            } else {
                Pc { block: block + 1, offset: 0 }
            };
        }
        Instruction::Jmp { target } => next = Pc { block: target, offset: 0 },
        Instruction::In { dst, port } => {
            let read = io.read(port, state.sim_clock);
            regs[dst.index()] = read.value;
            state.sim_clock = state.sim_clock.max(read.ready_at);
        }
        Instruction::Out { src, port } => io.write(port, regs[src.index()], state.sim_clock),
        Instruction::Sleep { duration } => {
            state.sim_clock = state.sim_clock.saturating_add(duration);
        }
        Instruction::Nop => {}
        Instruction::Halt => {
            state.status = Status::Halted;
            next = state.pc;
        }
    }

    let block_done = offset + 1 == blk.len();
    if block_done && next.block == block && next.offset == offset + 1 {
        next = Pc { block: block + 1, offset: 0 };
    }
    state.pc = next;
    Ok(StepInfo {
        block,
        offset,
        addr,
        mem_addr,
        taken,
        block_done,
    })
}

/// Granularity at which the hooks want to observe one visit of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Block,
    Instruction,
}

#[derive(Debug, Clone, Copy)]
pub struct InsEvent<'a> {
    pub instruction: &'a Instruction,
    pub info: StepInfo,
}

/// Instrumentation points of the run loop. Hooks observe only; they never
/// get mutable access to the execution state.
pub trait ExecHooks {
    /// Called before the first instruction of each block visit.
    fn block_enter(&mut self, block: BlockId, executed: u64) -> Granularity;
    /// Called after each instruction of a visit entered at `Instruction` granularity.
    fn instruction(&mut self, event: &InsEvent<'_>);
    /// Called after the last instruction of a visit completes.
    fn block_exit(&mut self, block: BlockId, taken: Option<bool>);
    /// Called when execution stops inside a visit after `completed` instructions.
    fn block_abort(&mut self, block: BlockId, completed: usize);
}

/// Uninstrumented execution.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoHooks;

impl ExecHooks for NoHooks {
    #[inline(always)]
    fn block_enter(&mut self, _: BlockId, _: u64) -> Granularity {
        Granularity::Block
    }
    #[inline(always)]
    fn instruction(&mut self, _: &InsEvent<'_>) {}
    #[inline(always)]
    fn block_exit(&mut self, _: BlockId, _: Option<bool>) {}
    #[inline(always)]
    fn block_abort(&mut self, _: BlockId, _: usize) {}
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub state: ExecutionState,
    pub exit: ExitKind,
}

/// Runs `program` from its entry block until it halts, crashes or exceeds
/// `limits`.
pub fn run<P: PortIo + ?Sized, H: ExecHooks + ?Sized>(
    program: &Program,
    io: &mut P,
    limits: &Limits,
    hooks: &mut H,
) -> Result<RunOutcome, VmError> {
    let report = validate(program);
    if !report.is_ok() {
        return Err(VmError::Invalid(report));
    }
    let mut state = ExecutionState::new(program);
    let mut granularity = Granularity::Block;

    loop {
        let Pc { block, offset } = state.pc;
        if state.executed >= limits.max_instructions {
            if offset > 0 {
                hooks.block_abort(block, offset);
            }
            state.status = Status::TimedOut;
            break;
        }
        if offset == 0 {
            granularity = hooks.block_enter(block, state.executed);
        }
        let info = match execute(&mut state, program, io) {
            Ok(info) => info,
            Err(reason) => {
                hooks.block_abort(block, offset);
                state.status = Status::Crashed(reason);
                break;
            }
        };
        state.executed += 1;
        if granularity == Granularity::Instruction {
            let instruction = &program.blocks[block].instructions[offset];
            hooks.instruction(&InsEvent { instruction, info });
        }
        if info.block_done {
            hooks.block_exit(block, info.taken);
        }
        if state.status == Status::Halted {
            break;
        }
        if state.sim_clock > limits.max_sim_time {
            if !info.block_done {
                hooks.block_abort(block, offset + 1);
            }
            state.status = Status::TimedOut;
            break;
        }
    }

    let exit = state.exit_kind().expect("run loop ends in a terminal status");
    Ok(RunOutcome { state, exit })
}
