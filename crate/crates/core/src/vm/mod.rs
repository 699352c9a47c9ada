//! Deterministic register machine with explicit basic blocks.

pub mod asm;
mod exec;
mod io;
mod isa;
mod program;
mod validate;

pub use exec::{
    run, step, CrashReason, ExecHooks, ExecutionState, ExitKind, Granularity, InsEvent, Limits,
    NoHooks, Pc, RunOutcome, Status, StepInfo, VmError,
};
pub use io::{NullIo, PortIo, PortRead, ScriptedIo};
pub use isa::{ArithOp, BlockId, Cond, Flags, Instruction, MemAddr, Opcode, Port, Reg, NUM_REGISTERS};
pub use program::{BasicBlock, Program, DEFAULT_BASE_ADDR};
pub use validate::{validate, Defect, DefectKind, ValidationReport};
