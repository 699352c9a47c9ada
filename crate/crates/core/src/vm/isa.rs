//! Instruction set of the controller virtual machine.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

pub const NUM_REGISTERS: usize = 16;

/// General-purpose register index. Values `>= 16` can be constructed (the
/// assembler accepts them) but are rejected by validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Reg(pub u8);

impl Reg {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Result of the last `CMP`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Flags {
    Lt,
    #[default]
    Eq,
    Gt,
}

/// Branch condition tested against [`Flags`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cond {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl Cond {
    pub const ALL: [Cond; 6] = [Cond::Lt, Cond::Le, Cond::Eq, Cond::Ne, Cond::Ge, Cond::Gt];

    pub fn holds(self, flags: Flags) -> bool {
        match self {
            Cond::Lt => flags == Flags::Lt,
            Cond::Le => flags != Flags::Gt,
            Cond::Eq => flags == Flags::Eq,
            Cond::Ne => flags != Flags::Eq,
            Cond::Ge => flags != Flags::Lt,
            Cond::Gt => flags == Flags::Gt,
        }
    }

    /// Logical negation: the returned condition holds exactly when `self` does not.
    pub fn negate(self) -> Cond {
        match self {
            Cond::Lt => Cond::Ge,
            Cond::Le => Cond::Gt,
            Cond::Eq => Cond::Ne,
            Cond::Ne => Cond::Eq,
            Cond::Ge => Cond::Lt,
            Cond::Gt => Cond::Le,
        }
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Cond::Lt => "LT",
            Cond::Le => "LE",
            Cond::Eq => "EQ",
            Cond::Ne => "NE",
            Cond::Ge => "GE",
            Cond::Gt => "GT",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Cond> {
        Cond::ALL
            .into_iter()
            .find(|c| c.mnemonic().eq_ignore_ascii_case(s))
    }
}

/// Data memory operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MemAddr {
    /// Statically known address.
    Direct(u64),
    /// `base + offset`, computed at run time.
    Indexed { base: Reg, offset: i64 },
}

impl MemAddr {
    pub fn is_runtime_computed(self) -> bool {
        matches!(self, MemAddr::Indexed { .. })
    }
}

impl fmt::Display for MemAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MemAddr::Direct(a) => write!(f, "[{a}]"),
            MemAddr::Indexed { base, offset } if offset < 0 => write!(f, "[{base}{offset}]"),
            MemAddr::Indexed { base, offset } => write!(f, "[{base}+{offset}]"),
        }
    }
}

/// I/O port identifier.
pub type Port = u16;

/// Index of a basic block within its program.
pub type BlockId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Opcode {
    LoadI,
    Load,
    Store,
    Mov,
    Add,
    Sub,
    Mul,
    Div,
    Cmp,
    Br,
    Jmp,
    In,
    Out,
    Sleep,
    Nop,
    Halt,
}

impl Opcode {
    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::LoadI => "LOADI",
            Opcode::Load => "LOAD",
            Opcode::Store => "STORE",
            Opcode::Mov => "MOV",
            Opcode::Add => "ADD",
            Opcode::Sub => "SUB",
            Opcode::Mul => "MUL",
            Opcode::Div => "DIV",
            Opcode::Cmp => "CMP",
            Opcode::Br => "BR",
            Opcode::Jmp => "JMP",
            Opcode::In => "IN",
            Opcode::Out => "OUT",
            Opcode::Sleep => "SLEEP",
            Opcode::Nop => "NOP",
            Opcode::Halt => "HALT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Instruction {
    LoadI { dst: Reg, imm: i64 },
    Load { dst: Reg, addr: MemAddr },
    Store { src: Reg, addr: MemAddr },
    Mov { dst: Reg, src: Reg },
    Arith { op: ArithOp, dst: Reg, lhs: Reg, rhs: Reg },
    Cmp { lhs: Reg, rhs: Reg },
    Br { cond: Cond, target: BlockId },
    Jmp { target: BlockId },
    In { dst: Reg, port: Port },
    Out { src: Reg, port: Port },
    Sleep { duration: SimTime },
    Nop,
    Halt,
}

impl Instruction {
    pub fn opcode(&self) -> Opcode {
        match self {
            Instruction::LoadI { .. } => Opcode::LoadI,
            Instruction::Load { .. } => Opcode::Load,
            Instruction::Store { .. } => Opcode::Store,
            Instruction::Mov { .. } => Opcode::Mov,
            Instruction::Arith { op, .. } => match op {
                ArithOp::Add => Opcode::Add,
                ArithOp::Sub => Opcode::Sub,
                ArithOp::Mul => Opcode::Mul,
                ArithOp::Div => Opcode::Div,
            },
            Instruction::Cmp { .. } => Opcode::Cmp,
            Instruction::Br { .. } => Opcode::Br,
            Instruction::Jmp { .. } => Opcode::Jmp,
            Instruction::In { .. } => Opcode::In,
            Instruction::Out { .. } => Opcode::Out,
            Instruction::Sleep { .. } => Opcode::Sleep,
            Instruction::Nop => Opcode::Nop,
            Instruction::Halt => Opcode::Halt,
        }
    }

    /// `BR`, `JMP` and `HALT` end a basic block.
    pub fn is_terminator(&self) -> bool {
        matches!(
            self,
            Instruction::Br { .. } | Instruction::Jmp { .. } | Instruction::Halt
        )
    }

    /// Whether the instruction touches memory through a run-time address.
    pub fn has_runtime_address(&self) -> bool {
        match self {
            Instruction::Load { addr, .. } | Instruction::Store { addr, .. } => {
                addr.is_runtime_computed()
            }
            _ => false,
        }
    }

    /// Registers named by the instruction, in operand order.
    pub fn registers(&self) -> Vec<Reg> {
        match *self {
            Instruction::LoadI { dst, .. } => vec![dst],
            Instruction::Load { dst, addr } => match addr {
                MemAddr::Indexed { base, .. } => vec![dst, base],
                MemAddr::Direct(_) => vec![dst],
            },
            Instruction::Store { src, addr } => match addr {
                MemAddr::Indexed { base, .. } => vec![src, base],
                MemAddr::Direct(_) => vec![src],
            },
            Instruction::Mov { dst, src } => vec![dst, src],
            Instruction::Arith { dst, lhs, rhs, .. } => vec![dst, lhs, rhs],
            Instruction::Cmp { lhs, rhs } => vec![lhs, rhs],
            Instruction::In { dst, .. } => vec![dst],
            Instruction::Out { src, .. } => vec![src],
            Instruction::Br { .. }
            | Instruction::Jmp { .. }
            | Instruction::Sleep { .. }
            | Instruction::Nop
            | Instruction::Halt => Vec::new(),
        }
    }

    /// Block targets referenced by control transfer.
    pub fn branch_target(&self) -> Option<BlockId> {
        match *self {
            Instruction::Br { target, .. } | Instruction::Jmp { target } => Some(target),
            _ => None,
        }
    }
}

/// Assembly rendering. Branch targets print as `L<block-index>`.
impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.opcode().mnemonic();
        match *self {
            Instruction::LoadI { dst, imm } => write!(f, "{m} {dst}, {imm}"),
            Instruction::Load { dst, addr } => write!(f, "{m} {dst}, {addr}"),
            Instruction::Store { src, addr } => write!(f, "{m} {src}, {addr}"),
            Instruction::Mov { dst, src } => write!(f, "{m} {dst}, {src}"),
            Instruction::Arith { dst, lhs, rhs, .. } => write!(f, "{m} {dst}, {lhs}, {rhs}"),
            Instruction::Cmp { lhs, rhs } => write!(f, "{m} {lhs}, {rhs}"),
            Instruction::Br { cond, target } => write!(f, "{m} {}, L{target}", cond.mnemonic()),
            Instruction::Jmp { target } => write!(f, "{m} L{target}"),
            Instruction::In { dst, port } => write!(f, "{m} {dst}, {port}"),
            Instruction::Out { src, port } => write!(f, "{m} {src}, {port}"),
            Instruction::Sleep { duration } => write!(f, "{m} {duration}"),
            Instruction::Nop | Instruction::Halt => f.write_str(m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negation_is_complement() {
        for cond in Cond::ALL {
            for flags in [Flags::Lt, Flags::Eq, Flags::Gt] {
                assert_ne!(cond.holds(flags), cond.negate().holds(flags));
            }
            assert_eq!(cond.negate().negate(), cond);
        }
    }

    #[test]
    fn terminators() {
        assert!(Instruction::Halt.is_terminator());
        assert!(Instruction::Jmp { target: 0 }.is_terminator());
        assert!(!Instruction::Nop.is_terminator());
    }
}
