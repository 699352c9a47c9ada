//! Static checks that stand in for "the mutant compiles".

use std::fmt;

use serde::{Deserialize, Serialize};

use super::isa::{BlockId, Instruction, MemAddr, NUM_REGISTERS};
use super::program::Program;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefectKind {
    NoBlocks,
    EntryOutOfRange,
    EmptyBlock,
    TerminatorNotLast,
    BranchTargetOutOfRange(BlockId),
    AddressOutOfRange(u64),
    RegisterOutOfRange(u8),
    FallsOffEnd,
    LayoutMismatch,
    CoreBlockOutOfRange(BlockId),
}

impl fmt::Display for DefectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DefectKind::NoBlocks => f.write_str("program has no blocks"),
            DefectKind::EntryOutOfRange => f.write_str("entry block out of range"),
            DefectKind::EmptyBlock => f.write_str("empty block"),
            DefectKind::TerminatorNotLast => f.write_str("terminator not at block end"),
            DefectKind::BranchTargetOutOfRange(t) => {
                write!(f, "branch target out of range (L{t})")
            }
            DefectKind::AddressOutOfRange(a) => write!(f, "address out of range ({a})"),
            DefectKind::RegisterOutOfRange(r) => write!(f, "register out of range (r{r})"),
            DefectKind::FallsOffEnd => f.write_str("last block falls through past program end"),
            DefectKind::LayoutMismatch => f.write_str("block ids or flat addresses not contiguous"),
            DefectKind::CoreBlockOutOfRange(b) => write!(f, "core block out of range (L{b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Defect {
    pub block: Option<BlockId>,
    pub offset: Option<usize>,
    pub kind: DefectKind,
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.block, self.offset) {
            (Some(b), Some(o)) => write!(f, "L{b}+{o}: {}", self.kind),
            (Some(b), None) => write!(f, "L{b}: {}", self.kind),
            _ => write!(f, "{}", self.kind),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub defects: Vec<Defect>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.defects.is_empty()
    }
}

pub fn validate(program: &Program) -> ValidationReport {
    let mut defects = Vec::new();
    let mut push = |block, offset, kind| defects.push(Defect { block, offset, kind });
    let n_blocks = program.blocks.len();

    if n_blocks == 0 {
        push(None, None, DefectKind::NoBlocks);
        return ValidationReport { defects };
    }
    if program.entry_block >= n_blocks {
        push(None, None, DefectKind::EntryOutOfRange);
    }
    if let Some(core) = &program.core_blocks {
        for &b in core {
            if b >= n_blocks {
                push(None, None, DefectKind::CoreBlockOutOfRange(b));
            }
        }
    }

    let mut expected_addr = program.base_addr;
    for (idx, block) in program.blocks.iter().enumerate() {
        if block.id != idx || block.start_addr != expected_addr {
            push(Some(idx), None, DefectKind::LayoutMismatch);
        }
        expected_addr = block.start_addr + block.len() as u64;

        if block.is_empty() {
            push(Some(idx), None, DefectKind::EmptyBlock);
            continue;
        }
        let last = block.len() - 1;
        for (off, ins) in block.instructions.iter().enumerate() {
            if ins.is_terminator() && off != last {
                push(Some(idx), Some(off), DefectKind::TerminatorNotLast);
            }
            if let Some(target) = ins.branch_target() {
                if target >= n_blocks {
                    push(Some(idx), Some(off), DefectKind::BranchTargetOutOfRange(target));
                }
            }
            for reg in ins.registers() {
                if reg.index() >= NUM_REGISTERS {
                    push(Some(idx), Some(off), DefectKind::RegisterOutOfRange(reg.0));
                }
            }
            if let Instruction::Load { addr: MemAddr::Direct(a), .. }
            | Instruction::Store { addr: MemAddr::Direct(a), .. } = *ins
            {
                if a >= program.memory_size as u64 {
                    push(Some(idx), Some(off), DefectKind::AddressOutOfRange(a));
                }
            }
        }
        // Fallthrough (no terminator, or a conditional branch) needs a successor.
        let falls_through = !matches!(
            block.instructions[last],
            Instruction::Jmp { .. } | Instruction::Halt
        );
        if falls_through && idx + 1 == n_blocks {
            push(Some(idx), Some(last), DefectKind::FallsOffEnd);
        }
    }
    ValidationReport { defects }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vm::isa::{Cond, Reg};

    fn prog(bodies: Vec<Vec<Instruction>>, mem: usize) -> Program {
        Program::new("t", "v", bodies, mem, 0)
    }

    #[test]
    fn minimal_program_is_ok() {
        let p = prog(
            vec![vec![Instruction::LoadI { dst: Reg(0), imm: 1 }, Instruction::Halt]],
            0,
        );
        assert!(validate(&p).is_ok());
    }

    #[test]
    fn branch_target_equal_to_block_count_is_flagged() {
        let p = prog(
            vec![
                vec![Instruction::Br { cond: Cond::Eq, target: 2 }],
                vec![Instruction::Halt],
            ],
            0,
        );
        let report = validate(&p);
        assert_eq!(report.defects.len(), 1);
        assert_eq!(report.defects[0].kind, DefectKind::BranchTargetOutOfRange(2));
        assert!(report.defects[0].to_string().contains("branch target out of range"));
        assert_eq!(report.defects[0].block, Some(0));
        assert_eq!(report.defects[0].offset, Some(0));
    }

    #[test]
    fn store_at_memory_size_is_flagged() {
        let p = prog(
            vec![vec![
                Instruction::Store { src: Reg(0), addr: MemAddr::Direct(8) },
                Instruction::Halt,
            ]],
            8,
        );
        let report = validate(&p);
        assert_eq!(report.defects[0].kind, DefectKind::AddressOutOfRange(8));
        assert!(report.defects[0].to_string().contains("address out of range"));
    }

    #[test]
    fn structural_defects() {
        let p = prog(vec![vec![Instruction::Halt, Instruction::Nop], vec![]], 0);
        let kinds: Vec<_> = validate(&p).defects.into_iter().map(|d| d.kind).collect();
        assert!(kinds.contains(&DefectKind::TerminatorNotLast));
        assert!(kinds.contains(&DefectKind::EmptyBlock));

        let p = prog(vec![vec![Instruction::Nop]], 0);
        assert_eq!(validate(&p).defects[0].kind, DefectKind::FallsOffEnd);

        let p = prog(vec![vec![Instruction::Mov { dst: Reg(16), src: Reg(0) }, Instruction::Halt]], 0);
        assert_eq!(validate(&p).defects[0].kind, DefectKind::RegisterOutOfRange(16));

        let mut p = prog(vec![vec![Instruction::Halt]], 0);
        p.entry_block = 3;
        assert_eq!(validate(&p).defects[0].kind, DefectKind::EntryOutOfRange);
    }

    #[test]
    fn conditional_branch_in_last_block_falls_off() {
        let p = prog(vec![vec![Instruction::Br { cond: Cond::Eq, target: 0 }]], 0);
        assert_eq!(validate(&p).defects[0].kind, DefectKind::FallsOffEnd);
    }
}
