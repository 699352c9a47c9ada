use serde::{Deserialize, Serialize};

use super::isa::{BlockId, Instruction};

/// Flat code addresses start here unless a program says otherwise.
pub const DEFAULT_BASE_ADDR: u64 = 0x1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicBlock {
    pub id: BlockId,
    pub instructions: Vec<Instruction>,
    /// Flat code address of the first instruction.
    pub start_addr: u64,
}

impl BasicBlock {
    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn terminator(&self) -> Option<&Instruction> {
        self.instructions.last().filter(|i| i.is_terminator())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub name: String,
    pub version: String,
    pub blocks: Vec<BasicBlock>,
    pub memory_size: usize,
    pub entry_block: BlockId,
    pub base_addr: u64,
    /// Blocks eligible for mutation; `None` means every block.
    pub core_blocks: Option<Vec<BlockId>>,
}

impl Program {
    /// Builds a program from block bodies, assigning ids and flat addresses.
    pub fn new(
        name: impl Into<String>,
        version: impl Into<String>,
        bodies: Vec<Vec<Instruction>>,
        memory_size: usize,
        entry_block: BlockId,
    ) -> Self {
        let blocks = bodies
            .into_iter()
            .enumerate()
            .map(|(id, instructions)| BasicBlock {
                id,
                instructions,
                start_addr: 0,
            })
            .collect();
        let mut program = Program {
            name: name.into(),
            version: version.into(),
            blocks,
            memory_size,
            entry_block,
            base_addr: DEFAULT_BASE_ADDR,
            core_blocks: None,
        };
        program.relayout();
        program
    }

    /// Reassigns block ids and contiguous flat addresses after an edit.
    pub fn relayout(&mut self) {
        let mut addr = self.base_addr;
        for (id, block) in self.blocks.iter_mut().enumerate() {
            block.id = id;
            block.start_addr = addr;
            addr += block.instructions.len() as u64;
        }
    }

    pub fn instruction_count(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn instruction(&self, block: BlockId, offset: usize) -> Option<&Instruction> {
        self.blocks.get(block)?.instructions.get(offset)
    }

    /// Flat address of `(block, offset)`.
    pub fn addr_of(&self, block: BlockId, offset: usize) -> u64 {
        self.blocks[block].start_addr + offset as u64
    }

    pub fn is_core_block(&self, block: BlockId) -> bool {
        match &self.core_blocks {
            Some(core) => core.contains(&block),
            None => block < self.blocks.len(),
        }
    }

    /// Iterates `(block, offset, instruction)` in layout order.
    pub fn sites(&self) -> impl Iterator<Item = (BlockId, usize, &Instruction)> {
        self.blocks.iter().flat_map(|b| {
            b.instructions
                .iter()
                .enumerate()
                .map(move |(off, ins)| (b.id, off, ins))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vm::isa::Reg;

    #[test]
    fn layout_is_contiguous_from_base() {
        let p = Program::new(
            "t",
            "v",
            vec![
                vec![Instruction::LoadI { dst: Reg(0), imm: 1 }, Instruction::Nop],
                vec![Instruction::Halt],
            ],
            4,
            0,
        );
        assert_eq!(p.blocks[0].start_addr, 0x1000);
        assert_eq!(p.blocks[1].start_addr, 0x1002);
        assert_eq!(p.addr_of(1, 0), 0x1002);
        assert_eq!(p.instruction_count(), 3);
    }
}
