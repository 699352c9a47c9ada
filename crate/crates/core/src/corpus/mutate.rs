use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::vm::{validate, ArithOp, BlockId, Instruction, MemAddr, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    ArithSwap,
    ConstPerturb,
    BranchFlip,
    InstrDelete,
    AddrPerturb,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 5] = [
        OperatorKind::ArithSwap,
        OperatorKind::ConstPerturb,
        OperatorKind::BranchFlip,
        OperatorKind::InstrDelete,
        OperatorKind::AddrPerturb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::ArithSwap => "arith-swap",
            OperatorKind::ConstPerturb => "const-perturb",
            OperatorKind::BranchFlip => "branch-flip",
            OperatorKind::InstrDelete => "instr-delete",
            OperatorKind::AddrPerturb => "addr-perturb",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OperatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown mutation operator `{s}`"))
    }
}

/// A single-site rewrite rule.
pub trait MutationOperator: Send + Sync {
    fn kind(&self) -> OperatorKind;

    /// Replacement instructions for `ins`, in a fixed order; empty when the
    /// operator does not apply.
    fn rewrite(&self, ins: &Instruction) -> Vec<Instruction>;
}

/// ADD and SUB swap, MUL and DIV swap.
pub struct ArithSwap;

impl MutationOperator for ArithSwap {
    fn kind(&self) -> OperatorKind {
        OperatorKind::ArithSwap
    }

    fn rewrite(&self, ins: &Instruction) -> Vec<Instruction> {
        match *ins {
            Instruction::Arith { op, dst, lhs, rhs } => {
                let op = match op {
                    ArithOp::Add => ArithOp::Sub,
                    ArithOp::Sub => ArithOp::Add,
                    ArithOp::Mul => ArithOp::Div,
                    ArithOp::Div => ArithOp::Mul,
                };
                vec![Instruction::Arith { op, dst, lhs, rhs }]
            }
            _ => Vec::new(),
        }
    }
}

/// Immediate `+1`, `-1`, `*2`, `0`; values equal to the original or to an
/// earlier variant are skipped.
pub struct ConstPerturb;

impl MutationOperator for ConstPerturb {
    fn kind(&self) -> OperatorKind {
        OperatorKind::ConstPerturb
    }

    fn rewrite(&self, ins: &Instruction) -> Vec<Instruction> {
        let Instruction::LoadI { dst, imm } = *ins else {
            return Vec::new();
        };
        let mut values: Vec<i64> = Vec::with_capacity(4);
        for v in [
            imm.wrapping_add(1),
            imm.wrapping_sub(1),
            imm.wrapping_mul(2),
            0,
        ] {
            if v != imm && !values.contains(&v) {
                values.push(v);
            }
        }
        values
            .into_iter()
            .map(|imm| Instruction::LoadI { dst, imm })
            .collect()
    }
}

/// Inverts the condition of a `BR`.
pub struct BranchFlip;

impl MutationOperator for BranchFlip {
    fn kind(&self) -> OperatorKind {
        OperatorKind::BranchFlip
    }

    fn rewrite(&self, ins: &Instruction) -> Vec<Instruction> {
        match *ins {
            Instruction::Br { cond, target } => vec![Instruction::Br {
                cond: cond.negate(),
                target,
            }],
            _ => Vec::new(),
        }
    }
}

/// Replaces any non-`NOP` instruction with `NOP`.
pub struct InstrDelete;

impl MutationOperator for InstrDelete {
    fn kind(&self) -> OperatorKind {
        OperatorKind::InstrDelete
    }

    fn rewrite(&self, ins: &Instruction) -> Vec<Instruction> {
        match ins {
            Instruction::Nop => Vec::new(),
            _ => vec![Instruction::Nop],
        }
    }
}

/// `LOAD`/`STORE` address `+1` then `-1` (the direct address or the
/// displacement of an indexed operand).
pub struct AddrPerturb;

fn perturb_addr(addr: MemAddr) -> Vec<MemAddr> {
    match addr {
        MemAddr::Direct(a) => {
            let mut out = vec![MemAddr::Direct(a + 1)];
            if a > 0 {
                out.push(MemAddr::Direct(a - 1));
            }
            out
        }
        MemAddr::Indexed { base, offset } => vec![
            MemAddr::Indexed {
                base,
                offset: offset + 1,
            },
            MemAddr::Indexed {
                base,
                offset: offset - 1,
            },
        ],
    }
}

impl MutationOperator for AddrPerturb {
    fn kind(&self) -> OperatorKind {
        OperatorKind::AddrPerturb
    }

    fn rewrite(&self, ins: &Instruction) -> Vec<Instruction> {
        match *ins {
            Instruction::Load { dst, addr } => perturb_addr(addr)
                .into_iter()
                .map(|addr| Instruction::Load { dst, addr })
                .collect(),
            Instruction::Store { src, addr } => perturb_addr(addr)
                .into_iter()
                .map(|addr| Instruction::Store { src, addr })
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Operators applied during enumeration, in registration order.
pub struct OperatorRegistry {
    operators: Vec<Box<dyn MutationOperator>>,
}

impl Default for OperatorRegistry {
    fn default() -> Self {
        let mut r = OperatorRegistry::empty();
        r.register(Box::new(ArithSwap));
        r.register(Box::new(ConstPerturb));
        r.register(Box::new(BranchFlip));
        r.register(Box::new(InstrDelete));
        r.register(Box::new(AddrPerturb));
        r
    }
}

impl OperatorRegistry {
    pub fn empty() -> Self {
        OperatorRegistry {
            operators: Vec::new(),
        }
    }

    /// Adds `op`, replacing any operator of the same kind.
    pub fn register(&mut self, op: Box<dyn MutationOperator>) {
        let kind = op.kind();
        match self.operators.iter().position(|o| o.kind() == kind) {
            Some(i) => self.operators[i] = op,
            None => self.operators.push(op),
        }
    }

    pub fn get(&self, kind: OperatorKind) -> Option<&dyn MutationOperator> {
        self.operators
            .iter()
            .find(|o| o.kind() == kind)
            .map(|o| o.as_ref())
    }

    pub fn by_name(&self, name: &str) -> Option<&dyn MutationOperator> {
        self.get(name.parse().ok()?)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.operators.iter().map(|o| o.kind().name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn MutationOperator> {
        self.operators.iter().map(|o| o.as_ref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub block: BlockId,
    pub offset: usize,
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}+{}", self.block, self.offset)
    }
}

/// One operator applied at one site.
#[derive(Debug, Clone, PartialEq)]
pub struct Mutant {
    pub id: String,
    pub operator: OperatorKind,
    pub site: Site,
    pub original: Instruction,
    pub replacement: Instruction,
    pub program: Program,
}

/// A candidate that failed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedMutant {
    pub id: String,
    pub operator: OperatorKind,
    pub site: Site,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Enumeration {
    pub mutants: Vec<Mutant>,
    pub rejected: Vec<RejectedMutant>,
}

fn mutant_id(operator: OperatorKind, site: Site, variant: usize) -> String {
    format!("b{:02}o{:02}-{}-{}", site.block, site.offset, operator.name(), variant)
}

/// Applies every registered operator at every site of the core blocks.
/// Order: layout order of sites, then registry order, then variant order.
pub fn enumerate_with(program: &Program, registry: &OperatorRegistry) -> Enumeration {
    let mut out = Enumeration::default();
    for (block, offset, original) in program.sites() {
        if !program.is_core_block(block) {
            continue;
        }
        let site = Site { block, offset };
        for op in registry.iter() {
            for (variant, replacement) in op.rewrite(original).into_iter().enumerate() {
                let id = mutant_id(op.kind(), site, variant);
                let mut mutated = program.clone();
                mutated.blocks[block].instructions[offset] = replacement;
                let report = validate(&mutated);
                if report.is_ok() {
                    out.mutants.push(Mutant {
                        id,
                        operator: op.kind(),
                        site,
                        original: *original,
                        replacement,
                        program: mutated,
                    });
                } else {
                    let reason = report
                        .defects
                        .iter()
                        .map(|d| d.to_string())
                        .collect::<Vec<_>>()
                        .join("; ");
                    log::debug!("mutant {id} rejected: {reason}");
                    out.rejected.push(RejectedMutant {
                        id,
                        operator: op.kind(),
                        site,
                        reason,
                    });
                }
            }
        }
    }
    if !out.rejected.is_empty() {
        log::info!(
            "{} of {} mutants rejected by validation",
            out.rejected.len(),
            out.rejected.len() + out.mutants.len()
        );
    }
    out
}

/// Valid mutants of `program` under the default operator set.
pub fn enumerate_mutants(program: &Program) -> Vec<Mutant> {
    enumerate_with(program, &OperatorRegistry::default()).mutants
}
