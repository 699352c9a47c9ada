//! Textual assembly format.
//!
//! ```text
//! # comment
//! .name controller        # program name
//! .version v1             # version tag
//! .memory 64              # data memory cells
//! .base 0x1000            # flat address of the first instruction (optional)
//! .entry L0               # entry block (optional, default: first block)
//! .core L1 L2             # mutable blocks (optional, default: all)
//! L0:
//!   LOADI r0, -5
//!   LOAD  r1, [12]        # direct address
//!   STORE r1, [r2+3]      # register + offset
//!   ADD   r0, r1, r2      # also SUB, MUL, DIV
//!   CMP   r0, r1
//!   BR    LT, L3          # LT LE EQ NE GE GT
//!   JMP   L0
//!   IN    r0, 3           # port id
//!   OUT   r0, 4
//!   SLEEP 0.25            # simulated seconds
//!   NOP
//!   HALT
//! ```
//!
//! Every instruction belongs to the block opened by the closest preceding
//! `L<n>:` label. Label numbers are names: they must be unique but need not
//! be dense or ordered, and blocks are numbered by their position in the
//! file. The printer always emits `L<position>`.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::isa::{ArithOp, Cond, Instruction, MemAddr, Reg};
use super::program::{Program, DEFAULT_BASE_ADDR};
use super::validate::{validate, ValidationReport};
use crate::time::SimTime;

#[derive(Debug, Error)]
pub enum AsmError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("program rejected: {}", .0.defects.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(ValidationReport),
}

fn syntax(line: usize, message: impl Into<String>) -> AsmError {
    AsmError::Syntax {
        line,
        message: message.into(),
    }
}

enum Target {
    Label(u64),
}

struct PendingBranch {
    block: usize,
    offset: usize,
    label: u64,
    line: usize,
}

/// Parses without validating. Use [`load`] for files meant to run.
pub fn parse(text: &str) -> Result<Program, AsmError> {
    let mut name = String::from("program");
    let mut version = String::from("v0");
    let mut memory_size = 0usize;
    let mut base_addr = DEFAULT_BASE_ADDR;
    let mut entry_label: Option<(u64, usize)> = None;
    let mut core_labels: Option<Vec<(u64, usize)>> = None;

    let mut bodies: Vec<Vec<Instruction>> = Vec::new();
    let mut label_to_block: HashMap<u64, usize> = HashMap::new();
    let mut pending: Vec<PendingBranch> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }

        if let Some(directive) = line.strip_prefix('.') {
            let mut parts = directive.split_whitespace();
            let key = parts.next().unwrap_or("");
            let args: Vec<&str> = parts.collect();
            let one = |args: &[&str]| -> Result<String, AsmError> {
                match args {
                    [v] => Ok(v.to_string()),
                    _ => Err(syntax(line_no, format!(".{key} takes exactly one argument"))),
                }
            };
            match key {
                "name" => name = one(&args)?,
                "version" => version = one(&args)?,
                "memory" => {
                    memory_size = parse_int(&one(&args)?)
                        .and_then(|v| usize::try_from(v).ok())
                        .ok_or_else(|| syntax(line_no, "bad memory size"))?
                }
                "base" => {
                    base_addr = parse_int(&one(&args)?)
                        .and_then(|v| u64::try_from(v).ok())
                        .ok_or_else(|| syntax(line_no, "bad base address"))?
                }
                "entry" => {
                    let l = parse_label(&one(&args)?)
                        .ok_or_else(|| syntax(line_no, "bad entry label"))?;
                    entry_label = Some((l, line_no));
                }
                "core" => {
                    let mut labels = Vec::new();
                    for a in args {
                        let l = parse_label(a)
                            .ok_or_else(|| syntax(line_no, format!("bad core label `{a}`")))?;
                        labels.push((l, line_no));
                    }
                    core_labels.get_or_insert_with(Vec::new).extend(labels);
                }
                other => return Err(syntax(line_no, format!("unknown directive .{other}"))),
            }
            continue;
        }

        if let Some(label) = line.strip_suffix(':') {
            let l = parse_label(label.trim())
                .ok_or_else(|| syntax(line_no, format!("bad label `{label}`")))?;
            if label_to_block.insert(l, bodies.len()).is_some() {
                return Err(syntax(line_no, format!("duplicate label L{l}")));
            }
            bodies.push(Vec::new());
            continue;
        }

        let n_blocks = bodies.len();
        let Some(body) = bodies.last_mut() else {
            return Err(syntax(line_no, "instruction before first label"));
        };
        let (ins, target) = parse_instruction(line).map_err(|m| syntax(line_no, m))?;
        if let Some(Target::Label(label)) = target {
            pending.push(PendingBranch {
                block: n_blocks - 1,
                offset: body.len(),
                label,
                line: line_no,
            });
        }
        body.push(ins);
    }

    let resolve = |label: u64, line: usize| {
        label_to_block
            .get(&label)
            .copied()
            .ok_or_else(|| syntax(line, format!("undefined label L{label}")))
    };
    for br in pending {
        let block = resolve(br.label, br.line)?;
        match &mut bodies[br.block][br.offset] {
            Instruction::Br { target, .. } | Instruction::Jmp { target } => *target = block,
            _ => unreachable!("pending branch points at a branch"),
        }
    }
    let entry_block = match entry_label {
        Some((l, line)) => resolve(l, line)?,
        None => 0,
    };
    let core_blocks = match core_labels {
        Some(labels) => {
            let mut blocks = labels
                .into_iter()
                .map(|(l, line)| resolve(l, line))
                .collect::<Result<Vec<_>, _>>()?;
            blocks.sort_unstable();
            blocks.dedup();
            Some(blocks)
        }
        None => None,
    };

    let mut program = Program::new(name, version, bodies, memory_size, entry_block);
    program.base_addr = base_addr;
    program.core_blocks = core_blocks;
    program.relayout();
    Ok(program)
}

/// Parses and validates.
pub fn load(text: &str) -> Result<Program, AsmError> {
    let program = parse(text)?;
    let report = validate(&program);
    if report.is_ok() {
        Ok(program)
    } else {
        Err(AsmError::Invalid(report))
    }
}

pub fn to_asm(program: &Program) -> String {
    let mut out = String::new();
    let _ = writeln!(out, ".name {}", program.name);
    let _ = writeln!(out, ".version {}", program.version);
    let _ = writeln!(out, ".memory {}", program.memory_size);
    let _ = writeln!(out, ".base {:#x}", program.base_addr);
    let _ = writeln!(out, ".entry L{}", program.entry_block);
    if let Some(core) = &program.core_blocks {
        let labels: Vec<String> = core.iter().map(|b| format!("L{b}")).collect();
        let _ = writeln!(out, ".core {}", labels.join(" "));
    }
    for block in &program.blocks {
        let _ = writeln!(out, "L{}:", block.id);
        for ins in &block.instructions {
            let _ = writeln!(out, "  {ins}");
        }
    }
    out
}

fn parse_int(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let value = if let Some(hex) = digits
        .strip_prefix("0x")
        .or_else(|| digits.strip_prefix("0X"))
    {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        digits.parse::<i64>().ok()?
    };
    Some(if neg { -value } else { value })
}

fn parse_label(s: &str) -> Option<u64> {
    s.strip_prefix('L')?.parse().ok()
}

fn parse_reg(s: &str) -> Result<Reg, String> {
    s.strip_prefix('r')
        .or_else(|| s.strip_prefix('R'))
        .and_then(|n| n.parse::<u8>().ok())
        .map(Reg)
        .ok_or_else(|| format!("expected register, found `{s}`"))
}

fn parse_mem(s: &str) -> Result<MemAddr, String> {
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| format!("expected memory operand, found `{s}`"))?
        .trim();
    if inner.starts_with('r') || inner.starts_with('R') {
        let split = inner.find(['+', '-']);
        let (base, offset) = match split {
            Some(pos) => {
                let off = parse_int(&inner[pos..])
                    .ok_or_else(|| format!("bad offset in `{s}`"))?;
                (inner[..pos].trim(), off)
            }
            None => (inner, 0),
        };
        Ok(MemAddr::Indexed {
            base: parse_reg(base)?,
            offset,
        })
    } else {
        let a = parse_int(inner)
            .and_then(|v| u64::try_from(v).ok())
            .ok_or_else(|| format!("bad address in `{s}`"))?;
        Ok(MemAddr::Direct(a))
    }
}

fn parse_port(s: &str) -> Result<u16, String> {
    parse_int(s)
        .and_then(|v| u16::try_from(v).ok())
        .ok_or_else(|| format!("bad port `{s}`"))
}

fn parse_instruction(line: &str) -> Result<(Instruction, Option<Target>), String> {
    let (mnemonic, rest) = match line.find(char::is_whitespace) {
        Some(pos) => (&line[..pos], line[pos..].trim()),
        None => (line, ""),
    };
    let ops: Vec<&str> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(',').map(str::trim).collect()
    };
    let upper = mnemonic.to_ascii_uppercase();
    let arity = |n: usize| -> Result<(), String> {
        if ops.len() == n {
            Ok(())
        } else {
            Err(format!("{upper} expects {n} operand(s), found {}", ops.len()))
        }
    };
    let label = |s: &str| parse_label(s).ok_or_else(|| format!("bad label `{s}`"));

    let arith = |op: ArithOp| -> Result<Instruction, String> {
        arity(3)?;
        Ok(Instruction::Arith {
            op,
            dst: parse_reg(ops[0])?,
            lhs: parse_reg(ops[1])?,
            rhs: parse_reg(ops[2])?,
        })
    };

    let ins = match upper.as_str() {
        "LOADI" => {
            arity(2)?;
            Instruction::LoadI {
                dst: parse_reg(ops[0])?,
                imm: parse_int(ops[1]).ok_or_else(|| format!("bad immediate `{}`", ops[1]))?,
            }
        }
        "LOAD" => {
            arity(2)?;
            Instruction::Load { dst: parse_reg(ops[0])?, addr: parse_mem(ops[1])? }
        }
        "STORE" => {
            arity(2)?;
            Instruction::Store { src: parse_reg(ops[0])?, addr: parse_mem(ops[1])? }
        }
        "MOV" => {
            arity(2)?;
            Instruction::Mov { dst: parse_reg(ops[0])?, src: parse_reg(ops[1])? }
        }
        "ADD" => arith(ArithOp::Add)?,
        "SUB" => arith(ArithOp::Sub)?,
        "MUL" => arith(ArithOp::Mul)?,
        "DIV" => arith(ArithOp::Div)?,
        "CMP" => {
            arity(2)?;
            Instruction::Cmp { lhs: parse_reg(ops[0])?, rhs: parse_reg(ops[1])? }
        }
        "BR" => {
            arity(2)?;
            let cond = Cond::from_mnemonic(ops[0])
                .ok_or_else(|| format!("bad condition `{}`", ops[0]))?;
            let l = label(ops[1])?;
            return Ok((Instruction::Br { cond, target: 0 }, Some(Target::Label(l))));
        }
        "JMP" => {
            arity(1)?;
            let l = label(ops[0])?;
            return Ok((Instruction::Jmp { target: 0 }, Some(Target::Label(l))));
        }
        "IN" => {
            arity(2)?;
            Instruction::In { dst: parse_reg(ops[0])?, port: parse_port(ops[1])? }
        }
        "OUT" => {
            arity(2)?;
            Instruction::Out { src: parse_reg(ops[0])?, port: parse_port(ops[1])? }
        }
        "SLEEP" => {
            arity(1)?;
            let secs: f64 = ops[0]
                .parse()
                .map_err(|_| format!("bad duration `{}`", ops[0]))?;
            let duration = SimTime::from_secs_f64(secs)
                .ok_or_else(|| format!("duration must be finite and >= 0, found `{}`", ops[0]))?;
            Instruction::Sleep { duration }
        }
        "NOP" => {
            arity(0)?;
            Instruction::Nop
        }
        "HALT" => {
            arity(0)?;
            Instruction::Halt
        }
        other => return Err(format!("unknown mnemonic `{other}`")),
    };
    Ok((ins, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
        # sample
        .name sample
        .version v3
        .memory 16
        .entry L7
        L7:
          LOADI r0, -5   # trailing comment
          LOAD r1, [12]
          STORE r1, [r2+3]
          LOAD r3, [r4-1]
          CMP r0, r1
          BR LT, L2
        L9:
          SLEEP 0.001953125
          JMP L7
        L2:
          IN r5, 3
          OUT r5, 4
          NOP
          HALT
    ";

    #[test]
    fn parses_all_forms() {
        let p = load(SAMPLE).unwrap();
        assert_eq!(p.name, "sample");
        assert_eq!(p.version, "v3");
        assert_eq!(p.memory_size, 16);
        assert_eq!(p.blocks.len(), 3);
        assert_eq!(p.entry_block, 0);
        assert_eq!(p.blocks[0].instructions[5], Instruction::Br { cond: Cond::Lt, target: 2 });
        assert_eq!(
            p.blocks[0].instructions[3],
            Instruction::Load { dst: Reg(3), addr: MemAddr::Indexed { base: Reg(4), offset: -1 } }
        );
        assert_eq!(
            p.blocks[1].instructions[0],
            Instruction::Sleep { duration: SimTime::from_nanos(1_953_125) }
        );
    }

    #[test]
    fn print_then_parse_is_identity() {
        let p = load(SAMPLE).unwrap();
        let again = load(&to_asm(&p)).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn loader_rejects_invalid_programs() {
        let err = load("L0:\n STORE r0, [4]\n HALT\n").unwrap_err();
        assert!(matches!(err, AsmError::Invalid(_)));
        assert!(err.to_string().contains("address out of range"));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse("L0:\n  FROB r1\n").unwrap_err();
        assert_eq!(err.to_string(), "line 2: unknown mnemonic `FROB`");
        assert!(parse("  NOP\n").is_err());
        assert!(parse("L0:\nJMP L5\n").is_err());
        assert!(parse("L0:\nL0:\nHALT\n").is_err());
        assert!(parse("L0:\nSLEEP -1\n").is_err());
    }
}
