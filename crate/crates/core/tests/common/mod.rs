#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sigdetect::instrument::{SignalSummary, TraceEvent, NUM_SIGNALS};
use sigdetect::time::SimTime;
use sigdetect::vm::{
    validate, ArithOp, Cond, Instruction, Limits, MemAddr, Opcode, Program, Reg,
};

fn reg(rng: &mut ChaCha8Rng) -> Reg {
    Reg(rng.random_range(0..16))
}

fn mem_addr(rng: &mut ChaCha8Rng, memory: usize) -> MemAddr {
    if rng.random_bool(0.6) {
        MemAddr::Direct(rng.random_range(0..memory as u64))
    } else {
        MemAddr::Indexed {
            base: reg(rng),
            offset: rng.random_range(-4..(memory as i64)),
        }
    }
}

fn body_instruction(rng: &mut ChaCha8Rng, memory: usize) -> Instruction {
    match rng.random_range(0..11) {
        0 => Instruction::LoadI {
            dst: reg(rng),
            imm: rng.random_range(-20..40),
        },
        1 => Instruction::Load {
            dst: reg(rng),
            addr: mem_addr(rng, memory),
        },
        2 => Instruction::Store {
            src: reg(rng),
            addr: mem_addr(rng, memory),
        },
        3 => Instruction::Mov {
            dst: reg(rng),
            src: reg(rng),
        },
        4 => Instruction::Arith {
            op: [ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div][rng.random_range(0..4)],
            dst: reg(rng),
            lhs: reg(rng),
            rhs: reg(rng),
        },
        5 => Instruction::Cmp {
            lhs: reg(rng),
            rhs: reg(rng),
        },
        6 => Instruction::In {
            dst: reg(rng),
            port: rng.random_range(0..4),
        },
        7 => Instruction::Out {
            src: reg(rng),
            port: rng.random_range(0..4),
        },
        8 => Instruction::Sleep {
            duration: SimTime::from_millis(rng.random_range(1..20)),
        },
        9 => Instruction::Nop,
        _ => Instruction::LoadI {
            dst: reg(rng),
            imm: rng.random_range(0..3),
        },
    }
}

/// A random program that passes validation. It may loop, crash or halt.
pub fn random_program(seed: u64) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_blocks = rng.random_range(1..=8);
    let memory = rng.random_range(8..=48);
    let mut bodies = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let len = rng.random_range(0..=8);
        let mut body: Vec<Instruction> =
            (0..len).map(|_| body_instruction(&mut rng, memory)).collect();
        let last = b + 1 == n_blocks;
        let target = rng.random_range(0..n_blocks);
        let term = match rng.random_range(0..if last { 3 } else { 5 }) {
            0 => Instruction::Halt,
            1 => Instruction::Jmp { target },
            2 if last => Instruction::Halt,
            2 => Instruction::Br {
                cond: Cond::ALL[rng.random_range(0..Cond::ALL.len())],
                target,
            },
            3 => Instruction::Br {
                cond: Cond::ALL[rng.random_range(0..Cond::ALL.len())],
                target: rng.random_range(b + 1..n_blocks),
            },
            _ => {
                if body.is_empty() {
                    body.push(Instruction::Nop);
                }
                bodies.push(body);
                continue;
            }
        };
        body.push(term);
        bodies.push(body);
    }
    let p = Program::new(format!("random{seed}"), "r", bodies, memory, 0);
    assert!(validate(&p).is_ok(), "generator produced an invalid program: {p:?}");
    p
}

pub fn test_limits() -> Limits {
    Limits {
        max_instructions: 5_000,
        max_sim_time: SimTime::from_secs(30),
    }
}

/// Categories of one opcode, written out independently of the library's
/// own table: `(signal index, ...)` for every count it increments.
fn categories(op: Opcode) -> &'static [usize] {
    // InsCount=0 Load=1 Store=2 WrTmp=3 Exit=4 Jump=6 ALU=9 Imm=10 Cmp=11
    // Mov=12 InPort=13 OutPort=14 Nop=15 HaltSeen=16
    match op {
        Opcode::LoadI => &[0, 3, 10],
        Opcode::Load => &[0, 3, 1],
        Opcode::Store => &[0, 2],
        Opcode::Mov => &[0, 3, 12],
        Opcode::Add | Opcode::Sub | Opcode::Mul | Opcode::Div => &[0, 3, 9],
        Opcode::Cmp => &[0, 11],
        Opcode::Br => &[0, 4],
        Opcode::Jmp => &[0, 6],
        Opcode::In => &[0, 3, 13],
        Opcode::Out => &[0, 14],
        Opcode::Sleep | Opcode::Nop => &[0, 15],
        Opcode::Halt => &[0, 16],
    }
}

/// Recomputes summaries from a raw event log: the stream entries at every
/// `interval` instructions, then the final summary.
pub fn replay(events: &[TraceEvent], interval: u64) -> (Vec<SignalSummary>, SignalSummary) {
    let mut v = [0i64; NUM_SIGNALS];
    let mut ins_addrs: Vec<i64> = Vec::new();
    let mut load_addrs: Vec<i64> = Vec::new();
    let mut store_addrs: Vec<i64> = Vec::new();
    let snapshot = |v: &[i64; NUM_SIGNALS], ins: &[i64], ld: &[i64], st: &[i64]| {
        let mut out = *v;
        for (base, list) in [(17, ins), (20, ld), (23, st)] {
            match (list.iter().min(), list.iter().max()) {
                (Some(&lo), Some(&hi)) => {
                    out[base] = lo;
                    out[base + 1] = hi;
                    out[base + 2] = hi - lo;
                }
                _ => {
                    out[base] = -1;
                    out[base + 1] = -1;
                    out[base + 2] = -1;
                }
            }
        }
        SignalSummary::from_values(out)
    };
    let mut entries = Vec::new();
    for e in events {
        match *e {
            TraceEvent::Enter(_) => v[7] += 1,
            TraceEvent::Exit(_) => v[8] += 1,
            TraceEvent::Instruction {
                addr,
                opcode,
                mem_addr,
                taken,
            } => {
                for &c in categories(opcode) {
                    v[c] += 1;
                }
                if taken == Some(true) {
                    v[5] += 1;
                }
                ins_addrs.push(addr as i64);
                match (opcode, mem_addr) {
                    (Opcode::Load, Some(m)) => load_addrs.push(m as i64),
                    (Opcode::Store, Some(m)) => store_addrs.push(m as i64),
                    _ => {}
                }
                if (v[0] as u64).is_multiple_of(interval) {
                    entries.push(snapshot(&v, &ins_addrs, &load_addrs, &store_addrs));
                }
            }
        }
    }
    let last = snapshot(&v, &ins_addrs, &load_addrs, &store_addrs);
    (entries, last)
}
