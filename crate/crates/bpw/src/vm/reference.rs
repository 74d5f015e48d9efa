//! A deliberately naive evaluator used to cross-check the production
//! engines. It keeps every completed level as its own vector of booleans
//! instead of the 4w-bit register file, resolves result-queue reads
//! straight out of that trace, and computes gates from hand-written truth
//! tables rather than boolean operators.

use crate::format::{copy_latency, GateKind, Program};

use super::VmError;

/// Truth tables indexed by the operand bits, least significant operand
/// first: bit i of the table is the output for operand pattern i.
fn truth_table(kind: GateKind) -> u8 {
    use GateKind::*;
    match kind {
        Not => 0b01,
        And2 => 0b1000,
        Or2 => 0b1110,
        Nand2 => 0b0111,
        Nor2 => 0b0001,
        Xor2 => 0b0110,
        Xnor2 => 0b1001,
        And3 => 0x80,
        Or3 => 0xFE,
        Nand3 => 0x7F,
        Nor3 => 0x01,
        Xor3 => 0x96,
        Xnor3 => 0x69,
        Mux3 => 0xCA,
        Copy => unreachable!("COPY is not a gate"),
    }
}

#[derive(Clone, Copy)]
struct Slot {
    value: bool,
    ready: u64,
    written: bool,
}

/// Evaluates the program over a full execution trace and returns the
/// designated output bits.
pub fn reference_eval(program: &Program, inputs: &[bool]) -> Result<Vec<bool>, VmError> {
    let header = program.header();
    if inputs.len() as u64 != header.a {
        return Err(VmError::InputLengthMismatch {
            expected: header.a,
            got: inputs.len() as u64,
        });
    }
    let w = header.w as usize;
    let latency = copy_latency(header.w);
    let input_words = header.input_words() as usize;

    // Global input bit, zero-padded to the end of the input region.
    let input_bit = |i: usize| -> bool { inputs.get(i).copied().unwrap_or(false) };

    let mut input_q: Vec<Slot> = (0..w)
        .map(|i| Slot {
            value: input_bit(i),
            ready: 0,
            written: true,
        })
        .collect();
    let mut copy_q: Vec<Slot> = vec![
        Slot {
            value: false,
            ready: 0,
            written: false,
        };
        w
    ];
    let mut pi = 0usize;
    let mut pc = 0usize;
    let mut trace: Vec<Vec<bool>> = Vec::new();
    let mut pending: Vec<bool> = Vec::with_capacity(w);

    for (index, instr) in program.instructions().iter().enumerate() {
        let index_u = index as u64;
        let level = trace.len() as u64;
        if instr.kind() == GateKind::Copy {
            let ops = instr.operands();
            let (word, count, start) = (ops[0] as usize, ops[1] as usize, ops[2] as usize);
            if word >= 2 * w || count == 0 || count > w || start + count > w {
                return Err(VmError::OperandOutOfRange {
                    index: index_u,
                    value: ops[0] as u64,
                });
            }
            let mut bits = Vec::with_capacity(count);
            if word < w {
                if word >= input_words {
                    return Err(VmError::MissingInputWord {
                        index: index_u,
                        word: word as u64,
                        have: input_words as u64,
                    });
                }
                for t in 0..count {
                    bits.push(input_bit(word * w + start + t));
                }
            } else {
                let levels_back = (word - w + 1) as u64;
                if levels_back > level {
                    return Err(VmError::PriorLevelUnderflow {
                        index: index_u,
                        levels_back,
                        level,
                    });
                }
                let source = &trace[(level - levels_back) as usize];
                for t in 0..count {
                    bits.push(source[start + t]);
                }
            }
            let (queue, cursor) = if word < w {
                (&mut input_q, &mut pi)
            } else {
                (&mut copy_q, &mut pc)
            };
            for (t, bit) in bits.into_iter().enumerate() {
                queue[(*cursor + t) % w] = Slot {
                    value: bit,
                    ready: level + latency,
                    written: true,
                };
            }
            *cursor = (*cursor + count) % w;
        } else {
            let ops = instr.operands();
            let mut pattern = 0u8;
            for (bit_pos, &r) in ops.iter().enumerate() {
                let r = r as usize;
                let value = if r < 2 * w {
                    let slot = if r < w { input_q[r] } else { copy_q[r - w] };
                    if !slot.written {
                        return Err(VmError::UninitializedRead {
                            index: index_u,
                            register: r as u64,
                        });
                    }
                    if slot.ready > level {
                        return Err(VmError::NotReadyRead {
                            index: index_u,
                            register: r as u64,
                            ready_at: slot.ready,
                            level,
                        });
                    }
                    slot.value
                } else if r < 4 * w {
                    let half = (r - 2 * w) / w;
                    if half as u64 == level % 2 {
                        return Err(VmError::LockedRegisterRead {
                            index: index_u,
                            register: r as u64,
                            level,
                        });
                    }
                    if level == 0 {
                        return Err(VmError::UninitializedRead {
                            index: index_u,
                            register: r as u64,
                        });
                    }
                    trace[(level - 1) as usize][(r - 2 * w) % w]
                } else {
                    return Err(VmError::OperandOutOfRange {
                        index: index_u,
                        value: r as u64,
                    });
                };
                pattern |= (value as u8) << bit_pos;
            }
            pending.push((truth_table(instr.kind()) >> pattern) & 1 != 0);
            if pending.len() == w {
                trace.push(std::mem::take(&mut pending));
            }
        }
    }

    let b = header.b as usize;
    let needed = b.div_ceil(w);
    if trace.len() < needed {
        return Err(VmError::OutputUnavailable {
            completed: trace.len() as u64,
            needed: needed as u64,
        });
    }
    let mut outputs = Vec::with_capacity(b);
    let first = trace.len() - needed;
    for i in 0..b {
        outputs.push(trace[first + i / w][i % w]);
    }
    Ok(outputs)
}
