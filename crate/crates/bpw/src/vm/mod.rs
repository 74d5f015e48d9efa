//! Evaluators for BPW programs.
//!
//! Execution state is a 4w-bit register file (input queue, copy queue,
//! and a double-buffered result queue) plus a word-addressed main memory
//! that holds the circuit inputs followed by one w-bit word per completed
//! level. Three cursors walk the queues: PI (input queue), PC (copy
//! queue), PR (result queue, cycling over both halves).
//!
//! Two production evaluators share one engine, differing only in how the
//! register file is stored:
//!
//! - [`EvaluatorKind::Bytewise`]: one byte per register bit,
//! - [`EvaluatorKind::Bitpacked`]: 64 register bits per machine word.
//!
//! Both enforce availability (lock, latency, initialization) with a single
//! ready-tag comparison per register read. [`run_unchecked`] drops those
//! checks for benchmarking programs that already passed validation, and
//! [`reference_eval`] is a deliberately naive cross-check that keeps a
//! full per-level trace instead of the 4w-bit file.

mod reference;

pub use reference::reference_eval;

use serde::{Deserialize, Serialize};

use crate::format::{copy_latency, GateKind, Instruction, Program};

/// Errors surfaced while evaluating a program.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VmError {
    #[error("program expects {expected} input bit(s), got {got}")]
    InputLengthMismatch { expected: u64, got: u64 },
    #[error(
        "instruction {index}: reads register {register}, which is locked while level {level} \
         writes it"
    )]
    LockedRegisterRead {
        index: u64,
        register: u64,
        level: u64,
    },
    #[error(
        "instruction {index}: reads register {register} at level {level}, but the copy into it \
         is ready at level {ready_at}"
    )]
    NotReadyRead {
        index: u64,
        register: u64,
        ready_at: u64,
        level: u64,
    },
    #[error("instruction {index}: reads uninitialized register {register}")]
    UninitializedRead { index: u64, register: u64 },
    #[error(
        "instruction {index}: COPY reaches {levels_back} level(s) back, but only {level} \
         level(s) have completed"
    )]
    PriorLevelUnderflow {
        index: u64,
        levels_back: u64,
        level: u64,
    },
    #[error(
        "instruction {index}: COPY reads extended-input word {word}, but the inputs occupy \
         only {have} word(s)"
    )]
    MissingInputWord { index: u64, word: u64, have: u64 },
    #[error("instruction {index}: operand value {value} is out of range")]
    OperandOutOfRange { index: u64, value: u64 },
    #[error("program completed {completed} level(s), but the outputs need {needed}")]
    OutputUnavailable { completed: u64, needed: u64 },
}

/// Which production evaluator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    Bytewise,
    Bitpacked,
}

impl EvaluatorKind {
    pub const ALL: [EvaluatorKind; 2] = [EvaluatorKind::Bytewise, EvaluatorKind::Bitpacked];

    pub fn name(self) -> &'static str {
        match self {
            EvaluatorKind::Bytewise => "bytewise",
            EvaluatorKind::Bitpacked => "bitpacked",
        }
    }
}

impl std::fmt::Display for EvaluatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EvaluatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bytewise" => Ok(EvaluatorKind::Bytewise),
            "bitpacked" => Ok(EvaluatorKind::Bitpacked),
            other => Err(format!(
                "unknown evaluator {other:?} (expected bytewise or bitpacked)"
            )),
        }
    }
}

/// Outcome of a complete run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationResult {
    /// The designated b output bits.
    pub outputs: Vec<bool>,
    /// Instructions executed, COPY instructions included; equals n on
    /// success.
    pub gates_executed: u64,
    /// Fully completed levels.
    pub levels_completed: u64,
}

/// Measured size of the mutable evaluation state, reported by
/// [`run_instrumented`]. Width-dependent only; main memory (which grows
/// with the level count) is deliberately excluded because it is
/// write-once output, not working registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateFootprint {
    /// Logical register count in bits: always 4w.
    pub register_bits: u64,
    /// Bytes actually allocated to back the register file.
    pub register_bytes: usize,
    /// Bytes allocated for availability tags (zero in unchecked mode).
    pub tag_bytes: usize,
}

/// Computes one gate. `inputs` holds `kind.arity()` values. MUX3 selects
/// its first operand when the third is 0, its second when 1.
pub fn eval_gate(kind: GateKind, inputs: &[bool]) -> bool {
    use GateKind::*;
    debug_assert_eq!(inputs.len(), kind.arity());
    match kind {
        Not => !inputs[0],
        And2 => inputs[0] & inputs[1],
        Or2 => inputs[0] | inputs[1],
        Nand2 => !(inputs[0] & inputs[1]),
        Nor2 => !(inputs[0] | inputs[1]),
        Xor2 => inputs[0] ^ inputs[1],
        Xnor2 => !(inputs[0] ^ inputs[1]),
        And3 => inputs[0] & inputs[1] & inputs[2],
        Or3 => inputs[0] | inputs[1] | inputs[2],
        Nand3 => !(inputs[0] & inputs[1] & inputs[2]),
        Nor3 => !(inputs[0] | inputs[1] | inputs[2]),
        Xor3 => inputs[0] ^ inputs[1] ^ inputs[2],
        Xnor3 => !(inputs[0] ^ inputs[1] ^ inputs[2]),
        Mux3 => {
            if inputs[2] {
                inputs[1]
            } else {
                inputs[0]
            }
        }
        Copy => unreachable!("COPY is not a gate"),
    }
}

trait RegisterStore {
    fn with_bits(bits: usize) -> Self;
    fn get(&self, index: usize) -> bool;
    fn set(&mut self, index: usize, value: bool);
    fn allocated_bytes(&self) -> usize;

    /// Packs `count` register bits starting at `start` into `dest`: bit
    /// `t` of the range lands in `dest[t / 64]` at position `t % 64`.
    /// Each destination word is overwritten, with unused high bits
    /// cleared. `dest` must hold exactly `count.div_ceil(64)` words.
    fn pack_into(&self, start: usize, count: usize, dest: &mut [u64]);
}

/// One byte per register bit.
struct ByteRegisters(Vec<u8>);

impl RegisterStore for ByteRegisters {
    fn with_bits(bits: usize) -> Self {
        ByteRegisters(vec![0; bits])
    }

    #[inline(always)]
    fn get(&self, index: usize) -> bool {
        self.0[index] != 0
    }

    #[inline(always)]
    fn set(&mut self, index: usize, value: bool) {
        self.0[index] = value as u8;
    }

    fn allocated_bytes(&self) -> usize {
        self.0.len()
    }

    #[inline(always)]
    fn pack_into(&self, start: usize, count: usize, dest: &mut [u64]) {
        let src = &self.0[start..start + count];
        // The registers were stored byte by byte moments ago, and a wide
        // load over stores still in flight stalls on store forwarding.
        // Old enough bytes are gathered eight at a time with a multiply;
        // the youngest tail is read byte by byte, which forwards cleanly.
        // Each destination word accumulates in a register and stores once.
        let split = count.saturating_sub(16) & !7;
        for (k, word) in dest.iter_mut().enumerate() {
            let lo = k * 64;
            let hi = (lo + 64).min(count);
            let mut acc = 0u64;
            let grouped_end = split.clamp(lo, hi);
            for (g, group) in src[lo..grouped_end].chunks_exact(8).enumerate() {
                let lanes = u64::from_le_bytes(group.try_into().unwrap());
                acc |= (lanes.wrapping_mul(0x0102_0408_1020_4080) >> 56) << (8 * g);
            }
            for (i, &b) in src[grouped_end..hi].iter().enumerate() {
                acc |= (b as u64) << (grouped_end - lo + i);
            }
            *word = acc;
        }
    }
}

/// 64 register bits per machine word.
struct PackedRegisters(Vec<u64>);

impl RegisterStore for PackedRegisters {
    fn with_bits(bits: usize) -> Self {
        PackedRegisters(vec![0; bits.div_ceil(64)])
    }

    #[inline(always)]
    fn get(&self, index: usize) -> bool {
        (self.0[index >> 6] >> (index & 63)) & 1 != 0
    }

    #[inline(always)]
    fn set(&mut self, index: usize, value: bool) {
        let mask = 1u64 << (index & 63);
        let word = &mut self.0[index >> 6];
        *word = (*word & !mask) | ((value as u64) << (index & 63));
    }

    fn allocated_bytes(&self) -> usize {
        self.0.len() * 8
    }

    #[inline(always)]
    fn pack_into(&self, start: usize, count: usize, dest: &mut [u64]) {
        let word0 = start >> 6;
        let shift = start & 63;
        for (k, word) in dest.iter_mut().enumerate() {
            let lo = self.0[word0 + k] >> shift;
            let hi = if shift == 0 {
                0
            } else {
                self.0.get(word0 + k + 1).copied().unwrap_or(0) << (64 - shift)
            };
            let mut v = lo | hi;
            // Clear neighboring register bits past the end of the range.
            let used = count - k * 64;
            if used < 64 {
                v &= (1u64 << used) - 1;
            }
            *word = v;
        }
    }
}

/// How much of the level history main memory keeps materialized.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Retention {
    /// Every committed word stays addressable; needed by the stepping
    /// machine, whose inspection API can ask for any past word.
    Full,
    /// Only the readable window of level words is kept: a copy reaches at
    /// most w levels back and the outputs are the trailing ceil(b/w)
    /// levels, so older words can never be observed again. Their slots
    /// are reused in a ring, which keeps the working set O(w) however
    /// long the program runs.
    Window,
}

/// Main memory: w-bit words stored packed, the input region first, then
/// one word per completed level (physically a bounded ring of level
/// slots under [`Retention::Window`]). Committing a level is a cursor
/// bump plus the O(w) pack, never an allocation; anything per level
/// beyond O(w) work would bias narrow-width timings, where levels are
/// short and frequent.
struct Memory {
    stride: usize,
    input_words: usize,
    /// Physical level slots available for reuse.
    ring_levels: usize,
    /// Physical slot of the next level commit, in `0..ring_levels`.
    cursor: usize,
    /// Model size: input words plus committed level words.
    committed: usize,
    words: Vec<u64>,
}

impl Memory {
    fn new(w: usize, input_words: usize, level_slots: usize) -> Memory {
        let stride = w.div_ceil(64);
        let ring_levels = level_slots.max(1);
        Memory {
            stride,
            input_words,
            ring_levels,
            cursor: 0,
            committed: input_words,
            words: vec![0; (input_words + ring_levels) * stride],
        }
    }

    fn word_count(&self) -> usize {
        self.committed
    }

    /// Physical slot of model word `word` (input region, then levels
    /// modulo the ring).
    #[inline(always)]
    fn slot(&self, word: usize) -> usize {
        if word < self.input_words {
            word
        } else {
            self.input_words + (word - self.input_words) % self.ring_levels
        }
    }

    /// The backing words of model word `word`, bit `t` at `t % 64` of
    /// entry `t / 64`.
    #[inline(always)]
    fn word(&self, word: usize) -> &[u64] {
        let base = self.slot(word) * self.stride;
        &self.words[base..base + self.stride]
    }

    fn bit(&self, word: usize, offset: usize) -> bool {
        (self.word(word)[offset >> 6] >> (offset & 63)) & 1 != 0
    }

    fn set_input_bit(&mut self, word: usize, offset: usize) {
        self.words[word * self.stride + (offset >> 6)] |= 1 << (offset & 63);
    }

    /// Commits the next level word and hands back its backing slice; the
    /// caller overwrites it wholesale.
    #[inline(always)]
    fn commit_word(&mut self) -> &mut [u64] {
        let base = (self.input_words + self.cursor) * self.stride;
        self.cursor += 1;
        if self.cursor == self.ring_levels {
            self.cursor = 0;
        }
        self.committed += 1;
        &mut self.words[base..base + self.stride]
    }
}

const TAG_UNSET: u64 = u64::MAX;

/// The shared evaluation engine. `CHECKED` selects availability
/// enforcement; when false, the caller must have validated the program
/// (feeding an invalid program may panic on an out-of-bounds access).
struct Core<'p, R: RegisterStore, const CHECKED: bool> {
    program: &'p Program,
    w: usize,
    latency: u64,
    regs: R,
    /// Ready levels per register; TAG_UNSET marks uninitialized or locked.
    /// Empty in unchecked mode.
    tags: Vec<u64>,
    mem: Memory,
    input_words: usize,
    pi: usize,
    pc: usize,
    pr: usize,
    level: u64,
    noncopy_in_level: usize,
    executed: u64,
    index: usize,
}

impl<'p, R: RegisterStore, const CHECKED: bool> Core<'p, R, CHECKED> {
    fn init(program: &'p Program, inputs: &[bool], retention: Retention) -> Result<Self, VmError> {
        let header = program.header();
        if inputs.len() as u64 != header.a {
            return Err(VmError::InputLengthMismatch {
                expected: header.a,
                got: inputs.len() as u64,
            });
        }
        let w = header.w as usize;
        let input_words = header.input_words() as usize;

        let level_count = program.level_count() as usize;
        let level_slots = match retention {
            Retention::Full => level_count,
            Retention::Window => {
                let needed = (header.b as usize).div_ceil(w);
                (w.max(needed) + 1).min(level_count)
            }
        };
        let mut mem = Memory::new(w, input_words, level_slots);
        for (i, &bit) in inputs.iter().enumerate() {
            if bit {
                mem.set_input_bit(i / w, i % w);
            }
        }

        // The implicit initial load: input word 0 (zero-padded, or all
        // zeros when there are no inputs) fills the input queue with no
        // latency.
        let mut regs = R::with_bits(4 * w);
        for (i, &bit) in inputs.iter().take(w).enumerate() {
            regs.set(i, bit);
        }
        let mut tags = Vec::new();
        if CHECKED {
            tags = vec![TAG_UNSET; 4 * w];
            for tag in &mut tags[..w] {
                *tag = 0;
            }
        }

        Ok(Core {
            program,
            w,
            latency: copy_latency(header.w),
            regs,
            tags,
            mem,
            input_words,
            pi: 0,
            pc: 0,
            pr: 0,
            level: 0,
            noncopy_in_level: 0,
            executed: 0,
            index: 0,
        })
    }

    #[cold]
    fn classify_gate_read(&self, register: usize, tag: u64) -> VmError {
        let index = self.index as u64;
        let register_u = register as u64;
        if register >= 2 * self.w {
            let half = ((register - 2 * self.w) / self.w) as u64;
            if half == self.level % 2 {
                VmError::LockedRegisterRead {
                    index,
                    register: register_u,
                    level: self.level,
                }
            } else {
                VmError::UninitializedRead {
                    index,
                    register: register_u,
                }
            }
        } else if tag == TAG_UNSET {
            VmError::UninitializedRead {
                index,
                register: register_u,
            }
        } else {
            VmError::NotReadyRead {
                index,
                register: register_u,
                ready_at: tag,
                level: self.level,
            }
        }
    }

    fn exec(&mut self, instr: Instruction) -> Result<(), VmError> {
        let w = self.w;
        let kind = instr.kind();
        if kind == GateKind::Copy {
            let ops = instr.operands();
            let (word, count, start) = (ops[0] as usize, ops[1] as usize, ops[2] as usize);
            if CHECKED && (word >= 2 * w || count == 0 || count > w || start + count > w) {
                return Err(VmError::OperandOutOfRange {
                    index: self.index as u64,
                    value: ops[0] as u64,
                });
            }
            let mem_word = if word < w {
                if word >= self.input_words {
                    return Err(VmError::MissingInputWord {
                        index: self.index as u64,
                        word: word as u64,
                        have: self.input_words as u64,
                    });
                }
                word
            } else {
                let levels_back = (word - w + 1) as u64;
                if levels_back > self.level {
                    return Err(VmError::PriorLevelUnderflow {
                        index: self.index as u64,
                        levels_back,
                        level: self.level,
                    });
                }
                self.input_words + (self.level - levels_back) as usize
            };
            let (base, cursor) = if word < w { (0, self.pi) } else { (w, self.pc) };
            let ready = self.level + self.latency;
            let src = self.mem.word(mem_word);
            let mut slot = cursor;
            for t in 0..count {
                let offset = start + t;
                let bit = (src[offset >> 6] >> (offset & 63)) & 1 != 0;
                self.regs.set(base + slot, bit);
                if CHECKED {
                    self.tags[base + slot] = ready;
                }
                slot += 1;
                if slot == w {
                    slot = 0;
                }
            }
            if word < w {
                self.pi = slot;
            } else {
                self.pc = slot;
            }
        } else {
            let ops = instr.operands();
            let mut vals = [false; 3];
            for (v, &r) in vals.iter_mut().zip(ops.iter()) {
                let r = r as usize;
                if CHECKED {
                    if r >= 4 * w {
                        return Err(VmError::OperandOutOfRange {
                            index: self.index as u64,
                            value: r as u64,
                        });
                    }
                    let tag = self.tags[r];
                    if tag > self.level {
                        return Err(self.classify_gate_read(r, tag));
                    }
                }
                *v = self.regs.get(r);
            }
            let out = eval_gate(kind, &vals[..ops.len()]);
            self.regs.set(2 * w + self.pr, out);
            self.pr += 1;
            if self.pr == 2 * w {
                self.pr = 0;
            }
            self.noncopy_in_level += 1;
            if self.noncopy_in_level == w {
                self.complete_level();
            }
        }
        self.executed += 1;
        self.index += 1;
        Ok(())
    }

    #[inline(always)]
    fn complete_level(&mut self) {
        let w = self.w;
        let half = (self.level % 2) as usize;
        let base_reg = 2 * w + half * w;
        self.regs.pack_into(base_reg, w, self.mem.commit_word());
        if CHECKED {
            let ready = self.level + 1;
            let other = 2 * w + (1 - half) * w;
            self.tags[base_reg..base_reg + w].fill(ready);
            self.tags[other..other + w].fill(TAG_UNSET);
        }
        self.level += 1;
        self.noncopy_in_level = 0;
    }

    fn step_next(&mut self) -> Result<bool, VmError> {
        if self.index >= self.program.instructions().len() {
            return Ok(false);
        }
        let instr = self.program.instructions()[self.index];
        self.exec(instr)?;
        Ok(true)
    }

    fn footprint(&self) -> StateFootprint {
        StateFootprint {
            register_bits: 4 * self.w as u64,
            register_bytes: self.regs.allocated_bytes(),
            tag_bytes: self.tags.len() * 8,
        }
    }

    fn finish(self) -> Result<EvaluationResult, VmError> {
        let b = self.program.header().b as usize;
        let w = self.w;
        let needed = b.div_ceil(w);
        if (self.level as usize) < needed {
            return Err(VmError::OutputUnavailable {
                completed: self.level,
                needed: needed as u64,
            });
        }
        let first = self.input_words + self.level as usize - needed;
        let mut outputs = Vec::with_capacity(b);
        for wi in 0..needed {
            let src = self.mem.word(first + wi);
            let take = (b - wi * w).min(w);
            for t in 0..take {
                outputs.push((src[t >> 6] >> (t & 63)) & 1 != 0);
            }
        }
        Ok(EvaluationResult {
            outputs,
            gates_executed: self.executed,
            levels_completed: self.level,
        })
    }
}

fn drive<R: RegisterStore, const CHECKED: bool>(
    program: &Program,
    inputs: &[bool],
) -> Result<(EvaluationResult, StateFootprint), VmError> {
    let mut core: Core<'_, R, CHECKED> = Core::init(program, inputs, Retention::Window)?;
    for &instr in program.instructions() {
        core.exec(instr)?;
    }
    let footprint = core.footprint();
    Ok((core.finish()?, footprint))
}

/// Runs the whole program with availability checking.
pub fn run(
    program: &Program,
    inputs: &[bool],
    kind: EvaluatorKind,
) -> Result<EvaluationResult, VmError> {
    run_instrumented(program, inputs, kind).map(|(result, _)| result)
}

/// [`run`] plus a report of the allocated register state.
pub fn run_instrumented(
    program: &Program,
    inputs: &[bool],
    kind: EvaluatorKind,
) -> Result<(EvaluationResult, StateFootprint), VmError> {
    match kind {
        EvaluatorKind::Bytewise => drive::<ByteRegisters, true>(program, inputs),
        EvaluatorKind::Bitpacked => drive::<PackedRegisters, true>(program, inputs),
    }
}

/// Evaluation with availability checks compiled out, for benchmarking
/// programs that already validate clean. May panic on an out-of-bounds
/// access if the program is invalid.
pub fn run_unchecked(
    program: &Program,
    inputs: &[bool],
    kind: EvaluatorKind,
) -> Result<EvaluationResult, VmError> {
    match kind {
        EvaluatorKind::Bytewise => {
            drive::<ByteRegisters, false>(program, inputs).map(|(result, _)| result)
        }
        EvaluatorKind::Bitpacked => {
            drive::<PackedRegisters, false>(program, inputs).map(|(result, _)| result)
        }
    }
}

/// A single-stepping, inspectable evaluator (bytewise storage, checks
/// on), for walking a program instruction by instruction.
pub struct Machine<'p> {
    core: Core<'p, ByteRegisters, true>,
}

impl<'p> Machine<'p> {
    pub fn init(program: &'p Program, inputs: &[bool]) -> Result<Machine<'p>, VmError> {
        Ok(Machine {
            core: Core::init(program, inputs, Retention::Full)?,
        })
    }

    /// Executes the next instruction. `Ok(false)` means the program is
    /// exhausted.
    pub fn step(&mut self) -> Result<bool, VmError> {
        self.core.step_next()
    }

    /// Runs the remaining instructions and extracts the outputs.
    pub fn finish(mut self) -> Result<EvaluationResult, VmError> {
        while self.core.step_next()? {}
        self.core.finish()
    }

    /// Index of the next instruction to execute.
    pub fn instruction_index(&self) -> usize {
        self.core.index
    }

    /// Completed levels so far.
    pub fn level(&self) -> u64 {
        self.core.level
    }

    pub fn pi(&self) -> usize {
        self.core.pi
    }

    pub fn pc(&self) -> usize {
        self.core.pc
    }

    pub fn pr(&self) -> usize {
        self.core.pr
    }

    /// Words currently in main memory (input region plus completed
    /// levels).
    pub fn memory_words(&self) -> usize {
        self.core.mem.word_count()
    }

    /// Bits of main-memory word `index`, input region first.
    pub fn memory_word(&self, index: usize) -> Vec<bool> {
        (0..self.core.w)
            .map(|t| self.core.mem.bit(index, t))
            .collect()
    }

    fn queue(&self, base: usize) -> Vec<bool> {
        (0..self.core.w).map(|i| self.core.regs.get(base + i)).collect()
    }

    /// Raw input-queue bits. Values are meaningful only where
    /// [`Machine::ready_at`] allows a read.
    pub fn input_queue(&self) -> Vec<bool> {
        self.queue(0)
    }

    pub fn copy_queue(&self) -> Vec<bool> {
        self.queue(self.core.w)
    }

    /// Both result-queue halves, 2w bits.
    pub fn result_queue(&self) -> Vec<bool> {
        (0..2 * self.core.w)
            .map(|i| self.core.regs.get(2 * self.core.w + i))
            .collect()
    }

    /// The level at which `register` becomes readable, or `None` while it
    /// is uninitialized or locked.
    pub fn ready_at(&self, register: u64) -> Option<u64> {
        match self.core.tags.get(register as usize) {
            Some(&TAG_UNSET) | None => None,
            Some(&tag) => Some(tag),
        }
    }
}
