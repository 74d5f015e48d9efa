//! The BPW container format, version 0x01.
//!
//! File layout:
//!
//! ```text
//! offset  size  field
//! ------  ----  -----------------------------------------
//!      0     3  magic bytes 0x42 0x50 0x57 ("BPW")
//!      3     1  version byte, 0x01
//!      4     8  w  program width          (u64 little-endian)
//!     12     8  n  instruction count      (u64 little-endian)
//!     20     8  a  circuit input count    (u64 little-endian)
//!     28     8  b  circuit output count   (u64 little-endian)
//!     36     -  instruction body, a packed nibble stream
//! ```
//!
//! Each instruction is one type nibble followed by `arity`
//! register-specifier fields of [`specifier_nibble_length`]`(w)` nibbles
//! each, most significant nibble first. Nibbles pack high-first into bytes;
//! a final odd nibble is padded with 0x0.
//!
//! Register specifiers address a 4w-bit register file:
//!
//! ```text
//! 0      .. w-1    input queue
//! w      .. 2w-1   copy queue
//! 2w     .. 4w-1   result queue (two w-bit halves, written alternately)
//! ```

mod validate;

pub use validate::{
    copy_latency, validate, RegisterAvailability, Rule, Unavailable, ValidationReport, Violation,
};

use std::fmt;

/// Magic bytes at the start of every `.bpw` file.
pub const MAGIC: [u8; 3] = [0x42, 0x50, 0x57];
/// The only container version this crate reads and writes.
pub const VERSION: u8 = 0x01;
/// Byte length of the fixed header.
pub const HEADER_LEN: usize = 36;
/// Largest supported width. Register specifiers are kept in `u32`, and the
/// register file and validator bookkeeping (each proportional to w) must
/// stay allocatable even for a hostile 42-byte file, so widths are capped
/// far below the u64 range the header field could express.
pub const MAX_WIDTH: u64 = 1 << 24;

/// Errors raised while reading or writing the container format.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic bytes (expected 42 50 57)")]
    BadMagic,
    #[error("unsupported container version 0x{0:02x}")]
    UnsupportedVersion(u8),
    #[error("header bound violation: {0}")]
    HeaderBoundViolation(String),
    #[error("file truncated: {0}")]
    Truncated(String),
    #[error("instruction {index}: reserved gate type nibble 0xF")]
    ReservedGateKind { index: u64 },
    #[error("instruction {index}: operand {operand} value {value} out of range ({limit})")]
    OperandOutOfRange {
        index: u64,
        operand: usize,
        value: u64,
        limit: String,
    },
    #[error("trailing data after instruction body: {0}")]
    TrailingData(String),
    #[error("gate kind {kind:?} takes {expected} operands, got {got}")]
    ArityMismatch {
        kind: GateKind,
        expected: usize,
        got: usize,
    },
}

/// Gate types, one per type nibble. Value 0xF is reserved and rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum GateKind {
    Not = 0x0,
    And2 = 0x1,
    Or2 = 0x2,
    Nand2 = 0x3,
    Nor2 = 0x4,
    Xor2 = 0x5,
    Xnor2 = 0x6,
    And3 = 0x7,
    Or3 = 0x8,
    Nand3 = 0x9,
    Nor3 = 0xA,
    Xor3 = 0xB,
    Xnor3 = 0xC,
    Mux3 = 0xD,
    Copy = 0xE,
}

impl GateKind {
    /// Decodes a type nibble. Returns `None` for the reserved value 0xF
    /// (and anything above a nibble).
    pub fn from_nibble(nibble: u8) -> Option<GateKind> {
        use GateKind::*;
        Some(match nibble {
            0x0 => Not,
            0x1 => And2,
            0x2 => Or2,
            0x3 => Nand2,
            0x4 => Nor2,
            0x5 => Xor2,
            0x6 => Xnor2,
            0x7 => And3,
            0x8 => Or3,
            0x9 => Nand3,
            0xA => Nor3,
            0xB => Xor3,
            0xC => Xnor3,
            0xD => Mux3,
            0xE => Copy,
            _ => return None,
        })
    }

    /// The type nibble this kind encodes to.
    pub fn nibble(self) -> u8 {
        self as u8
    }

    /// Number of operand fields the instruction carries.
    pub fn arity(self) -> usize {
        use GateKind::*;
        match self {
            Not => 1,
            And2 | Or2 | Nand2 | Nor2 | Xor2 | Xnor2 => 2,
            And3 | Or3 | Nand3 | Nor3 | Xor3 | Xnor3 | Mux3 | Copy => 3,
        }
    }

    /// Assembly mnemonic used by the disassembler.
    pub fn mnemonic(self) -> &'static str {
        use GateKind::*;
        match self {
            Not => "NOT",
            And2 => "AND2",
            Or2 => "OR2",
            Nand2 => "NAND2",
            Nor2 => "NOR2",
            Xor2 => "XOR2",
            Xnor2 => "XNOR2",
            And3 => "AND3",
            Or3 => "OR3",
            Nand3 => "NAND3",
            Nor3 => "NOR3",
            Xor3 => "XOR3",
            Xnor3 => "XNOR3",
            Mux3 => "MUX3",
            Copy => "COPY",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// Fixed-size file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    /// Program width: gates per level, registers per queue.
    pub w: u64,
    /// Instruction count, COPY instructions included.
    pub n: u64,
    /// Circuit input bit count, at most w².
    pub a: u64,
    /// Circuit output bit count, at most w².
    pub b: u64,
}

impl Header {
    /// Number of w-bit words the inputs occupy in main memory.
    pub fn input_words(&self) -> u64 {
        self.a.div_ceil(self.w)
    }

    fn check(&self) -> Result<(), FormatError> {
        let bound = |what: &str, v: u64| -> Result<(), FormatError> {
            let sq = (self.w as u128) * (self.w as u128);
            if (v as u128) > sq {
                return Err(FormatError::HeaderBoundViolation(format!(
                    "{what} = {v} exceeds w^2 = {sq}"
                )));
            }
            Ok(())
        };
        if self.w == 0 {
            return Err(FormatError::HeaderBoundViolation("w must be >= 1".into()));
        }
        if self.w > MAX_WIDTH {
            return Err(FormatError::HeaderBoundViolation(format!(
                "w = {} exceeds the supported maximum {MAX_WIDTH}",
                self.w
            )));
        }
        if self.n == 0 {
            return Err(FormatError::HeaderBoundViolation("n must be >= 1".into()));
        }
        bound("a", self.a)?;
        bound("b", self.b)?;
        Ok(())
    }
}

/// One decoded instruction. Unused operand slots are always zero, so
/// derived equality matches semantic equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instruction {
    kind: GateKind,
    operands: [u32; 3],
}

impl Instruction {
    /// Builds an instruction, checking that the operand count matches the
    /// gate's arity. Operand range checks against a width happen at
    /// serialization, parsing, and validation time.
    pub fn new(kind: GateKind, operands: &[u32]) -> Result<Instruction, FormatError> {
        if operands.len() != kind.arity() {
            return Err(FormatError::ArityMismatch {
                kind,
                expected: kind.arity(),
                got: operands.len(),
            });
        }
        let mut ops = [0u32; 3];
        ops[..operands.len()].copy_from_slice(operands);
        Ok(Instruction {
            kind,
            operands: ops,
        })
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    /// The populated operand fields, `arity` of them.
    pub fn operands(&self) -> &[u32] {
        &self.operands[..self.kind.arity()]
    }
}

/// A parsed program: header plus decoded instruction list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    header: Header,
    instructions: Vec<Instruction>,
    /// Non-COPY instruction count, cached at construction so evaluators
    /// can size their memory arena without a pass over the program.
    gates: u64,
}

fn count_gates(instructions: &[Instruction]) -> u64 {
    instructions
        .iter()
        .filter(|i| i.kind() != GateKind::Copy)
        .count() as u64
}

impl Program {
    /// Assembles a program from parts. `n` is taken from the instruction
    /// count. Header bounds are enforced; per-operand range checks happen
    /// at serialization or validation.
    pub fn new(
        w: u64,
        a: u64,
        b: u64,
        instructions: Vec<Instruction>,
    ) -> Result<Program, FormatError> {
        let header = Header {
            w,
            n: instructions.len() as u64,
            a,
            b,
        };
        header.check()?;
        let gates = count_gates(&instructions);
        Ok(Program {
            header,
            instructions,
            gates,
        })
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    /// Count of non-COPY instructions, i.e. gate evaluations.
    pub fn gate_count(&self) -> u64 {
        self.gates
    }

    /// Number of complete levels the program executes (groups of w
    /// non-COPY instructions).
    pub fn level_count(&self) -> u64 {
        self.gates / self.header.w
    }
}

/// Nibble count of one register-specifier field at width `w`: the fewest
/// nibbles that can express every register index `0 ..= 4w-1`.
pub fn specifier_nibble_length(w: u64) -> u32 {
    debug_assert!(w >= 1);
    let max = 4 * w - 1;
    let bits = 64 - max.leading_zeros();
    bits.div_ceil(4)
}

struct NibbleReader<'a> {
    body: &'a [u8],
    pos: usize,
}

impl<'a> NibbleReader<'a> {
    fn new(body: &'a [u8]) -> Self {
        NibbleReader { body, pos: 0 }
    }

    fn next(&mut self) -> Option<u8> {
        let byte = *self.body.get(self.pos / 2)?;
        let nib = if self.pos % 2 == 0 {
            byte >> 4
        } else {
            byte & 0x0F
        };
        self.pos += 1;
        Some(nib)
    }

    fn remaining(&self) -> usize {
        self.body.len() * 2 - self.pos
    }
}

struct NibbleWriter {
    out: Vec<u8>,
    half: bool,
}

impl NibbleWriter {
    fn with_header(header: Vec<u8>) -> Self {
        NibbleWriter {
            out: header,
            half: false,
        }
    }

    fn push(&mut self, nibble: u8) {
        debug_assert!(nibble <= 0xF);
        if self.half {
            *self.out.last_mut().unwrap() |= nibble;
        } else {
            self.out.push(nibble << 4);
        }
        self.half = !self.half;
    }

    fn finish(self) -> Vec<u8> {
        self.out
    }
}

/// Operand range rules shared by `parse` and `serialize`.
fn check_operands(
    index: u64,
    kind: GateKind,
    operands: &[u64],
    w: u64,
) -> Result<(), FormatError> {
    let err = |operand: usize, value: u64, limit: String| FormatError::OperandOutOfRange {
        index,
        operand,
        value,
        limit,
    };
    if kind == GateKind::Copy {
        let (word, count, start) = (operands[0], operands[1], operands[2]);
        if word >= 2 * w {
            return Err(err(0, word, format!("COPY source must be < 2w = {}", 2 * w)));
        }
        if count == 0 || count > w {
            return Err(err(1, count, format!("COPY count must be in 1..={w}")));
        }
        if start >= w {
            return Err(err(2, start, format!("COPY start must be < w = {w}")));
        }
        if count + start > w {
            return Err(err(
                2,
                start,
                format!("COPY count {count} + start {start} must be <= w = {w}"),
            ));
        }
    } else {
        for (i, &value) in operands.iter().enumerate() {
            if value >= 4 * w {
                return Err(err(
                    i,
                    value,
                    format!("register specifier must be < 4w = {}", 4 * w),
                ));
            }
        }
    }
    Ok(())
}

/// Decodes a `.bpw` file. The accepted byte string is exactly the one
/// `serialize` produces for the returned program, so
/// `serialize(&parse(bytes)?)` reproduces `bytes` bit for bit.
pub fn parse(bytes: &[u8]) -> Result<Program, FormatError> {
    if bytes.len() >= 3 && bytes[..3] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    if bytes.len() >= 4 && bytes[3] != VERSION {
        return Err(FormatError::UnsupportedVersion(bytes[3]));
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    let field = |i: usize| {
        let mut raw = [0u8; 8];
        raw.copy_from_slice(&bytes[4 + 8 * i..12 + 8 * i]);
        u64::from_le_bytes(raw)
    };
    let header = Header {
        w: field(0),
        n: field(1),
        a: field(2),
        b: field(3),
    };
    header.check()?;

    let spec_len = specifier_nibble_length(header.w);
    let body = &bytes[HEADER_LEN..];
    let mut reader = NibbleReader::new(body);
    // Shortest possible instruction is a NOT: 1 type nibble + 1 specifier.
    // Capping the preallocation by what the body could possibly hold keeps
    // a hostile header from forcing a huge allocation.
    let min_instr_nibbles = 1 + spec_len as usize;
    let cap = (header.n as usize).min(reader.remaining() / min_instr_nibbles + 1);
    let mut instructions = Vec::with_capacity(cap);

    for index in 0..header.n {
        let truncated = || {
            FormatError::Truncated(format!(
                "body ends inside instruction {index} of {}",
                header.n
            ))
        };
        let kind_nib = reader.next().ok_or_else(truncated)?;
        let kind = GateKind::from_nibble(kind_nib)
            .ok_or(FormatError::ReservedGateKind { index })?;
        let mut operands = [0u64; 3];
        for op in operands.iter_mut().take(kind.arity()) {
            let mut value: u64 = 0;
            for _ in 0..spec_len {
                value = (value << 4) | reader.next().ok_or_else(truncated)? as u64;
            }
            *op = value;
        }
        check_operands(index, kind, &operands[..kind.arity()], header.w)?;
        let mut ops32 = [0u32; 3];
        for (dst, src) in ops32.iter_mut().zip(operands.iter()) {
            *dst = *src as u32;
        }
        instructions.push(Instruction {
            kind,
            operands: ops32,
        });
    }

    if reader.pos % 2 == 1 {
        let pad = reader.next().unwrap();
        if pad != 0 {
            return Err(FormatError::TrailingData(format!(
                "padding nibble must be 0x0, found 0x{pad:x}"
            )));
        }
    }
    if reader.remaining() > 0 {
        return Err(FormatError::TrailingData(format!(
            "{} unread byte(s) after the last instruction",
            reader.remaining() / 2
        )));
    }

    let gates = count_gates(&instructions);
    Ok(Program {
        header,
        instructions,
        gates,
    })
}

/// Encodes a program to the `.bpw` byte layout.
pub fn serialize(program: &Program) -> Result<Vec<u8>, FormatError> {
    let header = program.header;
    header.check()?;
    if header.n != program.instructions.len() as u64 {
        return Err(FormatError::HeaderBoundViolation(format!(
            "header n = {} but program holds {} instructions",
            header.n,
            program.instructions.len()
        )));
    }
    let spec_len = specifier_nibble_length(header.w);

    let mut head = Vec::with_capacity(HEADER_LEN + program.instructions.len());
    head.extend_from_slice(&MAGIC);
    head.push(VERSION);
    for v in [header.w, header.n, header.a, header.b] {
        head.extend_from_slice(&v.to_le_bytes());
    }

    let mut writer = NibbleWriter::with_header(head);
    for (index, instr) in program.instructions.iter().enumerate() {
        let ops: Vec<u64> = instr.operands().iter().map(|&v| v as u64).collect();
        check_operands(index as u64, instr.kind, &ops, header.w)?;
        writer.push(instr.kind.nibble());
        for &value in &ops {
            for s in (0..spec_len).rev() {
                writer.push(((value >> (4 * s)) & 0xF) as u8);
            }
        }
    }
    Ok(writer.finish())
}

/// Renders up to `limit` instructions (all of them if `None`) as one line
/// each: index, level, mnemonic, operands, and a COPY source annotation.
pub fn disassemble(program: &Program, limit: Option<usize>) -> String {
    use fmt::Write;
    let w = program.header.w;
    let take = limit.unwrap_or(usize::MAX).min(program.instructions.len());
    let mut out = String::new();
    let mut noncopy: u64 = 0;
    for (index, instr) in program.instructions.iter().take(take).enumerate() {
        let level = noncopy / w;
        write!(out, "{index} L{level} {}", instr.kind.mnemonic()).unwrap();
        for &op in instr.operands() {
            write!(out, " {op}").unwrap();
        }
        if instr.kind == GateKind::Copy {
            let [word, count, start] = [
                instr.operands[0] as u64,
                instr.operands[1] as u64,
                instr.operands[2] as u64,
            ];
            let bits = if count == 1 { "bit" } else { "bits" };
            if word < w {
                write!(
                    out,
                    " ; extended-input word {word}, {count} {bits} from offset {start}"
                )
                .unwrap();
            } else {
                let back = word - w + 1;
                let levels = if back == 1 { "level" } else { "levels" };
                write!(
                    out,
                    " ; prior-result {back} {levels} back, {count} {bits} from offset {start}"
                )
                .unwrap();
            }
        } else {
            noncopy += 1;
        }
        out.push('\n');
    }
    out
}
