//! Static validation of BPW programs.
//!
//! The validator replays the program's register-availability bookkeeping
//! without computing any values and reports every rule breach it finds:
//!
//! - R1: COPY instructions closer than w instructions apart
//! - R2: a gate reads a COPY-written register before its completion level
//! - R3: a gate or COPY references an unavailable resource (uninitialized
//!   or locked register, missing input word, out-of-range specifier)
//! - R4: a prior-result COPY reaches back past level 0
//! - R5: the non-COPY instruction count is not a positive multiple of w
//!
//! R5 is reported but tolerated by default; strict consumers treat it as a
//! failure like the rest.

use std::fmt;

use super::{GateKind, Header, Program};

/// Levels a COPY's data stays in flight before the written registers
/// become readable: the square root of the width, rounded up.
pub fn copy_latency(w: u64) -> u64 {
    let mut s = (w as f64).sqrt() as u64;
    while s * s < w {
        s += 1;
    }
    while s > 0 && (s - 1) * (s - 1) >= w {
        s -= 1;
    }
    s
}

/// Why a register or memory word cannot be used right now.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unavailable {
    /// The register sits in the result-queue half the current level is
    /// writing.
    Locked { register: u64 },
    /// The register was written by a COPY that has not completed yet.
    NotReady {
        register: u64,
        ready_at: u64,
        level: u64,
    },
    /// Nothing has ever written the register (or, at level 0, the result
    /// queue holds nothing yet).
    Uninitialized { register: u64 },
    /// A prior-result COPY reaches back before the first completed level.
    PriorLevelUnderflow { levels_back: u64, level: u64 },
    /// An extended-input COPY names a word past the input region.
    MissingInputWord { word: u64, have: u64 },
    /// The specifier does not address the 4w-bit register file at all.
    OutOfRange { register: u64 },
}

/// Register-availability bookkeeping shared by the validator and the
/// workload generators: which registers a gate may read at the current
/// level, and which memory words a COPY may name. Tracks no values.
#[derive(Debug, Clone)]
pub struct RegisterAvailability {
    w: u64,
    latency: u64,
    input_words: u64,
    /// Ready levels for the input queue (0..w) and copy queue (w..2w).
    /// `u64::MAX` marks a register no COPY has ever written.
    ready: Vec<u64>,
    pi: u64,
    pc: u64,
    level: u64,
    noncopy_in_level: u64,
}

impl RegisterAvailability {
    pub fn new(header: &Header) -> RegisterAvailability {
        let w = header.w;
        let mut ready = vec![u64::MAX; 2 * w as usize];
        // The implicit initial load fills the input queue with input
        // word 0 before execution starts, with no latency.
        for slot in &mut ready[..w as usize] {
            *slot = 0;
        }
        RegisterAvailability {
            w,
            latency: copy_latency(w),
            input_words: header.input_words(),
            ready,
            pi: 0,
            pc: 0,
            level: 0,
            noncopy_in_level: 0,
        }
    }

    pub fn width(&self) -> u64 {
        self.w
    }

    /// Current level: completed groups of w non-COPY instructions.
    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn latency(&self) -> u64 {
        self.latency
    }

    /// May a gate executed now read `register`?
    pub fn gate_read(&self, register: u64) -> Result<(), Unavailable> {
        let w = self.w;
        if register < 2 * w {
            match self.ready[register as usize] {
                u64::MAX => Err(Unavailable::Uninitialized { register }),
                ready if ready > self.level => Err(Unavailable::NotReady {
                    register,
                    ready_at: ready,
                    level: self.level,
                }),
                _ => Ok(()),
            }
        } else if register < 4 * w {
            let half = (register - 2 * w) / w;
            if half == self.level % 2 {
                Err(Unavailable::Locked { register })
            } else if self.level == 0 {
                Err(Unavailable::Uninitialized { register })
            } else {
                Ok(())
            }
        } else {
            Err(Unavailable::OutOfRange { register })
        }
    }

    /// May a COPY issued now read the memory word `selector` names?
    /// Selectors below w name extended-input words; w..2w name completed
    /// levels, most recent first.
    pub fn copy_source(&self, selector: u64) -> Result<(), Unavailable> {
        if selector < self.w {
            if selector >= self.input_words {
                Err(Unavailable::MissingInputWord {
                    word: selector,
                    have: self.input_words,
                })
            } else {
                Ok(())
            }
        } else if selector < 2 * self.w {
            let levels_back = selector - self.w + 1;
            if levels_back > self.level {
                Err(Unavailable::PriorLevelUnderflow {
                    levels_back,
                    level: self.level,
                })
            } else {
                Ok(())
            }
        } else {
            Err(Unavailable::OutOfRange { register: selector })
        }
    }

    /// Records a COPY of `count` bits into the input queue (`extended`)
    /// or the copy queue, advancing the queue cursor and stamping the
    /// written registers with their completion level.
    pub fn record_copy(&mut self, extended: bool, count: u64) {
        let ready = self.level + self.latency;
        let count = count.min(self.w);
        let (base, cursor) = if extended {
            (0, &mut self.pi)
        } else {
            (self.w, &mut self.pc)
        };
        for t in 0..count {
            let slot = (*cursor + t) % self.w;
            self.ready[(base + slot) as usize] = ready;
        }
        *cursor = (*cursor + count) % self.w;
    }

    /// Records one executed gate, advancing the level when the current
    /// group of w completes.
    pub fn record_gate(&mut self) {
        self.noncopy_in_level += 1;
        if self.noncopy_in_level == self.w {
            self.noncopy_in_level = 0;
            self.level += 1;
        }
    }
}

/// Validation rules. `Display` renders the short rule id (R1..R5).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    CopySpacing,
    CopyLatency,
    RegisterUnavailable,
    PriorResultUnderflow,
    LevelCompleteness,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::CopySpacing => "R1",
            Rule::CopyLatency => "R2",
            Rule::RegisterUnavailable => "R3",
            Rule::PriorResultUnderflow => "R4",
            Rule::LevelCompleteness => "R5",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// One rule breach. `index` is the offending instruction, or `None` for
/// whole-program findings (R5).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: Option<u64>,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(index) => write!(f, "{} at instruction {index}: {}", self.rule, self.message),
            None => write!(f, "{}: {}", self.rule, self.message),
        }
    }
}

/// Everything the validator found, in instruction order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    findings: Vec<Violation>,
}

impl ValidationReport {
    pub fn findings(&self) -> &[Violation] {
        &self.findings
    }

    /// Clean under the default reading: level completeness (R5) is only a
    /// warning.
    pub fn is_clean(&self) -> bool {
        self.findings
            .iter()
            .all(|v| v.rule == Rule::LevelCompleteness)
    }

    /// Clean under the strict reading: no findings at all.
    pub fn is_clean_strict(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            return writeln!(f, "clean: no findings");
        }
        for v in &self.findings {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Replays the whole program, collecting every finding rather than
/// stopping at the first. After a breach the replay continues on a
/// best-effort basis so later findings still surface.
pub fn validate(program: &Program) -> ValidationReport {
    let header = *program.header();
    let w = header.w;
    let mut avail = RegisterAvailability::new(&header);
    let mut findings = Vec::new();
    let mut last_copy: Option<u64> = None;

    for (index, instr) in program.instructions().iter().enumerate() {
        let index = index as u64;
        let level = avail.level();
        if instr.kind() == GateKind::Copy {
            if let Some(prev) = last_copy {
                let gap = index - prev;
                if gap < w {
                    findings.push(Violation {
                        index: Some(index),
                        rule: Rule::CopySpacing,
                        message: format!(
                            "COPY follows the COPY at instruction {prev} after only {gap} \
                             instruction(s); minimum spacing is w = {w}"
                        ),
                    });
                }
            }
            last_copy = Some(index);

            let ops = instr.operands();
            let (word, count, start) = (ops[0] as u64, ops[1] as u64, ops[2] as u64);
            if count == 0 || count > w || start >= w || count + start > w {
                findings.push(Violation {
                    index: Some(index),
                    rule: Rule::RegisterUnavailable,
                    message: format!(
                        "COPY count {count} / start {start} do not fit a {w}-bit word"
                    ),
                });
            }
            match avail.copy_source(word) {
                Ok(()) => {}
                Err(Unavailable::PriorLevelUnderflow { levels_back, level }) => {
                    findings.push(Violation {
                        index: Some(index),
                        rule: Rule::PriorResultUnderflow,
                        message: format!(
                            "reaches {levels_back} level(s) back, but only {level} level(s) \
                             have completed"
                        ),
                    });
                }
                Err(Unavailable::MissingInputWord { word, have }) => {
                    findings.push(Violation {
                        index: Some(index),
                        rule: Rule::RegisterUnavailable,
                        message: format!(
                            "reads extended-input word {word}, but the inputs occupy only \
                             {have} word(s)"
                        ),
                    });
                }
                Err(_) => {
                    findings.push(Violation {
                        index: Some(index),
                        rule: Rule::RegisterUnavailable,
                        message: format!("COPY source selector {word} is out of range"),
                    });
                }
            }
            avail.record_copy(word < w, count.clamp(1, w));
        } else {
            for &register in instr.operands() {
                match avail.gate_read(register as u64) {
                    Ok(()) => {}
                    Err(Unavailable::NotReady { ready_at, .. }) => {
                        findings.push(Violation {
                            index: Some(index),
                            rule: Rule::CopyLatency,
                            message: format!(
                                "reads register {register} at level {level}, but the copy \
                                 into it is ready at level {ready_at}"
                            ),
                        });
                    }
                    Err(Unavailable::Locked { .. }) => {
                        findings.push(Violation {
                            index: Some(index),
                            rule: Rule::RegisterUnavailable,
                            message: format!(
                                "reads register {register}, which is locked while level \
                                 {level} writes it"
                            ),
                        });
                    }
                    Err(Unavailable::Uninitialized { .. }) => {
                        findings.push(Violation {
                            index: Some(index),
                            rule: Rule::RegisterUnavailable,
                            message: format!("reads register {register}, which is uninitialized"),
                        });
                    }
                    Err(_) => {
                        findings.push(Violation {
                            index: Some(index),
                            rule: Rule::RegisterUnavailable,
                            message: format!("register specifier {register} is out of range"),
                        });
                    }
                }
            }
            avail.record_gate();
        }
    }

    let gates = program.gate_count();
    if gates == 0 || gates % w != 0 {
        findings.push(Violation {
            index: None,
            rule: Rule::LevelCompleteness,
            message: format!(
                "non-COPY instruction count {gates} is not a positive multiple of w = {w}"
            ),
        });
    }

    ValidationReport { findings }
}
