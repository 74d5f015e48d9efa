//! Toolkit for BPW ("bounded program width") boolean circuit programs.
//!
//! A BPW program is a width-w levelized boolean circuit serialized as a
//! nibble stream. The crate provides:
//!
//! - [`format`]: bit-exact parsing, serialization, static validation, and
//!   disassembly of the `.bpw` container (version 0x01),
//! - [`vm`]: evaluators for BPW programs (a byte-per-bit register file, a
//!   bit-packed register file, and a slow trace-keeping reference
//!   implementation used as a cross-check),
//! - [`workloads`]: seeded generators for the two benchmark circuit
//!   families (`random-nand` and `password`) plus the benchmark parameter
//!   grid,
//! - [`bench`]: wall-clock measurement, cost-model fitting, and the two
//!   scaling hypotheses evaluated by the `bpw fit` command,
//! - [`bits`]: conversions between bit vectors and the hex convention used
//!   by the CLI.

pub mod bench;
pub mod bits;
pub mod format;
pub mod vm;
pub mod workloads;

pub use format::{GateKind, Header, Instruction, Program};
