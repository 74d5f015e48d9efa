//! The password family: a recognizer circuit that accepts exactly one
//! k-bit input (k = min(w, 50)) and outputs a single bit.
//!
//! Structure, top to bottom, every level exactly w gates and no COPYs:
//!
//! 1. one NOT level fanning the k inputs out across the w slots,
//! 2. M >= 1 permutation levels, each a seeded shuffle of the previous
//!    level's slots under another negation,
//! 3. one comparison level turning each slot into "this input bit matches
//!    the password bit", with AND2/NAND2 chosen per slot to cancel the
//!    accumulated negation parity,
//! 4. ceil(lg k) AND2 reduction levels folding the k match bits into one
//!    accept bit, leaving w copies of it on the final level.

use rand::Rng;

use crate::format::{GateKind, Instruction, Program};

use super::{derive_rng, Family, WorkloadError, WorkloadSpec, STREAM_STRUCTURE};

/// The one accepted input: bit i is 1 for even i, so the value reads
/// "1 followed by alternating 01" (0b10101 = 0x15 at k = 5).
pub fn password_constant(k: u64) -> Vec<bool> {
    assert!((1..=64).contains(&k), "password length {k} out of range");
    (0..k).map(|i| i % 2 == 0).collect()
}

/// Ground truth for the family: does `input` match the password of its
/// own length?
pub fn password_oracle(input: &[bool]) -> bool {
    input == password_constant(input.len() as u64)
}

fn ceil_log2(k: u64) -> u64 {
    if k <= 1 {
        0
    } else {
        ((k - 1).ilog2() + 1) as u64
    }
}

/// Register index of the previous level's slot `slot`, as read by a gate
/// running at `level` (>= 1).
fn prev_slot_register(w: u64, level: u64, slot: u64) -> u32 {
    (2 * w + ((level - 1) % 2) * w + slot) as u32
}

pub(super) fn generate(spec: &WorkloadSpec) -> Result<Program, WorkloadError> {
    debug_assert_eq!(spec.family, Family::Password);
    if spec.density_denominator.is_some() {
        return Err(WorkloadError::UnexpectedDensity);
    }
    let w = spec.w;
    let k = spec.k();
    let reductions = ceil_log2(k);
    let total_levels = spec.n / w;
    let min_levels = 3 + reductions;
    if total_levels < min_levels {
        return Err(WorkloadError::ProgramTooSmall {
            needed: min_levels * w,
            requested: spec.n,
        });
    }
    let shuffles = total_levels - 2 - reductions;

    let mut rng = derive_rng(spec, STREAM_STRUCTURE);
    let mut instructions = Vec::with_capacity((total_levels * w) as usize);

    // Fan-out level: slot j takes the negation of input j mod k.
    for j in 0..w {
        instructions.push(Instruction::new(GateKind::Not, &[(j % k) as u32])?);
    }
    let mut class_of: Vec<u64> = (0..w).map(|j| j % k).collect();
    let mut level = 1;

    for _ in 0..shuffles {
        let perm = permutation(&mut rng, w as usize);
        let mut new_class = vec![0u64; w as usize];
        for (p, &source) in perm.iter().enumerate() {
            instructions.push(Instruction::new(
                GateKind::Not,
                &[prev_slot_register(w, level, source as u64)],
            )?);
            new_class[p] = class_of[source];
        }
        class_of = new_class;
        level += 1;
    }

    // Comparison level. Every slot passed through 1 + shuffles NOT
    // gates; AND2 keeps the value, NAND2 flips it, and the choice per
    // slot makes the result "input bit == password bit". Slot j reads a
    // previous-level slot carrying class j mod k, restoring canonical
    // slot order for the reduction below.
    let parity = (1 + shuffles) % 2 == 1;
    let password = password_constant(k);
    let mut slots_by_class: Vec<Vec<u64>> = vec![Vec::new(); k as usize];
    for (slot, &class) in class_of.iter().enumerate() {
        slots_by_class[class as usize].push(slot as u64);
    }
    for j in 0..w {
        let class = (j % k) as usize;
        let occurrences = &slots_by_class[class];
        let slot = occurrences[(j / k) as usize % occurrences.len()];
        let register = prev_slot_register(w, level, slot);
        let kind = if password[class] != parity {
            GateKind::And2
        } else {
            GateKind::Nand2
        };
        instructions.push(Instruction::new(kind, &[register, register])?);
    }
    level += 1;

    // Reduction levels: fold k match bits to 1 by halving; slots past the
    // live prefix keep recomputing the same values, so the final level is
    // w copies of the accept bit.
    let mut live = k;
    for _ in 0..reductions {
        let next = live.div_ceil(2);
        for j in 0..w {
            let q = j % next;
            let partner = if q + next < live { q + next } else { q };
            instructions.push(Instruction::new(
                GateKind::And2,
                &[
                    prev_slot_register(w, level, q),
                    prev_slot_register(w, level, partner),
                ],
            )?);
        }
        live = next;
        level += 1;
    }
    debug_assert_eq!(live, 1);
    debug_assert_eq!(level, total_levels);

    Ok(Program::new(w, k, 1, instructions)?)
}

fn permutation(rng: &mut impl Rng, len: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..len).collect();
    for i in (1..len).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}
