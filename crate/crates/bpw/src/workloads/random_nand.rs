//! The random-NAND family: repetitions of 1/d uniformly wired NAND2
//! gates followed by one prior-result COPY, at COPY density d.
//!
//! Gate operands are drawn uniformly over the registers a gate at that
//! position may legally read, tracked exactly as the validator tracks
//! them, so generated programs always validate clean. Each COPY moves
//! floor(sqrt(w)/2) bits from a uniformly chosen completed level at a
//! uniform word offset.

use rand::Rng;

use crate::format::{
    copy_latency, GateKind, Header, Instruction, Program, RegisterAvailability,
};

use super::{derive_rng, Family, WorkloadError, WorkloadSpec, STREAM_STRUCTURE};

fn floor_sqrt(w: u64) -> u64 {
    let s = copy_latency(w);
    if s * s == w {
        s
    } else {
        s - 1
    }
}

/// Smallest width at which the COPY payload floor(sqrt(w)/2) is nonzero.
pub(super) const MIN_WIDTH: u64 = 4;

pub(super) fn generate(spec: &WorkloadSpec) -> Result<Program, WorkloadError> {
    debug_assert_eq!(spec.family, Family::RandomNand);
    let w = spec.w;
    if w < MIN_WIDTH {
        return Err(WorkloadError::WidthTooSmall { w, min: MIN_WIDTH });
    }
    let denominator = spec.density_denominator.ok_or(WorkloadError::MissingDensity)?;
    if denominator == 0 || denominator % w != 0 {
        return Err(WorkloadError::InfeasibleDensity {
            denominator,
            w,
            why: format!("gates per COPY (1/d) must be a positive multiple of w = {w}"),
        });
    }

    // Repetitions: n * d / (1 + d) = n / (denominator + 1), rounded.
    let reps = (spec.n as f64 / (denominator as f64 + 1.0)).round() as u64;
    if reps == 0 {
        return Err(WorkloadError::ProgramTooSmall {
            needed: (denominator + 1).div_ceil(2),
            requested: spec.n,
        });
    }
    let actual_n = reps * (denominator + 1);
    let k = spec.k();
    let copy_count = floor_sqrt(w) / 2;

    let header = Header {
        w,
        n: actual_n,
        a: k,
        b: k,
    };
    let mut avail = RegisterAvailability::new(&header);
    let mut rng = derive_rng(spec, STREAM_STRUCTURE);
    let mut instructions = Vec::with_capacity(actual_n as usize);

    for _ in 0..reps {
        for _ in 0..denominator {
            let x = sample_readable(&mut rng, &avail);
            let y = sample_readable(&mut rng, &avail);
            instructions.push(Instruction::new(GateKind::Nand2, &[x, y])?);
            avail.record_gate();
        }
        // The level is a positive multiple of denominator / w here, so at
        // least one completed level always exists to copy from.
        let levels_back = rng.gen_range(1..=avail.level().min(w));
        let source = w + levels_back - 1;
        let start = rng.gen_range(0..=w - copy_count);
        instructions.push(Instruction::new(
            GateKind::Copy,
            &[source as u32, copy_count as u32, start as u32],
        )?);
        avail.record_copy(false, copy_count);
    }

    Ok(Program::new(w, k, k, instructions)?)
}

/// Uniform draw over the registers a gate issued now may read.
fn sample_readable(rng: &mut impl Rng, avail: &RegisterAvailability) -> u32 {
    let four_w = 4 * avail.width();
    loop {
        let r = rng.gen_range(0..four_w);
        if avail.gate_read(r).is_ok() {
            return r as u32;
        }
    }
}
