//! Timing harness, cost-model fitting, and the two decision procedures
//! used to judge a benchmark campaign.
//!
//! A benchmark produces one [`Measurement`] per repeat of one workload on
//! one evaluator. Timing brackets the evaluation only: the program is
//! generated or parsed, validated, and its inputs materialized before the
//! clock starts, so load time never contaminates a runtime. Runs are
//! strictly serial.
//!
//! Analysis is pure: [`fit_alpha`] fits the power-law cost model
//! t = c * n * w^alpha over a measurement set, [`hypothesis1`] checks
//! per-width linearity in n, per-gate monotonicity in w, and the
//! separation factor between the extreme widths, and [`hypothesis2`]
//! checks that the separation factor is stable across workload families
//! and evaluators. Measurements round-trip through CSV so decisions can be
//! reproduced from exported files.

mod fit;

pub use fit::{
    analyze, fit_alpha, hypothesis1, hypothesis2, AnalysisReport, CostFit, GroupFit, Hypothesis1,
    Hypothesis1Config, Hypothesis1Group, Hypothesis2, Hypothesis2Group, WidthLinearity,
    DEFAULT_CV_MAX,
};

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::format::{self, validate, FormatError, Program};
use crate::vm::{self, EvaluatorKind, VmError};
use crate::workloads::{self, Family, WorkloadError, WorkloadSpec};

/// Default repeat count per workload; medians over repeats absorb
/// scheduler noise.
pub const DEFAULT_REPEATS: u64 = 5;

/// Default exponent for [`cost_metric`].
pub const DEFAULT_COST_EXPONENT: f64 = 0.5;

/// Floor for recorded runtimes. Timers can report zero for runs shorter
/// than their resolution; clamping to one nanosecond keeps gate rates
/// finite without visibly distorting any measurable run.
const MIN_RUNTIME_S: f64 = 1e-9;

/// Errors from timing, fitting, or result serialization.
#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("program failed validation:\n{0}")]
    ValidationFailed(String),
    #[error("insufficient measurement span: {0}")]
    InsufficientSpan(String),
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Vm(#[from] VmError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One timed evaluation of one workload on one evaluator.
///
/// `n` is the actual instruction count of the generated program (which
/// the generators may round away from the requested budget), `runtime_s`
/// is wall-clock seconds for the run itself, and `gate_rate` is the
/// derived `n / runtime_s` in instructions per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub family: Family,
    pub n: u64,
    pub w: u64,
    pub d: Option<u64>,
    pub seed: u64,
    pub evaluator: EvaluatorKind,
    pub repeat: u64,
    pub runtime_s: f64,
    pub gate_rate: f64,
}

impl Measurement {
    /// Builds a record, deriving the gate rate. `runtime_s` must be
    /// positive.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        family: Family,
        n: u64,
        w: u64,
        d: Option<u64>,
        seed: u64,
        evaluator: EvaluatorKind,
        repeat: u64,
        runtime_s: f64,
    ) -> Self {
        assert!(runtime_s > 0.0, "runtime must be positive");
        Measurement {
            family,
            n,
            w,
            d,
            seed,
            evaluator,
            repeat,
            runtime_s,
            gate_rate: n as f64 / runtime_s,
        }
    }
}

/// Wall-clock seconds and program outputs for a single repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedRun {
    pub runtime_s: f64,
    pub outputs: Vec<bool>,
}

/// Predicted relative cost of evaluating n instructions at width w under
/// the fitted model: n * w^alpha. alpha = 1 corresponds to the
/// memory-bound worst case, alpha = 0 to width-independent cost.
pub fn cost_metric(n: u64, w: u64, alpha: f64) -> f64 {
    n as f64 * (w as f64).powf(alpha)
}

/// Loads a program via `load`, validates it, then times `repeats`
/// evaluations. Only the evaluation itself is timed: loading, validation,
/// and input construction all happen off the clock.
pub fn time_loaded<L>(
    load: L,
    evaluator: EvaluatorKind,
    inputs: impl FnMut(u64) -> Vec<bool>,
    repeats: u64,
) -> Result<(Program, Vec<TimedRun>), BenchError>
where
    L: FnOnce() -> Result<Program, BenchError>,
{
    let program = load()?;
    let runs = time_program(&program, evaluator, inputs, repeats)?;
    Ok((program, runs))
}

/// Times `repeats` evaluations of an already-loaded program. The program
/// must validate clean; that gate is what lets the timed run use the
/// evaluator with availability checks compiled out, so the clock sees
/// the evaluation strategy rather than redundant per-read checking.
pub fn time_program(
    program: &Program,
    evaluator: EvaluatorKind,
    mut inputs: impl FnMut(u64) -> Vec<bool>,
    repeats: u64,
) -> Result<Vec<TimedRun>, BenchError> {
    if repeats == 0 {
        return Err(BenchError::NoRepeats);
    }
    let report = validate(program);
    if !report.is_clean() {
        return Err(BenchError::ValidationFailed(report.to_string()));
    }
    let mut runs = Vec::with_capacity(repeats as usize);
    for repeat in 0..repeats {
        let input = inputs(repeat);
        let started = Instant::now();
        let result = std::hint::black_box(vm::run_unchecked(program, &input, evaluator))?;
        let runtime_s = started.elapsed().as_secs_f64().max(MIN_RUNTIME_S);
        runs.push(TimedRun {
            runtime_s,
            outputs: result.outputs,
        });
    }
    Ok(runs)
}

/// Parses a program file, then times `repeats` evaluations of it.
pub fn time_file(
    path: &Path,
    evaluator: EvaluatorKind,
    inputs: impl FnMut(u64) -> Vec<bool>,
    repeats: u64,
) -> Result<(Program, Vec<TimedRun>), BenchError> {
    let bytes = std::fs::read(path)?;
    time_loaded(move || Ok(format::parse(&bytes)?), evaluator, inputs, repeats)
}

/// Generates the workload described by `spec` in memory, times it, and
/// emits one [`Measurement`] per repeat. Inputs are freshly derived from
/// the spec's seed for every repeat.
pub fn time_workload(
    spec: &WorkloadSpec,
    evaluator: EvaluatorKind,
    repeats: u64,
) -> Result<Vec<Measurement>, BenchError> {
    let (program, runs) = time_loaded(
        || Ok(workloads::generate(spec)?),
        evaluator,
        |repeat| workloads::input_vector(spec, repeat as u32),
        repeats,
    )?;
    let n = program.header().n;
    Ok(runs
        .into_iter()
        .enumerate()
        .map(|(repeat, run)| {
            Measurement::new(
                spec.family,
                n,
                spec.w,
                spec.density_denominator,
                spec.seed,
                evaluator,
                repeat as u64,
                run.runtime_s,
            )
        })
        .collect())
}

/// Column order of the measurement CSV schema.
pub const CSV_COLUMNS: [&str; 9] = [
    "family",
    "n",
    "w",
    "d",
    "seed",
    "evaluator",
    "repeat",
    "runtime_s",
    "gate_rate",
];

/// Writes measurements as CSV. An empty list still produces the header
/// row, so downstream tooling always sees the schema.
pub fn export_csv<W: Write>(measurements: &[Measurement], out: W) -> Result<(), BenchError> {
    let mut writer = MeasurementWriter::new(out)?;
    for m in measurements {
        writer.write(m)?;
    }
    Ok(())
}

/// Reads measurements from CSV produced by [`export_csv`].
pub fn import_csv<R: Read>(input: R) -> Result<Vec<Measurement>, BenchError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for record in reader.deserialize() {
        out.push(record?);
    }
    Ok(out)
}

/// Writes measurements as a JSON array of records.
pub fn export_json<W: Write>(measurements: &[Measurement], mut out: W) -> Result<(), BenchError> {
    serde_json::to_writer_pretty(&mut out, measurements)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Streaming CSV sink: the header goes out on construction and every
/// record is flushed as written, so an interrupted benchmark still leaves
/// a readable, append-safe results file.
pub struct MeasurementWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MeasurementWriter<W> {
    pub fn new(out: W) -> Result<Self, BenchError> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        inner.write_record(CSV_COLUMNS)?;
        inner.flush()?;
        Ok(MeasurementWriter { inner })
    }

    pub fn write(&mut self, measurement: &Measurement) -> Result<(), BenchError> {
        self.inner.serialize(measurement)?;
        self.inner.flush()?;
        Ok(())
    }
}
