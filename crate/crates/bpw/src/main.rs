//! Command-line front end: generate workload circuits, validate and
//! disassemble circuit files, evaluate them, and run the timing study
//! with its cost-model analysis.
//!
//! Exit codes: 0 on success (and on a clean validation), 1 on runtime or
//! validation failures, 2 on usage and parse errors.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bpw::bench::{
    self, BenchError, Hypothesis1Config, Measurement, MeasurementWriter, DEFAULT_CV_MAX,
    DEFAULT_REPEATS,
};
use bpw::bits;
use bpw::format;
use bpw::vm::{self, EvaluatorKind};
use bpw::workloads::{self, Family, GridSpec, WorkloadError, WorkloadSpec};

#[derive(Parser)]
#[command(name = "bpw", version, about = "Bounded-width boolean circuit toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a workload circuit file
    Gen {
        #[arg(long)]
        family: Family,
        /// Register-file width
        #[arg(long)]
        w: u64,
        /// Requested instruction budget (generators round to whole
        /// repetition blocks; the written header records the actual count)
        #[arg(long)]
        n: u64,
        /// Density denominator (random-nand only)
        #[arg(long)]
        d: Option<u64>,
        #[arg(long, env = "BPW_SEED", default_value_t = 0)]
        seed: u64,
        /// Output path (default: a name derived from the parameters)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a circuit file against the validity rules
    Validate {
        path: PathBuf,
        /// Also fail on incomplete final levels (rule R5)
        #[arg(long)]
        strict: bool,
    },
    /// Evaluate a circuit on an input vector
    Run {
        path: PathBuf,
        /// Input bits as hex; the first input bit is the value's most
        /// significant bit
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = EvaluatorKind::Bitpacked)]
        evaluator: EvaluatorKind,
        /// Also evaluate on the reference interpreter and compare
        #[arg(long)]
        oracle: bool,
    },
    /// Time workloads over a parameter grid, streaming measurements as CSV
    Bench {
        /// Grid description: inline JSON, or a path to a JSON file (as
        /// printed by `bpw grid`)
        #[arg(long)]
        grid: String,
        /// Comma-separated families (default: all)
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<Family>>,
        /// Comma-separated evaluators (default: all)
        #[arg(long, value_delimiter = ',')]
        evaluators: Option<Vec<EvaluatorKind>>,
        #[arg(long, default_value_t = DEFAULT_REPEATS)]
        repeats: u64,
        /// Output CSV path (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Measure cells in seeded-shuffled order instead of grid order,
        /// so slow drift of the host cannot bias whole widths
        #[arg(long)]
        shuffle: bool,
        #[arg(long, env = "BPW_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Fit the cost model over measurements and judge the hypotheses
    Fit {
        /// Measurement CSV produced by `bpw bench`
        #[arg(long = "in")]
        input: PathBuf,
        /// Also write the full report as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Disassemble a circuit file
    Dump {
        path: PathBuf,
        /// Print at most this many instructions
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Print the default benchmark grid as JSON
    Grid {
        /// Drop grid sizes above this instruction count
        #[arg(long)]
        scale_cap: Option<u64>,
        /// Output path (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(err: impl Display) -> Failure {
    Failure {
        code: 2,
        message: err.to_string(),
    }
}

fn runtime(err: impl Display) -> Failure {
    Failure {
        code: 1,
        message: err.to_string(),
    }
}

/// CSV/JSON/format problems in benchmark plumbing are malformed-input
/// errors; everything else there is a runtime failure.
fn bench_failure(err: BenchError) -> Failure {
    match err {
        BenchError::Csv(_) | BenchError::Json(_) | BenchError::Format(_) => usage(err),
        _ => runtime(err),
    }
}

fn is_broken_pipe(err: &BenchError) -> bool {
    match err {
        BenchError::Io(io) => io.kind() == std::io::ErrorKind::BrokenPipe,
        BenchError::Csv(csv) => matches!(
            csv.kind(),
            csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe
        ),
        _ => false,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Gen {
            family,
            w,
            n,
            d,
            seed,
            out,
        } => cmd_gen(family, w, n, d, seed, out),
        Command::Validate { path, strict } => cmd_validate(&path, strict),
        Command::Run {
            path,
            input,
            evaluator,
            oracle,
        } => cmd_run(&path, &input, evaluator, oracle),
        Command::Bench {
            grid,
            families,
            evaluators,
            repeats,
            out,
            shuffle,
            seed,
        } => cmd_bench(&grid, families, evaluators, repeats, out, shuffle, seed),
        Command::Fit { input, out } => cmd_fit(&input, out),
        Command::Dump { path, limit } => cmd_dump(&path, limit),
        Command::Grid { scale_cap, out } => cmd_grid(scale_cap, out),
    }
}

fn cmd_gen(
    family: Family,
    w: u64,
    n: u64,
    d: Option<u64>,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<ExitCode, Failure> {
    let spec = WorkloadSpec {
        family,
        w,
        n,
        density_denominator: d,
        seed,
    };
    let program = workloads::generate(&spec).map_err(usage)?;
    let bytes = format::serialize(&program).map_err(runtime)?;
    let path = out.unwrap_or_else(|| PathBuf::from(spec.file_name()));
    fs::write(&path, &bytes).map_err(runtime)?;
    let header = program.header();
    println!(
        "wrote {}: n={} w={} a={} b={}",
        path.display(),
        header.n,
        header.w,
        header.a,
        header.b
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(path: &PathBuf, strict: bool) -> Result<ExitCode, Failure> {
    let bytes = fs::read(path).map_err(runtime)?;
    let program = format::parse(&bytes).map_err(usage)?;
    let report = format::validate(&program);
    print!("{report}");
    let clean = if strict {
        report.is_clean_strict()
    } else {
        report.is_clean()
    };
    Ok(if clean {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_run(
    path: &PathBuf,
    input: &str,
    evaluator: EvaluatorKind,
    oracle: bool,
) -> Result<ExitCode, Failure> {
    let bytes = fs::read(path).map_err(runtime)?;
    let program = format::parse(&bytes).map_err(usage)?;
    let input = bits::from_hex(input, program.header().a as usize).map_err(usage)?;
    let result = vm::run(&program, &input, evaluator).map_err(runtime)?;
    let hex = bits::to_hex(&result.outputs);
    println!("{hex}");
    if oracle {
        let reference = vm::reference_eval(&program, &input).map_err(runtime)?;
        if reference == result.outputs {
            println!("oracle: agreement");
        } else {
            eprintln!(
                "oracle mismatch: {evaluator} produced {hex}, the reference produced {}",
                bits::to_hex(&reference)
            );
            return Ok(ExitCode::from(1));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(
    grid: &str,
    families: Option<Vec<Family>>,
    evaluators: Option<Vec<EvaluatorKind>>,
    repeats: u64,
    out: Option<PathBuf>,
    shuffle: bool,
    seed: u64,
) -> Result<ExitCode, Failure> {
    let text = if grid.trim_start().starts_with('{') {
        grid.to_owned()
    } else {
        fs::read_to_string(grid).map_err(runtime)?
    };
    let grid: GridSpec = serde_json::from_str(&text).map_err(usage)?;
    let families = families.unwrap_or_else(|| Family::ALL.to_vec());
    let evaluators = evaluators.unwrap_or_else(|| EvaluatorKind::ALL.to_vec());
    let mut cells = workloads::parameter_grid(&grid, &families, seed);
    if shuffle {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        cells.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
    }

    let sink: Box<dyn Write> = match &out {
        Some(path) => Box::new(fs::File::create(path).map_err(runtime)?),
        None => Box::new(std::io::stdout()),
    };
    let mut writer = MeasurementWriter::new(sink).map_err(bench_failure)?;
    let mut written = 0u64;
    let mut skipped = 0u64;
    for cell in &cells {
        let program = match workloads::generate(cell) {
            Ok(program) => program,
            Err(
                err @ (WorkloadError::WidthTooSmall { .. }
                | WorkloadError::ProgramTooSmall { .. }
                | WorkloadError::InfeasibleDensity { .. }),
            ) => {
                eprintln!("skipping {}: {err}", cell.file_name());
                skipped += 1;
                continue;
            }
            Err(err) => return Err(usage(err)),
        };
        let n = program.header().n;
        for &evaluator in &evaluators {
            let runs = bench::time_program(
                &program,
                evaluator,
                |repeat| workloads::input_vector(cell, repeat as u32),
                repeats,
            )
            .map_err(bench_failure)?;
            for (repeat, run) in runs.iter().enumerate() {
                let record = Measurement::new(
                    cell.family,
                    n,
                    cell.w,
                    cell.density_denominator,
                    cell.seed,
                    evaluator,
                    repeat as u64,
                    run.runtime_s,
                );
                match writer.write(&record) {
                    Ok(()) => written += 1,
                    // Streaming into a pager that quit is a normal way
                    // for a run to end, not a failure.
                    Err(err) if out.is_none() && is_broken_pipe(&err) => {
                        return Ok(ExitCode::SUCCESS);
                    }
                    Err(err) => return Err(bench_failure(err)),
                }
            }
        }
    }
    eprintln!(
        "wrote {written} measurement(s) from {} cell(s){}",
        cells.len() as u64 - skipped,
        if skipped > 0 {
            format!(", skipped {skipped} infeasible cell(s)")
        } else {
            String::new()
        }
    );
    Ok(ExitCode::SUCCESS)
}

fn verdict(accepted: bool) -> &'static str {
    if accepted {
        "accepted"
    } else {
        "rejected"
    }
}

fn check(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn cmd_fit(input: &PathBuf, out: Option<PathBuf>) -> Result<ExitCode, Failure> {
    let file = fs::File::open(input).map_err(runtime)?;
    let measurements = bench::import_csv(file).map_err(bench_failure)?;
    let config = Hypothesis1Config::default();
    let report = bench::analyze(&measurements, &config, DEFAULT_CV_MAX).map_err(bench_failure)?;

    for f in &report.fits {
        println!(
            "{}/{}: alpha={:.3} c={:.3e} r_squared={:.4} R={:.2} (w {}..{})",
            f.family,
            f.evaluator,
            f.fit.alpha,
            f.fit.c,
            f.fit.r_squared,
            f.fit.speedup_ratio,
            f.fit.w_min,
            f.fit.w_max
        );
    }
    match (&report.hypothesis1, &report.hypothesis1_note) {
        (Some(h), _) => {
            println!("H1: {}", verdict(h.accepted));
            for g in &h.groups {
                println!(
                    "  {}/{}: linearity min r2 {:.4} ({}), worst per-gate drop {:.1}% ({}), \
                     separation {:.2} in [{:.2}, {:.2}] ({})",
                    g.family,
                    g.evaluator,
                    g.min_linearity,
                    check(g.linear_ok),
                    g.worst_drop * 100.0,
                    check(g.monotonic_ok),
                    g.separation,
                    g.separation_lo,
                    g.separation_hi,
                    check(g.separation_ok)
                );
            }
        }
        (None, note) => println!(
            "H1: skipped ({})",
            note.as_deref().unwrap_or("not computed")
        ),
    }
    match (&report.hypothesis2, &report.hypothesis2_note) {
        (Some(h), _) => {
            println!(
                "H2: {} (cv {:.3}, max {:.3})",
                verdict(h.accepted),
                h.cv,
                h.cv_max
            );
            for g in &h.groups {
                println!("  {}/{}: R={:.2}", g.family, g.evaluator, g.speedup_ratio);
            }
        }
        (None, note) => println!(
            "H2: skipped ({})",
            note.as_deref().unwrap_or("not computed")
        ),
    }

    if let Some(path) = out {
        let mut file = fs::File::create(&path).map_err(runtime)?;
        serde_json::to_writer_pretty(&mut file, &report).map_err(runtime)?;
        file.write_all(b"\n").map_err(runtime)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_dump(path: &PathBuf, limit: Option<usize>) -> Result<ExitCode, Failure> {
    let bytes = fs::read(path).map_err(runtime)?;
    let program = format::parse(&bytes).map_err(usage)?;
    print!("{}", format::disassemble(&program, limit));
    Ok(ExitCode::SUCCESS)
}

fn cmd_grid(scale_cap: Option<u64>, out: Option<PathBuf>) -> Result<ExitCode, Failure> {
    let mut grid = GridSpec::default();
    if scale_cap.is_some() {
        grid.scale_cap = scale_cap;
    }
    let json = serde_json::to_string_pretty(&grid).map_err(runtime)?;
    match out {
        Some(path) => {
            fs::write(&path, format!("{json}\n")).map_err(runtime)?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}
