//! Seeded generators for the two benchmark circuit families, plus the
//! benchmark parameter grid.
//!
//! Both families use the "desk-scale" interface convention: a program of
//! width w reads a = min(w, 50) input bits and designates b outputs from
//! its final level(s). Generation is fully deterministic: a program is a
//! pure function of (family, w, n, density, seed), and generated programs
//! always pass validation with no findings, strict mode included.

mod password;
mod random_nand;

pub use password::{password_constant, password_oracle};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::format::{FormatError, Program};

/// Version tag for the generator's seeding scheme. Bump if the key
/// derivation or sampling order ever changes, since that changes every
/// generated program.
pub const GENERATOR_VERSION: &str = "bpw-gen-v1";

/// Errors raised while generating a workload.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorkloadError {
    #[error("width {w} is too small for this family (minimum {min})")]
    WidthTooSmall { w: u64, min: u64 },
    #[error("instruction budget {requested} is too small (this configuration needs {needed})")]
    ProgramTooSmall { needed: u64, requested: u64 },
    #[error("density denominator {denominator} is infeasible at width {w}: {why}")]
    InfeasibleDensity {
        denominator: u64,
        w: u64,
        why: String,
    },
    #[error("the random-nand family requires a density denominator")]
    MissingDensity,
    #[error("the password family takes no density denominator")]
    UnexpectedDensity,
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// The two generated circuit families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    RandomNand,
    Password,
}

impl Family {
    pub const ALL: [Family; 2] = [Family::RandomNand, Family::Password];

    pub fn name(self) -> &'static str {
        match self {
            Family::RandomNand => "random-nand",
            Family::Password => "password",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random-nand" => Ok(Family::RandomNand),
            "password" => Ok(Family::Password),
            other => Err(format!(
                "unknown family {other:?} (expected random-nand or password)"
            )),
        }
    }
}

/// Parameters that fully determine one generated program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub family: Family,
    pub w: u64,
    /// Requested instruction budget. The generated program's actual n is
    /// the closest realizable count at or below the family's structure
    /// (see each generator).
    pub n: u64,
    /// COPY density d expressed by its denominator (d = 1/denominator).
    /// Required for `random-nand`, absent for `password`.
    pub density_denominator: Option<u64>,
    pub seed: u64,
}

impl WorkloadSpec {
    /// Circuit input count (and password length): min(w, 50).
    pub fn k(&self) -> u64 {
        self.w.min(50)
    }

    /// Canonical artifact name for this spec.
    pub fn file_name(&self) -> String {
        match self.density_denominator {
            Some(d) => format!(
                "{}_w{}_n{}_d{}_s{}.bpw",
                self.family, self.w, self.n, d, self.seed
            ),
            None => format!("{}_w{}_n{}_s{}.bpw", self.family, self.w, self.n, self.seed),
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream ids keep the instruction stream and each repeat's input vector
/// statistically independent while staying reproducible.
pub(crate) const STREAM_STRUCTURE: u64 = 0;

pub(crate) fn stream_inputs(repeat: u32) -> u64 {
    1 + repeat as u64
}

/// Derives a ChaCha key from the spec and a stream id by absorbing each
/// parameter into a splitmix64 chain.
pub(crate) fn derive_rng(spec: &WorkloadSpec, stream: u64) -> ChaCha12Rng {
    let family_tag = match spec.family {
        Family::RandomNand => 1,
        Family::Password => 2,
    };
    let mut state: u64 = 0x5851_F42D_4C95_7F2D;
    for part in [
        spec.seed,
        family_tag,
        spec.w,
        spec.n,
        spec.density_denominator.map_or(0, |d| d ^ (1 << 63)),
        stream,
    ] {
        state ^= part;
        splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// The seeded input vector (k bits) used for measurement repeat `repeat`
/// of this workload.
pub fn input_vector(spec: &WorkloadSpec, repeat: u32) -> Vec<bool> {
    let mut rng = derive_rng(spec, stream_inputs(repeat));
    (0..spec.k()).map(|_| rng.gen::<bool>()).collect()
}

/// Generates the program for a spec, dispatching on the family.
pub fn generate(spec: &WorkloadSpec) -> Result<Program, WorkloadError> {
    match spec.family {
        Family::RandomNand => random_nand::generate(spec),
        Family::Password => password::generate(spec),
    }
}

/// The COPY densities exercised at one (n, w) grid cell: d = 1/(2^i * w)
/// for 0 <= i <= floor(lg(n/w)), returned as denominators in increasing
/// order (densest first). Empty when n < w.
pub fn density_denominators(n: u64, w: u64) -> Vec<u64> {
    let mut out = Vec::new();
    if n >= w {
        let max_ratio = n / w;
        for i in 0..=max_ratio.ilog2() {
            out.push(w << i);
        }
    }
    out
}

/// How densities are derived from a grid cell. Only the halving rule
/// exists today.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityRule {
    Halving,
}

/// The benchmark grid: which widths and sizes to measure and how to pick
/// densities. Serialized as JSON by `bpw grid` and consumed by
/// `bpw bench`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub widths: Vec<u64>,
    pub sizes: Vec<u64>,
    pub density_rule: DensityRule,
    /// Optional upper bound on n for desk-scale runs; sizes above it are
    /// skipped.
    pub scale_cap: Option<u64>,
}

impl Default for GridSpec {
    fn default() -> GridSpec {
        GridSpec {
            widths: vec![
                5, 10, 50, 100, 500, 1000, 5000, 10_000, 50_000, 100_000, 500_000,
            ],
            sizes: vec![1_000_000, 10_000_000, 100_000_000, 1_000_000_000],
            density_rule: DensityRule::Halving,
            scale_cap: None,
        }
    }
}

impl GridSpec {
    /// Sizes surviving the scale cap.
    pub fn effective_sizes(&self) -> Vec<u64> {
        self.sizes
            .iter()
            .copied()
            .filter(|&n| self.scale_cap.map_or(true, |cap| n <= cap))
            .collect()
    }
}

/// Expands a grid into concrete workload specs: width-major, then size,
/// then density (densest first). Random-nand cells with n < w have no
/// feasible density and are skipped.
pub fn parameter_grid(grid: &GridSpec, families: &[Family], seed: u64) -> Vec<WorkloadSpec> {
    let sizes = grid.effective_sizes();
    let mut out = Vec::new();
    for &family in families {
        for &w in &grid.widths {
            for &n in &sizes {
                match family {
                    Family::RandomNand => {
                        for denominator in density_denominators(n, w) {
                            out.push(WorkloadSpec {
                                family,
                                w,
                                n,
                                density_denominator: Some(denominator),
                                seed,
                            });
                        }
                    }
                    Family::Password => {
                        out.push(WorkloadSpec {
                            family,
                            w,
                            n,
                            density_denominator: None,
                            seed,
                        });
                    }
                }
            }
        }
    }
    out
}
