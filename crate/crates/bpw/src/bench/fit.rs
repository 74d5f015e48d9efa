//! Cost-model fitting and the two acceptance checks over measurement
//! sets.
//!
//! Aggregation pipeline: within each (width, instruction-count) cell,
//! runtimes are medianed over repeats and then averaged over seeds and
//! densities. The fit regresses the per-width mean of ln(runtime / n)
//! against ln(w); its slope is the exponent alpha in t = c * n * w^alpha.
//! The speedup ratio compares per-gate times at the narrowest and widest
//! measured widths, pairing each size at one extreme with the nearest
//! size (in log space) at the other. On grids whose sizes match exactly
//! this is a plain common-size average; generators that round instruction
//! counts to whole repetition blocks perturb sizes slightly, and nearest
//! pairing keeps the comparison meaningful there instead of failing.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{BenchError, Measurement};
use crate::vm::EvaluatorKind;
use crate::workloads::Family;

/// Default ceiling for hypothesis 2's dispersion of speedup ratios.
pub const DEFAULT_CV_MAX: f64 = 0.5;

fn median(mut xs: Vec<f64>) -> f64 {
    debug_assert!(!xs.is_empty());
    xs.sort_by(|a, b| a.partial_cmp(b).expect("runtimes are finite"));
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        (xs[mid - 1] + xs[mid]) / 2.0
    }
}

fn mean(xs: &[f64]) -> f64 {
    debug_assert!(!xs.is_empty());
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
fn sample_std(xs: &[f64]) -> f64 {
    debug_assert!(xs.len() >= 2);
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Least-squares line through `points`, returning (slope, intercept,
/// r_squared). Requires at least two distinct x values.
fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let mx = mean(&points.iter().map(|p| p.0).collect::<Vec<_>>());
    let my = mean(&points.iter().map(|p| p.1).collect::<Vec<_>>());
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    debug_assert!(sxx > 0.0, "line fitting needs at least two distinct x values");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let ss_tot: f64 = points.iter().map(|(_, y)| (y - my).powi(2)).sum();
    // Constant data can leave ss_tot at roundoff scale rather than exactly
    // zero (the mean of n identical values need not equal them), so anything
    // within accumulated machine error of zero counts as a perfect fit.
    let y_scale: f64 = points.iter().map(|(_, y)| y * y).sum();
    let flat = ss_tot <= y_scale * f64::EPSILON * f64::EPSILON * points.len() as f64;
    let r_squared = if flat {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    (slope, intercept, r_squared)
}

/// Aggregates runtimes into (w, n) cells: median over repeats of each
/// (density, seed) run, then mean across runs sharing the cell.
fn cell_seconds(measurements: &[Measurement]) -> BTreeMap<(u64, u64), f64> {
    let mut runs: BTreeMap<(u64, u64), BTreeMap<(Option<u64>, u64), Vec<f64>>> = BTreeMap::new();
    for m in measurements {
        runs.entry((m.w, m.n))
            .or_default()
            .entry((m.d, m.seed))
            .or_default()
            .push(m.runtime_s);
    }
    runs.into_iter()
        .map(|(cell, by_run)| {
            let medians: Vec<f64> = by_run.into_values().map(median).collect();
            (cell, mean(&medians))
        })
        .collect()
}

/// Cells regrouped as width -> (n -> seconds).
fn width_table(measurements: &[Measurement]) -> BTreeMap<u64, BTreeMap<u64, f64>> {
    let mut by_width: BTreeMap<u64, BTreeMap<u64, f64>> = BTreeMap::new();
    for ((w, n), t) in cell_seconds(measurements) {
        by_width.entry(w).or_default().insert(n, t);
    }
    by_width
}

/// Per-gate seconds in the cell whose size is nearest `n` in log space.
fn nearest_per_gate(cells: &BTreeMap<u64, f64>, n: u64) -> f64 {
    let target = (n as f64).ln();
    let (m, t) = cells
        .iter()
        .min_by(|a, b| {
            let da = ((*a.0 as f64).ln() - target).abs();
            let db = ((*b.0 as f64).ln() - target).abs();
            da.partial_cmp(&db).expect("sizes are positive")
        })
        .expect("width has at least one cell");
    t / *m as f64
}

/// A fitted power-law cost model over one measurement set.
#[derive(Debug, Clone, Serialize)]
pub struct CostFit {
    /// Exponent in t = c * n * w^alpha.
    pub alpha: f64,
    /// Scale factor: seconds per instruction at w = 1 under the model.
    pub c: f64,
    /// Goodness of the log-log regression behind `alpha`.
    pub r_squared: f64,
    /// Mean per-gate slowdown of the widest width relative to the
    /// narrowest, across matched sizes.
    pub speedup_ratio: f64,
    pub w_min: u64,
    pub w_max: u64,
    /// For every width measured at two or more sizes: R-squared of the
    /// runtime-vs-size line.
    pub per_width_linearity: Vec<WidthLinearity>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WidthLinearity {
    pub w: u64,
    pub r_squared: f64,
}

/// Fits t = c * n * w^alpha over the measurements. Needs at least three
/// distinct widths.
pub fn fit_alpha(measurements: &[Measurement]) -> Result<CostFit, BenchError> {
    let by_width = width_table(measurements);
    if by_width.len() < 3 {
        return Err(BenchError::InsufficientSpan(format!(
            "cost fitting needs at least 3 distinct widths, got {}",
            by_width.len()
        )));
    }
    let w_min = *by_width.keys().next().unwrap();
    let w_max = *by_width.keys().next_back().unwrap();

    let points: Vec<(f64, f64)> = by_width
        .iter()
        .map(|(w, cells)| {
            let logs: Vec<f64> = cells.iter().map(|(n, t)| (t / *n as f64).ln()).collect();
            ((*w as f64).ln(), mean(&logs))
        })
        .collect();
    let (alpha, intercept, r_squared) = linear_fit(&points);

    let narrow = &by_width[&w_min];
    let wide = &by_width[&w_max];
    let ratios: Vec<f64> = narrow
        .iter()
        .map(|(n, t)| nearest_per_gate(wide, *n) / (t / *n as f64))
        .collect();
    let speedup_ratio = mean(&ratios);

    let per_width_linearity = by_width
        .iter()
        .filter(|(_, cells)| cells.len() >= 2)
        .map(|(w, cells)| {
            let pts: Vec<(f64, f64)> = cells.iter().map(|(n, t)| (*n as f64, *t)).collect();
            let (_, _, r_squared) = linear_fit(&pts);
            WidthLinearity { w: *w, r_squared }
        })
        .collect();

    Ok(CostFit {
        alpha,
        c: intercept.exp(),
        r_squared,
        speedup_ratio,
        w_min,
        w_max,
        per_width_linearity,
    })
}

fn split_groups(
    measurements: &[Measurement],
) -> BTreeMap<(Family, EvaluatorKind), Vec<Measurement>> {
    let mut groups: BTreeMap<(Family, EvaluatorKind), Vec<Measurement>> = BTreeMap::new();
    for m in measurements {
        groups
            .entry((m.family, m.evaluator))
            .or_default()
            .push(m.clone());
    }
    groups
}

/// Thresholds for [`hypothesis1`].
#[derive(Debug, Clone, Serialize)]
pub struct Hypothesis1Config {
    /// Minimum R-squared of each per-width runtime-vs-size line.
    pub linearity_r2_min: f64,
    /// Largest tolerated fractional decrease of mean per-gate time
    /// between consecutive widths.
    pub monotonic_tolerance: f64,
}

impl Default for Hypothesis1Config {
    fn default() -> Self {
        Hypothesis1Config {
            linearity_r2_min: 0.98,
            monotonic_tolerance: 0.10,
        }
    }
}

/// Hypothesis 1 verdict for one (family, evaluator) group.
#[derive(Debug, Clone, Serialize)]
pub struct Hypothesis1Group {
    pub family: Family,
    pub evaluator: EvaluatorKind,
    pub alpha: f64,
    /// Worst per-width runtime-vs-size R-squared.
    pub min_linearity: f64,
    /// Largest fractional decrease of mean per-gate time between
    /// consecutive widths (0 when nondecreasing).
    pub worst_drop: f64,
    /// Per-gate slowdown between the extreme widths.
    pub separation: f64,
    pub separation_lo: f64,
    pub separation_hi: f64,
    pub linear_ok: bool,
    pub monotonic_ok: bool,
    pub separation_ok: bool,
    pub accepted: bool,
}

/// Hypothesis 1: within every (family, evaluator) group, runtime is
/// linear in the instruction count at each width, mean per-gate time is
/// nondecreasing in width, and the separation factor between the extreme
/// widths falls inside bounds scaled to the measured span:
/// sqrt(w_max / w_min) within a factor of ten either way.
#[derive(Debug, Clone, Serialize)]
pub struct Hypothesis1 {
    pub id: String,
    pub accepted: bool,
    pub config: Hypothesis1Config,
    pub groups: Vec<Hypothesis1Group>,
}

pub fn hypothesis1(
    measurements: &[Measurement],
    config: &Hypothesis1Config,
) -> Result<Hypothesis1, BenchError> {
    let groups = split_groups(measurements);
    if groups.is_empty() {
        return Err(BenchError::InsufficientSpan("no measurements".into()));
    }
    let mut out = Vec::new();
    for ((family, evaluator), group) in groups {
        let by_width = width_table(&group);
        for (w, cells) in &by_width {
            if cells.len() < 2 {
                return Err(BenchError::InsufficientSpan(format!(
                    "{family}/{evaluator}: width {w} was measured at {} size(s); \
                     the linearity check needs at least 2",
                    cells.len()
                )));
            }
        }
        let fit = fit_alpha(&group)?;

        let min_linearity = fit
            .per_width_linearity
            .iter()
            .map(|l| l.r_squared)
            .fold(f64::INFINITY, f64::min);
        let linear_ok = min_linearity >= config.linearity_r2_min;

        // Mean per-gate seconds per width; under the linear model this is
        // size-independent, so unmatched size sets do not bias it.
        let per_gate: Vec<f64> = by_width
            .values()
            .map(|cells| {
                let gs: Vec<f64> = cells.iter().map(|(n, t)| t / *n as f64).collect();
                mean(&gs)
            })
            .collect();
        let mut worst_drop: f64 = 0.0;
        for pair in per_gate.windows(2) {
            if pair[1] < pair[0] {
                worst_drop = worst_drop.max(1.0 - pair[1] / pair[0]);
            }
        }
        let monotonic_ok = worst_drop <= config.monotonic_tolerance;

        let expected = (fit.w_max as f64 / fit.w_min as f64).sqrt();
        let (separation_lo, separation_hi) = (expected / 10.0, expected * 10.0);
        let separation = fit.speedup_ratio;
        let separation_ok = separation >= separation_lo && separation <= separation_hi;

        let accepted = linear_ok && monotonic_ok && separation_ok;
        out.push(Hypothesis1Group {
            family,
            evaluator,
            alpha: fit.alpha,
            min_linearity,
            worst_drop,
            separation,
            separation_lo,
            separation_hi,
            linear_ok,
            monotonic_ok,
            separation_ok,
            accepted,
        });
    }
    Ok(Hypothesis1 {
        id: "H1".into(),
        accepted: out.iter().all(|g| g.accepted),
        config: config.clone(),
        groups: out,
    })
}

/// Speedup ratio of one (family, evaluator) group.
#[derive(Debug, Clone, Serialize)]
pub struct Hypothesis2Group {
    pub family: Family,
    pub evaluator: EvaluatorKind,
    pub speedup_ratio: f64,
}

/// Hypothesis 2: the separation factor is stable across workload families
/// and evaluators. Judged by the coefficient of variation of per-group
/// speedup ratios; the threshold is a heuristic stand-in for a
/// significance test and is recorded in the outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Hypothesis2 {
    pub id: String,
    pub accepted: bool,
    pub cv: f64,
    pub cv_max: f64,
    pub criterion: String,
    pub groups: Vec<Hypothesis2Group>,
}

pub fn hypothesis2(measurements: &[Measurement], cv_max: f64) -> Result<Hypothesis2, BenchError> {
    let groups = split_groups(measurements);
    if groups.len() < 2 {
        return Err(BenchError::InsufficientSpan(format!(
            "dispersion needs at least 2 (family, evaluator) groups, got {}",
            groups.len()
        )));
    }
    let mut out = Vec::new();
    for ((family, evaluator), group) in groups {
        let fit = fit_alpha(&group)?;
        out.push(Hypothesis2Group {
            family,
            evaluator,
            speedup_ratio: fit.speedup_ratio,
        });
    }
    let ratios: Vec<f64> = out.iter().map(|g| g.speedup_ratio).collect();
    let cv = sample_std(&ratios) / mean(&ratios);
    Ok(Hypothesis2 {
        id: "H2".into(),
        accepted: cv <= cv_max,
        cv,
        cv_max,
        criterion: "coefficient of variation of per-group speedup ratios \
                    (heuristic stand-in for a significance test)"
            .into(),
        groups: out,
    })
}

/// One group's fit inside an [`AnalysisReport`].
#[derive(Debug, Clone, Serialize)]
pub struct GroupFit {
    pub family: Family,
    pub evaluator: EvaluatorKind,
    #[serde(flatten)]
    pub fit: CostFit,
}

/// Everything the `fit` command reports: per-group cost fits plus both
/// hypothesis outcomes. A hypothesis that cannot run on the given data
/// (too few groups, too few sizes) degrades to a note instead of failing
/// the whole analysis.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub fits: Vec<GroupFit>,
    pub hypothesis1: Option<Hypothesis1>,
    pub hypothesis1_note: Option<String>,
    pub hypothesis2: Option<Hypothesis2>,
    pub hypothesis2_note: Option<String>,
}

pub fn analyze(
    measurements: &[Measurement],
    config: &Hypothesis1Config,
    cv_max: f64,
) -> Result<AnalysisReport, BenchError> {
    let groups = split_groups(measurements);
    if groups.is_empty() {
        return Err(BenchError::InsufficientSpan("no measurements".into()));
    }
    let mut fits = Vec::new();
    for ((family, evaluator), group) in groups {
        fits.push(GroupFit {
            family,
            evaluator,
            fit: fit_alpha(&group)?,
        });
    }
    let (hypothesis1, hypothesis1_note) = match hypothesis1(measurements, config) {
        Ok(h) => (Some(h), None),
        Err(BenchError::InsufficientSpan(note)) => (None, Some(note)),
        Err(e) => return Err(e),
    };
    let (hypothesis2, hypothesis2_note) = match hypothesis2(measurements, cv_max) {
        Ok(h) => (Some(h), None),
        Err(BenchError::InsufficientSpan(note)) => (None, Some(note)),
        Err(e) => return Err(e),
    };
    Ok(AnalysisReport {
        fits,
        hypothesis1,
        hypothesis1_note,
        hypothesis2,
        hypothesis2_note,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{export_csv, import_csv};
    use super::*;

    const DESK_WIDTHS: [u64; 7] = [5, 10, 50, 100, 500, 1000, 5000];
    const FULL_WIDTHS: [u64; 11] = [
        5, 10, 50, 100, 500, 1000, 5000, 10000, 50000, 100000, 500000,
    ];
    const SIZES: [u64; 3] = [100_000, 1_000_000, 10_000_000];

    /// Noise-free measurements following t = c * n * w^alpha exactly.
    fn power_law(
        family: Family,
        evaluator: EvaluatorKind,
        c: f64,
        alpha: f64,
        widths: &[u64],
        sizes: &[u64],
    ) -> Vec<Measurement> {
        let mut out = Vec::new();
        for &w in widths {
            for &n in sizes {
                let t = c * n as f64 * (w as f64).powf(alpha);
                out.push(Measurement::new(
                    family,
                    n,
                    w,
                    None,
                    0,
                    evaluator,
                    0,
                    t,
                ));
            }
        }
        out
    }

#[test]
    fn statistics_helpers_behave() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((sample_std(&[100.0, 400.0]) - 212.13203435596427).abs() < 1e-9);
        let (slope, intercept, r2) = linear_fit(&[(1.0, 3.0), (2.0, 5.0), (3.0, 7.0)]);
        assert!((slope - 2.0).abs() < 1e-12);
        assert!((intercept - 1.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_the_exponent_exactly_on_noise_free_data() {
        for alpha in [0.0, 0.4, 0.5, 0.65, 0.7, 1.0] {
            let ms = power_law(
                Family::RandomNand,
                EvaluatorKind::Bytewise,
                3.0,
                alpha,
                &FULL_WIDTHS,
                &SIZES,
            );
            let fit = fit_alpha(&ms).unwrap();
            assert!(
                (fit.alpha - alpha).abs() < 1e-9,
                "target {alpha}, fitted {}",
                fit.alpha
            );
            assert!(
                fit.r_squared > 1.0 - 1e-9,
                "target {alpha}: r_squared {}",
                fit.r_squared
            );
            assert!((fit.c / 3.0 - 1.0).abs() < 1e-9);
            assert_eq!(fit.w_min, 5);
            assert_eq!(fit.w_max, 500000);
            assert_eq!(fit.per_width_linearity.len(), FULL_WIDTHS.len());
            for l in &fit.per_width_linearity {
                assert!(l.r_squared > 1.0 - 1e-9, "width {}", l.w);
            }
        }
    }

    #[test]
    fn fitting_is_scale_invariant() {
        let base = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            2.0,
            0.65,
            &DESK_WIDTHS,
            &SIZES,
        );
        let scaled: Vec<Measurement> = base
            .iter()
            .map(|m| {
                Measurement::new(
                    m.family,
                    m.n,
                    m.w,
                    m.d,
                    m.seed,
                    m.evaluator,
                    m.repeat,
                    m.runtime_s * 7.5,
                )
            })
            .collect();
        let f1 = fit_alpha(&base).unwrap();
        let f2 = fit_alpha(&scaled).unwrap();
        assert!((f1.alpha - f2.alpha).abs() < 1e-12);
        assert!((f1.r_squared - f2.r_squared).abs() < 1e-12);
        assert!((f2.c / f1.c / 7.5 - 1.0).abs() < 1e-9);
        assert!((f2.speedup_ratio / f1.speedup_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn speedup_ratio_compares_the_extreme_widths() {
        let full = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            0.5,
            &FULL_WIDTHS,
            &SIZES,
        );
        let fit = fit_alpha(&full).unwrap();
        assert!((fit.speedup_ratio - 316.22776601683796).abs() < 1e-6);

        let desk = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            0.5,
            &DESK_WIDTHS,
            &SIZES,
        );
        let fit = fit_alpha(&desk).unwrap();
        assert!((fit.speedup_ratio - 31.622776601683793).abs() < 1e-8);
    }

    #[test]
    fn perturbed_sizes_still_pair_with_their_nearest_counterparts() {
        // The widest width's instruction counts are offset a little, the
        // way generators round budgets to whole repetition blocks.
        let mut ms = Vec::new();
        for &w in &DESK_WIDTHS {
            for &n in &SIZES {
                let n = if w == 5000 { n + 137 } else { n };
                let t = 1e-9 * n as f64 * (w as f64).sqrt();
                ms.push(Measurement::new(
                    Family::RandomNand,
                    n,
                    w,
                    None,
                    0,
                    EvaluatorKind::Bytewise,
                    0,
                    t,
                ));
            }
        }
        let fit = fit_alpha(&ms).unwrap();
        assert!((fit.speedup_ratio - 31.622776601683793).abs() < 1e-6);
    }

    #[test]
    fn outlier_repeats_median_away() {
        let base = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            0.5,
            &DESK_WIDTHS,
            &SIZES,
        );
        let mut noisy = Vec::new();
        for m in &base {
            for (repeat, scale) in [(0u64, 1.0), (1, 50.0), (2, 1.0)] {
                noisy.push(Measurement::new(
                    m.family,
                    m.n,
                    m.w,
                    m.d,
                    m.seed,
                    m.evaluator,
                    repeat,
                    m.runtime_s * scale,
                ));
            }
        }
        let f1 = fit_alpha(&base).unwrap();
        let f2 = fit_alpha(&noisy).unwrap();
        assert!((f1.alpha - f2.alpha).abs() < 1e-12);
        assert!((f1.speedup_ratio - f2.speedup_ratio).abs() < 1e-12);
    }

    #[test]
    fn too_few_widths_is_an_insufficient_span() {
        let ms = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            0.5,
            &[50, 100],
            &SIZES,
        );
        assert!(matches!(
            fit_alpha(&ms),
            Err(BenchError::InsufficientSpan(_))
        ));
        assert!(matches!(
            fit_alpha(&[]),
            Err(BenchError::InsufficientSpan(_))
        ));
    }

    #[test]
    fn nonlinear_growth_fails_the_linearity_check() {
        // Runtime grows like n^4: wildly superlinear at every width.
        let sizes = [1_000_000u64, 2_000_000, 3_000_000];
        let mut ms = Vec::new();
        for &w in &[5u64, 50, 500] {
            for &n in &sizes {
                let t = 1e-9 * (n as f64 / 1e6).powi(4) * (w as f64).sqrt();
                ms.push(Measurement::new(
                    Family::RandomNand,
                    n,
                    w,
                    None,
                    0,
                    EvaluatorKind::Bytewise,
                    0,
                    t,
                ));
            }
        }
        let fit = fit_alpha(&ms).unwrap();
        for l in &fit.per_width_linearity {
            assert!(l.r_squared < 0.98, "width {} came out linear", l.w);
        }
        let h = hypothesis1(&ms, &Hypothesis1Config::default()).unwrap();
        assert!(!h.accepted);
        assert!(!h.groups[0].linear_ok);
    }

    #[test]
    fn ideal_square_root_scaling_is_accepted() {
        let ms = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            0.5,
            &DESK_WIDTHS,
            &SIZES,
        );
        let h = hypothesis1(&ms, &Hypothesis1Config::default()).unwrap();
        assert!(h.accepted);
        assert_eq!(h.groups.len(), 1);
        let g = &h.groups[0];
        assert!(g.linear_ok && g.monotonic_ok && g.separation_ok);
        assert!((g.alpha - 0.5).abs() < 1e-9);
        assert!((g.separation - 31.622776601683793).abs() < 1e-8);
        assert!((g.separation_lo - 3.1622776601683795).abs() < 1e-12);
        assert!((g.separation_hi - 316.22776601683796).abs() < 1e-10);
        assert_eq!(g.worst_drop, 0.0);
        assert!(g.min_linearity > 0.98);
    }

    #[test]
    fn separation_outside_the_scaled_bounds_is_rejected() {
        // Ideal behavior on the full grid: separation near 316, accepted.
        let ideal = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            0.5,
            &FULL_WIDTHS,
            &SIZES,
        );
        let h = hypothesis1(&ideal, &Hypothesis1Config::default()).unwrap();
        assert!(h.accepted);
        assert!((h.groups[0].separation - 316.22776601683796).abs() < 1e-6);

        // A separation of 20 on the same grid lands below the lower
        // bound of about 31.6 and is rejected.
        let alpha = 20f64.ln() / 100_000f64.ln();
        let low = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            alpha,
            &FULL_WIDTHS,
            &SIZES,
        );
        let h = hypothesis1(&low, &Hypothesis1Config::default()).unwrap();
        let g = &h.groups[0];
        assert!((g.separation - 20.0).abs() < 1e-6);
        assert!(g.linear_ok && g.monotonic_ok);
        assert!(!g.separation_ok);
        assert!(!h.accepted);
    }

    #[test]
    fn per_gate_time_decreasing_beyond_tolerance_is_rejected() {
        let ms = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            -0.2,
            &DESK_WIDTHS,
            &SIZES,
        );
        let h = hypothesis1(&ms, &Hypothesis1Config::default()).unwrap();
        let g = &h.groups[0];
        assert!(!g.monotonic_ok);
        assert!(g.worst_drop > 0.12, "worst drop {}", g.worst_drop);
        assert!(!h.accepted);
    }

    #[test]
    fn small_per_gate_decreases_stay_within_tolerance() {
        // alpha = -0.05: the steepest consecutive width step (a factor of
        // five) drops per-gate time by 1 - 5^-0.05, about 7.7%.
        let ms = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            -0.05,
            &DESK_WIDTHS,
            &SIZES,
        );
        let h = hypothesis1(&ms, &Hypothesis1Config::default()).unwrap();
        let g = &h.groups[0];
        assert!(g.monotonic_ok);
        assert!((g.worst_drop - (1.0 - 5f64.powf(-0.05))).abs() < 1e-9);
    }

    #[test]
    fn a_width_with_one_size_is_an_insufficient_span() {
        let mut ms = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            0.5,
            &DESK_WIDTHS,
            &SIZES,
        );
        ms.retain(|m| !(m.w == 100 && m.n != 1_000_000));
        match hypothesis1(&ms, &Hypothesis1Config::default()) {
            Err(BenchError::InsufficientSpan(note)) => assert!(note.contains("width 100")),
            other => panic!("expected an insufficient span, got {other:?}"),
        }
        // Fitting itself tolerates single-size widths.
        assert!(fit_alpha(&ms).is_ok());
    }

    #[test]
    fn identical_groups_have_zero_dispersion() {
        let mut ms = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            0.5,
            &DESK_WIDTHS,
            &SIZES,
        );
        ms.extend(power_law(
            Family::Password,
            EvaluatorKind::Bitpacked,
            1e-9,
            0.5,
            &DESK_WIDTHS,
            &SIZES,
        ));
        let h = hypothesis2(&ms, DEFAULT_CV_MAX).unwrap();
        assert!(h.accepted);
        assert_eq!(h.cv, 0.0);
        assert_eq!(h.groups.len(), 2);
    }

    #[test]
    fn widely_dispersed_ratios_are_rejected() {
        // Group ratios of 100 and 400: mean 250, sample deviation about
        // 212.13, coefficient of variation about 0.8485.
        let mut ms = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            100f64.ln() / 100_000f64.ln(),
            &FULL_WIDTHS,
            &SIZES,
        );
        ms.extend(power_law(
            Family::RandomNand,
            EvaluatorKind::Bitpacked,
            1e-9,
            400f64.ln() / 100_000f64.ln(),
            &FULL_WIDTHS,
            &SIZES,
        ));
        let h = hypothesis2(&ms, DEFAULT_CV_MAX).unwrap();
        assert!(!h.accepted);
        assert!((h.cv - 0.848528137423857).abs() < 1e-9, "cv {}", h.cv);
    }

    #[test]
    fn a_single_group_cannot_measure_dispersion() {
        let ms = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            0.5,
            &DESK_WIDTHS,
            &SIZES,
        );
        assert!(matches!(
            hypothesis2(&ms, DEFAULT_CV_MAX),
            Err(BenchError::InsufficientSpan(_))
        ));
    }

    #[test]
    fn decisions_reproduce_bit_for_bit_from_exported_csv() {
        let mut ms = power_law(
            Family::RandomNand,
            EvaluatorKind::Bytewise,
            1e-9,
            0.5,
            &DESK_WIDTHS,
            &SIZES,
        );
        ms.extend(power_law(
            Family::Password,
            EvaluatorKind::Bytewise,
            2e-9,
            0.55,
            &DESK_WIDTHS,
            &SIZES,
        ));
        let config = Hypothesis1Config::default();
        let report = analyze(&ms, &config, DEFAULT_CV_MAX).unwrap();
        assert_eq!(report.fits.len(), 2);
        assert!(report.hypothesis1.is_some());
        assert!(report.hypothesis2.is_some());
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("linearity_r2_min"));
        assert!(json.contains("cv_max"));

        let mut buf = Vec::new();
        export_csv(&ms, &mut buf).unwrap();
        let back = import_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ms);
        let replayed = analyze(&back, &config, DEFAULT_CV_MAX).unwrap();
        assert_eq!(json, serde_json::to_string(&replayed).unwrap());
    }

    #[test]
    fn analysis_degrades_gracefully_on_a_single_group() {
        let ms = power_law(
            Family::Password,
            EvaluatorKind::Bytewise,
            1e-9,
            0.5,
            &DESK_WIDTHS,
            &SIZES,
        );
        let report = analyze(&ms, &Hypothesis1Config::default(), DEFAULT_CV_MAX).unwrap();
        assert_eq!(report.fits.len(), 1);
        assert!(report.hypothesis1.is_some());
        assert!(report.hypothesis2.is_none());
        assert!(report.hypothesis2_note.is_some());
    }
}
