//! Monte Carlo coverage experiments: draw samples from laws with known
//! `φ`, apply confidence-set constructors, and tally coverage and
//! diameters.
//!
//! A finite experiment is a witness for the behavior of a method at the
//! laws it visits, not a statement about the whole model.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversarial::{generate_sequence, AdversarialSequence, BaseLawSpec, GenerateOptions};
use crate::confsets::{
    binary_union_set, dn_score_invert, normal_quantile, score_invert_late, wald_ci, Bound, ConfidenceRegion,
    Grouping, Interval, ScoreGrid, UnionConfig, UnionTarget, WaldOptions,
};
use crate::error::{Error, Result};
use crate::functional::FunctionalSpec;
use crate::law::{sample, Dataset, DiscreteLaw};

/// A confidence-set constructor as configured in an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Wald { cross_fit: bool },
    Score { grid: usize },
    Union { grouping: Grouping, split: Option<Vec<f64>> },
    /// Score inversion on the generic estimating function.
    Dn,
    /// Always the full range.
    Full,
    /// Always empty.
    Empty,
    /// `[φ − ε, φ + ε]` around the true value.
    Oracle { eps: f64 },
}

impl Method {
    /// Names accepted by [`Method::parse`].
    pub const NAMES: [&'static str; 8] = ["wald", "wald_cf", "score", "union", "union_separate", "dn", "full", "empty"];

    pub fn parse(name: &str, grid: usize) -> Result<Self> {
        Ok(match name.trim() {
            "wald" => Method::Wald { cross_fit: false },
            "wald_cf" => Method::Wald { cross_fit: true },
            "score" => Method::Score { grid },
            "union" => Method::Union { grouping: Grouping::Combined, split: None },
            "union_separate" => Method::Union { grouping: Grouping::Separate, split: None },
            "dn" => Method::Dn,
            "full" => Method::Full,
            "empty" => Method::Empty,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown method {other:?}; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            Method::Wald { cross_fit: false } => "wald".into(),
            Method::Wald { cross_fit: true } => "wald_cf".into(),
            Method::Score { .. } => "score".into(),
            Method::Union { grouping: Grouping::Combined, .. } => "union".into(),
            Method::Union { grouping: Grouping::Separate, .. } => "union_separate".into(),
            Method::Dn => "dn".into(),
            Method::Full => "full".into(),
            Method::Empty => "empty".into(),
            Method::Oracle { eps } => format!("oracle({eps})"),
        }
    }

    fn check(&self, functional: &FunctionalSpec<f64>, s: Interval) -> Result<()> {
        match self {
            Method::Score { .. } if *functional != FunctionalSpec::Late => {
                Err(Error::InvalidInput("score inversion is implemented for late only".into()))
            }
            Method::Score { .. } if !s.is_bounded() => {
                Err(Error::InvalidInput("score inversion needs a bounded range".into()))
            }
            Method::Union { .. } => union_target(functional).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Applies the method to one sample.
    pub fn apply(
        &self,
        data: &Dataset,
        law: &DiscreteLaw<f64>,
        functional: &FunctionalSpec<f64>,
        true_phi: f64,
        level: f64,
        s: Interval,
    ) -> Result<ConfidenceRegion> {
        let support = law.support();
        match self {
            Method::Wald { cross_fit } => {
                let opts = WaldOptions { cross_fit: *cross_fit, ..Default::default() };
                Ok(wald_ci(data, functional, support, level, s, &opts)?.region)
            }
            Method::Dn => Ok(dn_score_invert(data, functional, support, level, s, &WaldOptions::default())?.region),
            Method::Score { grid } => score_invert_late(data, level, s, ScoreGrid { points: *grid }),
            Method::Union { grouping, split } => {
                let cfg = UnionConfig { target: union_target(functional)?, grouping: *grouping, split: split.clone() };
                Ok(binary_union_set(data, level, s, &cfg)?.region)
            }
            Method::Full => Ok(ConfidenceRegion::FullRange(s)),
            Method::Empty => Ok(ConfidenceRegion::Empty),
            Method::Oracle { eps } => {
                Ok(ConfidenceRegion::from_pieces(vec![Interval { lo: true_phi - eps, hi: true_phi + eps }], s))
            }
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn union_target(functional: &FunctionalSpec<f64>) -> Result<UnionTarget> {
    match functional {
        FunctionalSpec::TreatedMean => Ok(UnionTarget::TreatedMean),
        FunctionalSpec::Late => Ok(UnionTarget::Late),
        other => Err(Error::InvalidInput(format!("the union set is implemented for treated_mean and late, not {}", other.name()))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawCase {
    pub label: String,
    pub law: DiscreteLaw<f64>,
    pub true_phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub laws: Vec<LawCase>,
    pub functional: FunctionalSpec<f64>,
    pub methods: Vec<Method>,
    pub n: usize,
    pub reps: usize,
    /// Confidence level `1 − α`.
    pub level: f64,
    pub seed: u64,
    /// The parameter range `S`.
    pub range: Interval,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 || self.n == 0 {
            return Err(Error::InvalidInput("n and reps must be positive".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidInput(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods".into()));
        }
        for case in &self.laws {
            if !case.true_phi.is_finite() {
                return Err(Error::InvalidInput(format!("law {} has a non-finite φ", case.label)));
            }
            self.functional.check_support(case.law.support())?;
        }
        self.methods.iter().try_for_each(|m| m.check(&self.functional, self.range))
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at law `law`; independent of scheduling.
pub fn replication_seed(master: u64, law: usize, rep: usize) -> u64 {
    mix(mix(mix(master) ^ law as u64) ^ rep as u64)
}

/// Wilson score interval for `hits` successes in `trials`.
pub fn wilson_interval(hits: usize, trials: usize, confidence: f64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z = normal_quantile(0.5 + confidence / 2.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval { lo: (center - half).max(0.0), hi: (center + half).min(1.0) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Outcome {
    covered: bool,
    diameter: f64,
    full: bool,
    error: bool,
}

/// Results for one law and one method.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCell {
    pub label: String,
    pub method: String,
    pub n: usize,
    pub reps: usize,
    pub true_phi: f64,
    /// Replications without error whose region contains `φ`.
    pub hits: usize,
    /// Replications without error whose region misses `φ`.
    pub misses: usize,
    /// Replications where the constructor failed; these count as `S`.
    pub errors: usize,
    pub coverage: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub diam_mean: f64,
    pub diam_p50: f64,
    pub diam_p90: f64,
    pub frac_fullrange: f64,
    pub frac_error: f64,
    /// Fraction of replications with `diam ≥ diam(S)`.
    pub frac_diam_ge_range: f64,
    /// Per-replication diameters in replication order.
    pub diameters: Vec<f64>,
}

impl CoverageCell {
    pub fn wilson_half_width(&self) -> f64 {
        (self.wilson_hi - self.wilson_lo) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub level: f64,
    pub seed: u64,
    pub range: Interval,
    pub cells: Vec<CoverageCell>,
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

fn summarize(label: &str, method: &Method, plan: &ExperimentPlan, true_phi: f64, outcomes: &[Outcome]) -> CoverageCell {
    let reps = outcomes.len();
    let covered = outcomes.iter().filter(|o| o.covered).count();
    let errors = outcomes.iter().filter(|o| o.error).count();
    let hits = outcomes.iter().filter(|o| o.covered && !o.error).count();
    let misses = outcomes.iter().filter(|o| !o.covered && !o.error).count();
    let diameters: Vec<f64> = outcomes.iter().map(|o| o.diameter).collect();
    let mut sorted = diameters.clone();
    sorted.sort_by(f64::total_cmp);
    let r = reps as f64;
    let w = wilson_interval(covered, reps, 0.95);
    let range_diam = plan.range.width();
    CoverageCell {
        label: label.to_string(),
        method: method.name(),
        n: plan.n,
        reps,
        true_phi,
        hits,
        misses,
        errors,
        coverage: covered as f64 / r,
        wilson_lo: w.lo,
        wilson_hi: w.hi,
        diam_mean: sorted.iter().sum::<f64>() / r,
        diam_p50: percentile(&sorted, 0.5),
        diam_p90: percentile(&sorted, 0.9),
        frac_fullrange: outcomes.iter().filter(|o| o.full).count() as f64 / r,
        frac_error: errors as f64 / r,
        frac_diam_ge_range: diameters.iter().filter(|&&d| d >= range_diam).count() as f64 / r,
        diameters,
    }
}

/// Runs every method on `reps` samples of size `n` from every law. Each
/// replication draws one sample shared by all methods. Replications run
/// on the current rayon pool; results do not depend on the thread count.
pub fn run(plan: &ExperimentPlan) -> Result<CoverageReport> {
    plan.validate()?;
    let s = plan.range;
    let mut cells = Vec::with_capacity(plan.laws.len() * plan.methods.len());
    for (li, case) in plan.laws.iter().enumerate() {
        let per_rep: Vec<Vec<Outcome>> = (0..plan.reps)
            .into_par_iter()
            .map(|rep| {
                let data = sample(&case.law, plan.n, replication_seed(plan.seed, li, rep));
                plan.methods
                    .iter()
                    .map(|m| match m.apply(&data, &case.law, &plan.functional, case.true_phi, plan.level, s) {
                        Ok(region) => Outcome {
                            covered: region.contains(case.true_phi),
                            diameter: match &region {
                                ConfidenceRegion::FullRange(_) => s.width(),
                                other => other.diameter(),
                            },
                            full: region.is_full(),
                            error: false,
                        },
                        Err(_) => Outcome { covered: s.contains(case.true_phi), diameter: s.width(), full: true, error: true },
                    })
                    .collect()
            })
            .collect();
        for (mi, method) in plan.methods.iter().enumerate() {
            let outcomes: Vec<Outcome> = per_rep.iter().map(|r| r[mi]).collect();
            cells.push(summarize(&case.label, method, plan, case.true_phi, &outcomes));
        }
    }
    Ok(CoverageReport { level: plan.level, seed: plan.seed, range: s, cells })
}

/// Settings shared by a sweep over an adversarial sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub n: usize,
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
    pub range: Interval,
    pub generate: GenerateOptions<f64>,
}

/// Generates the sequence toward `zeta` and runs the experiment on its
/// laws, labelled `step{k}` in order of decreasing distance to the base.
pub fn weak_dependence_sweep(
    base: &BaseLawSpec<f64>,
    zeta: f64,
    tv_targets: &[f64],
    cfg: &SweepConfig,
) -> Result<(AdversarialSequence<f64>, CoverageReport)> {
    let seq = generate_sequence(base, zeta, tv_targets, &cfg.generate)?;
    let laws = seq
        .steps
        .iter()
        .enumerate()
        .map(|(k, st)| LawCase { label: format!("step{k}"), law: st.law.clone(), true_phi: st.phi_verified })
        .collect();
    let plan = ExperimentPlan {
        laws,
        functional: base.functional().clone(),
        methods: cfg.methods.clone(),
        n: cfg.n,
        reps: cfg.reps,
        level: cfg.level,
        seed: cfg.seed,
        range: cfg.range,
    };
    let report = run(&plan)?;
    Ok((seq, report))
}

pub const CSV_HEADER: [&str; 12] = [
    "label",
    "method",
    "n",
    "reps",
    "coverage",
    "wilson_lo",
    "wilson_hi",
    "diam_mean",
    "diam_p50",
    "diam_p90",
    "frac_fullrange",
    "frac_error",
];

/// One JSON record per cell, with per-replication diameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFile {
    pub label: String,
    pub method: String,
    pub n: usize,
    pub reps: usize,
    pub true_phi: f64,
    pub hits: usize,
    pub misses: usize,
    pub errors: usize,
    pub coverage: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub diam_mean: Bound,
    pub diam_p50: Bound,
    pub diam_p90: Bound,
    pub frac_fullrange: f64,
    pub frac_error: f64,
    pub frac_diam_ge_range: f64,
    pub diameters: Vec<Bound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub level: f64,
    pub seed: u64,
    pub range: [Bound; 2],
    pub cells: Vec<CellFile>,
}

impl CoverageReport {
    pub fn cell(&self, label: &str, method: &str) -> Option<&CoverageCell> {
        self.cells.iter().find(|c| c.label == label && c.method == method)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for c in &self.cells {
            w.write_record([
                c.label.clone(),
                c.method.clone(),
                c.n.to_string(),
                c.reps.to_string(),
                c.coverage.to_string(),
                c.wilson_lo.to_string(),
                c.wilson_hi.to_string(),
                c.diam_mean.to_string(),
                c.diam_p50.to_string(),
                c.diam_p90.to_string(),
                c.frac_fullrange.to_string(),
                c.frac_error.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_file(&self) -> ReportFile {
        ReportFile {
            level: self.level,
            seed: self.seed,
            range: [Bound(self.range.lo), Bound(self.range.hi)],
            cells: self
                .cells
                .iter()
                .map(|c| CellFile {
                    label: c.label.clone(),
                    method: c.method.clone(),
                    n: c.n,
                    reps: c.reps,
                    true_phi: c.true_phi,
                    hits: c.hits,
                    misses: c.misses,
                    errors: c.errors,
                    coverage: c.coverage,
                    wilson_lo: c.wilson_lo,
                    wilson_hi: c.wilson_hi,
                    diam_mean: Bound(c.diam_mean),
                    diam_p50: Bound(c.diam_p50),
                    diam_p90: Bound(c.diam_p90),
                    frac_fullrange: c.frac_fullrange,
                    frac_error: c.frac_error,
                    frac_diam_ge_range: c.frac_diam_ge_range,
                    diameters: c.diameters.iter().map(|&d| Bound(d)).collect(),
                })
                .collect(),
        }
    }
}
