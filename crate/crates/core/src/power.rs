//! Monte Carlo power comparison of the five statistics.
//!
//! Unrelated pairs give the null distribution of each statistic, from which
//! an empirical upper-`alpha` threshold is read; related pairs then give the
//! power as the fraction exceeding it. All statistics are handled as natural
//! log LRs, and every pair draws from its own `(seed, domain, index)` random
//! stream so the result does not depend on the thread count.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;

use crate::classify::NaiveBayes;
use crate::error::{Error, Result};
use crate::freqdata::AlleleFrequencyTable;
use crate::kinship::{LrCalculator, PairClassifier, Statistic};
use crate::rng::{substream, Domain};
use crate::simulate::{ProfileSampler, RelationshipTheta};

/// Default false positive rate for parent-child tests.
pub const DEFAULT_ALPHA_PC: f64 = 1.7e-5;
/// Default false positive rate for full-sibling tests.
pub const DEFAULT_ALPHA_SB: f64 = 1.2e-5;

// guards alpha * n against representation error (0.05 * 100 = 5.000000000000001)
const COUNT_SLACK: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SimulationPlan<'a> {
    pub table: &'a AlleleFrequencyTable<f64>,
    /// Relationship in the LR numerator.
    pub theta1: RelationshipTheta,
    /// Relationship used to generate the alternative pairs; usually
    /// `theta1`. When unrelated, alternative pairs are generated exactly like
    /// null pairs (independent subpopulations).
    pub alt_theta: RelationshipTheta,
    pub replicates_null: usize,
    pub replicates_alt: usize,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub statistics: Vec<Statistic>,
}

impl<'a> SimulationPlan<'a> {
    pub fn new(table: &'a AlleleFrequencyTable<f64>, theta1: RelationshipTheta, seed: u64) -> Self {
        SimulationPlan {
            table,
            theta1,
            alt_theta: theta1,
            replicates_null: 1_000_000,
            replicates_alt: 1_000_000,
            alphas: vec![default_alpha(&theta1)],
            seed,
            statistics: Statistic::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates_null == 0 || self.replicates_alt == 0 {
            return Err(Error::validation("replicate counts must be at least 1"));
        }
        if self.statistics.is_empty() {
            return Err(Error::validation("no statistics selected"));
        }
        for &alpha in &self.alphas {
            if !(alpha > 0.0 && alpha < 0.5) {
                return Err(Error::validation(format!("alpha {alpha} outside (0, 0.5)")));
            }
            exceedance_budget(alpha, self.replicates_null)?;
        }
        Ok(())
    }
}

/// The suggested false positive rate for a relationship: parent-child and
/// full-sibling get their published defaults, anything else the stricter.
pub fn default_alpha(theta: &RelationshipTheta) -> f64 {
    if *theta == RelationshipTheta::full_sibling() {
        DEFAULT_ALPHA_SB
    } else {
        DEFAULT_ALPHA_PC
    }
}

/// Raises `alpha` to `1/n` when `n` null samples cannot resolve it.
pub fn scale_alpha(alpha: f64, n: usize) -> f64 {
    let floor = 1.0 / n as f64;
    if alpha * n as f64 + COUNT_SLACK < 1.0 {
        warn!("alpha {alpha} needs more than {n} null samples; using {floor}");
        floor
    } else {
        alpha
    }
}

fn exceedance_budget(alpha: f64, n: usize) -> Result<usize> {
    let k = (alpha * n as f64 + COUNT_SLACK).floor() as usize;
    if k == 0 {
        return Err(Error::InsufficientSamples {
            alpha,
            n,
            needed: (1.0 / alpha).ceil() as usize,
        });
    }
    Ok(k)
}

/// Empirical upper-`alpha` quantile of sorted null samples: the value at
/// 1-based rank `ceil((1 - alpha) n)`. Rejection is `statistic > threshold`,
/// so at most `floor(alpha n)` null samples exceed it.
pub fn estimate_threshold(sorted: &[f64], alpha: f64) -> Result<f64> {
    let n = sorted.len();
    let k = exceedance_budget(alpha, n)?;
    Ok(sorted[n - k - 1])
}

/// Which hypothesis a pair was generated under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

/// The five log-LRs of one simulated pair, in [`Statistic::ALL`] order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairRecord {
    pub log_lr: [f64; 5],
    pub class_index: u32,
}

fn simulate_records(
    plan: &SimulationPlan<'_>,
    hypothesis: Hypothesis,
    classifier: &(dyn PairClassifier<f64> + Sync),
) -> Result<Vec<PairRecord>> {
    let sampler = ProfileSampler::new(plan.table);
    let calculator = LrCalculator::new(plan.table);
    let (n, domain) = match hypothesis {
        Hypothesis::H0 => (plan.replicates_null, Domain::NullPairs),
        Hypothesis::H1 => (plan.replicates_alt, Domain::AltPairs),
    };
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(plan.seed, domain, i);
            let pair = if hypothesis == Hypothesis::H0 || plan.alt_theta.is_unrelated() {
                sampler.simulate_unrelated_pair(&mut rng)
            } else {
                sampler.simulate_related_pair(&plan.alt_theta, &mut rng)
            };
            let set = calculator
                .compute(&pair.profile_1, &pair.profile_2, &plan.theta1, classifier)
                .map_err(|e| Error::Replay {
                    pair_index: i,
                    seed: plan.seed,
                    source: Box::new(e),
                })?;
            let mut log_lr = [0.0; 5];
            for (slot, s) in log_lr.iter_mut().zip(Statistic::ALL) {
                *slot = set.log(s);
            }
            Ok(PairRecord {
                log_lr,
                class_index: set.class_index as u32,
            })
        })
        .collect()
}

/// Per-statistic log-LR samples, each sorted ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub hypothesis: Hypothesis,
    pub statistics: Vec<Statistic>,
    pub sorted: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn from_records(hypothesis: Hypothesis, statistics: &[Statistic], records: &[PairRecord]) -> Self {
        let sorted = statistics
            .iter()
            .map(|&s| {
                let slot = Statistic::ALL.iter().position(|&t| t == s).expect("known statistic");
                let mut v: Vec<f64> = records.iter().map(|r| r.log_lr[slot]).collect();
                v.sort_by(f64::total_cmp);
                v
            })
            .collect();
        SampleSet {
            hypothesis,
            statistics: statistics.to_vec(),
            sorted,
        }
    }

    pub fn samples(&self, statistic: Statistic) -> Option<&[f64]> {
        self.statistics
            .iter()
            .position(|&s| s == statistic)
            .map(|i| self.sorted[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.sorted.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of samples strictly above `threshold`.
    pub fn exceedances(&self, statistic: Statistic, threshold: f64) -> usize {
        let v = self.samples(statistic).expect("statistic in sample set");
        v.len() - v.partition_point(|&x| x <= threshold)
    }
}

/// Null distribution: unrelated pairs, subpopulations drawn independently.
pub fn run_null_distribution(
    plan: &SimulationPlan<'_>,
    classifier: &(dyn PairClassifier<f64> + Sync),
) -> Result<SampleSet> {
    plan.validate()?;
    let records = simulate_records(plan, Hypothesis::H0, classifier)?;
    Ok(SampleSet::from_records(Hypothesis::H0, &plan.statistics, &records))
}

/// Alternative distribution: pairs related through `plan.alt_theta`.
pub fn run_alt_distribution(
    plan: &SimulationPlan<'_>,
    classifier: &(dyn PairClassifier<f64> + Sync),
) -> Result<SampleSet> {
    plan.validate()?;
    let records = simulate_records(plan, Hypothesis::H1, classifier)?;
    Ok(SampleSet::from_records(Hypothesis::H1, &plan.statistics, &records))
}

/// Raw per-pair records, for the batch LR CSV.
pub fn run_records(
    plan: &SimulationPlan<'_>,
    hypothesis: Hypothesis,
    classifier: &(dyn PairClassifier<f64> + Sync),
) -> Result<Vec<PairRecord>> {
    plan.validate()?;
    simulate_records(plan, hypothesis, classifier)
}

/// 95%-style exact (Clopper-Pearson) interval for `successes / trials`.
pub fn clopper_pearson(successes: usize, trials: usize, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let tail = (1.0 - confidence) / 2.0;
    let x = successes as f64;
    let n = trials as f64;
    let lo = if successes == 0 {
        0.0
    } else {
        inv_beta_reg(x, n - x + 1.0, tail)
    };
    let hi = if successes == trials {
        1.0
    } else {
        inv_beta_reg(x + 1.0, n - x, 1.0 - tail)
    };
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub statistic: Statistic,
    pub alpha: f64,
    /// Natural-log threshold.
    pub threshold: f64,
    /// Null samples above the threshold.
    pub null_exceedances: usize,
    pub replicates_null: usize,
}

impl ThresholdEntry {
    pub fn threshold_log10(&self) -> f64 {
        self.threshold / std::f64::consts::LN_10
    }

    pub fn realized_fpr(&self) -> f64 {
        self.null_exceedances as f64 / self.replicates_null as f64
    }
}

/// Thresholds for every (statistic, alpha) of the plan.
pub fn estimate_thresholds(null: &SampleSet, alphas: &[f64]) -> Result<Vec<ThresholdEntry>> {
    let mut out = Vec::new();
    for &s in &null.statistics {
        let samples = null.samples(s).expect("statistic present");
        for &alpha in alphas {
            let threshold = estimate_threshold(samples, alpha)?;
            out.push(ThresholdEntry {
                statistic: s,
                alpha,
                threshold,
                null_exceedances: null.exceedances(s, threshold),
                replicates_null: null.len(),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerEntry {
    pub statistic: Statistic,
    pub alpha: f64,
    pub threshold: f64,
    pub threshold_log10: f64,
    pub exceedances: usize,
    pub replicates_alt: usize,
    pub power: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

fn power_entry(alt: &SampleSet, statistic: Statistic, alpha: f64, threshold: f64) -> PowerEntry {
    let n = alt.len();
    let exceedances = alt.exceedances(statistic, threshold);
    let (ci_lo, ci_hi) = clopper_pearson(exceedances, n, 0.95);
    PowerEntry {
        statistic,
        alpha,
        threshold,
        threshold_log10: threshold / std::f64::consts::LN_10,
        exceedances,
        replicates_alt: n,
        power: exceedances as f64 / n as f64,
        ci_lo,
        ci_hi,
    }
}

/// One grid point of an FPR sweep; `error` is set when the null sample is
/// too small for that alpha.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub statistic: Statistic,
    pub alpha: f64,
    pub entry: Option<PowerEntry>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub theta1: RelationshipTheta,
    pub alt_theta: RelationshipTheta,
    pub seed: u64,
    pub replicates_null: usize,
    pub replicates_alt: usize,
    pub thresholds: Vec<ThresholdEntry>,
    pub powers: Vec<PowerEntry>,
    pub sweep: Vec<SweepRow>,
}

impl PowerReport {
    pub fn power(&self, statistic: Statistic, alpha: f64) -> Option<&PowerEntry> {
        self.powers
            .iter()
            .find(|e| e.statistic == statistic && e.alpha == alpha)
    }

    /// Curves CSV: `statistic,alpha,threshold_log10,power,ci_lo,ci_hi`.
    /// Sweep rows without an estimate are left out.
    pub fn write_curves(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "statistic,alpha,threshold_log10,power,ci_lo,ci_hi")?;
        for row in &self.sweep {
            if let Some(e) = &row.entry {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    e.statistic.name(),
                    e.alpha,
                    e.threshold_log10,
                    e.power,
                    e.ci_lo,
                    e.ci_hi
                )?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Simulates the alternative pairs and reads off power at each threshold.
pub fn estimate_power(
    plan: &SimulationPlan<'_>,
    thresholds: &[ThresholdEntry],
    classifier: &(dyn PairClassifier<f64> + Sync),
) -> Result<PowerReport> {
    let alt = run_alt_distribution(plan, classifier)?;
    Ok(assemble_report(plan, thresholds.to_vec(), &alt, Vec::new()))
}

fn assemble_report(
    plan: &SimulationPlan<'_>,
    thresholds: Vec<ThresholdEntry>,
    alt: &SampleSet,
    sweep: Vec<SweepRow>,
) -> PowerReport {
    let powers = thresholds
        .iter()
        .map(|t| power_entry(alt, t.statistic, t.alpha, t.threshold))
        .collect();
    PowerReport {
        theta1: plan.theta1,
        alt_theta: plan.alt_theta,
        seed: plan.seed,
        replicates_null: plan.replicates_null,
        replicates_alt: plan.replicates_alt,
        thresholds,
        powers,
        sweep,
    }
}

/// Thresholds and powers along an alpha grid, reusing one pair of sample
/// sets.
pub fn sweep_fpr(null: &SampleSet, alt: &SampleSet, alpha_grid: &[f64]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &s in &null.statistics {
        let samples = null.samples(s).expect("statistic present");
        for &alpha in alpha_grid {
            rows.push(match estimate_threshold(samples, alpha) {
                Ok(threshold) => SweepRow {
                    statistic: s,
                    alpha,
                    entry: Some(power_entry(alt, s, alpha, threshold)),
                    error: None,
                },
                Err(e) => {
                    warn!("sweep point {} alpha={alpha}: {e}", s.name());
                    SweepRow {
                        statistic: s,
                        alpha,
                        entry: None,
                        error: Some(e.to_string()),
                    }
                }
            });
        }
    }
    rows
}

/// Parses `lo:hi:steps` into an evenly spaced grid including both ends.
pub fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::validation(format!("sweep {text:?} is not lo:hi:steps"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if steps == 0 || !(lo > 0.0) || hi < lo {
        return Err(bad());
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect())
}

/// The whole pipeline: null run, thresholds, alternative run, powers and
/// an optional sweep. LRCLASS uses `classifier`.
pub fn run_power_analysis_with(
    plan: &SimulationPlan<'_>,
    sweep_grid: Option<&[f64]>,
    classifier: &(dyn PairClassifier<f64> + Sync),
) -> Result<(PowerReport, SampleSet, SampleSet)> {
    let null = run_null_distribution(plan, classifier)?;
    let alt = run_alt_distribution(plan, classifier)?;
    let report = build_report(plan, &null, &alt, sweep_grid)?;
    Ok((report, null, alt))
}

/// Thresholds, powers and the optional sweep from already simulated samples.
pub fn build_report(
    plan: &SimulationPlan<'_>,
    null: &SampleSet,
    alt: &SampleSet,
    sweep_grid: Option<&[f64]>,
) -> Result<PowerReport> {
    let thresholds = estimate_thresholds(null, &plan.alphas)?;
    let sweep = sweep_grid.map_or_else(Vec::new, |g| sweep_fpr(null, alt, g));
    Ok(assemble_report(plan, thresholds, alt, sweep))
}

/// [`run_power_analysis_with`] using Naive Bayes for LRCLASS.
pub fn run_power_analysis(
    plan: &SimulationPlan<'_>,
    sweep_grid: Option<&[f64]>,
) -> Result<PowerReport> {
    let nb = NaiveBayes::new(plan.table);
    Ok(run_power_analysis_with(plan, sweep_grid, &nb)?.0)
}
