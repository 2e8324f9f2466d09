//! Joint genotype probabilities under an IBD relationship and the five
//! likelihood-ratio statistics.
//!
//! For a locus with allele frequencies `p`, a relationship `(z0, z1, z2)`
//! and genotypes `G1`, `G2`:
//!
//! ```text
//! P(G1, G2) = z0 P(G1) P(G2) + z1 P(G1) T(G2 | G1) + z2 P(G1) [G1 == G2]
//! ```
//!
//! `P` is the Hardy-Weinberg genotype probability and `T` the one-IBD
//! transition: one allele of `G1`, picked uniformly from its two slots, is
//! passed on and the other allele of `G2` is drawn from `p`. This matches the
//! sampling in [`crate::simulate::ProfileSampler::simulate_related_pair`].

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freqdata::{AlleleFrequencyTable, LocusDistribution};
use crate::num::{log_sum_exp, Scalar};
use crate::simulate::{Genotype, IndexedProfile, RelationshipTheta};

/// Hardy-Weinberg probability of an index genotype: `p^2` or `2pq`.
pub fn hwe_prob<T: Scalar>(g: [u16; 2], freqs: &[T]) -> T {
    let p = freqs[g[0] as usize];
    if g[0] == g[1] {
        p * p
    } else {
        T::two() * p * freqs[g[1] as usize]
    }
}

// P(G2 | one allele of G2 is `shared`, the other drawn from freqs)
fn given_shared<T: Scalar>(g2: [u16; 2], shared: u16, freqs: &[T]) -> T {
    let [c, d] = g2;
    if c == d {
        if c == shared {
            freqs[c as usize]
        } else {
            T::zero()
        }
    } else {
        let mut t = T::zero();
        if c == shared {
            t = t + freqs[d as usize];
        }
        if d == shared {
            t = t + freqs[c as usize];
        }
        t
    }
}

/// One-IBD transition probability `T(G2 | G1)`.
pub fn one_ibd_transition<T: Scalar>(g1: [u16; 2], g2: [u16; 2], freqs: &[T]) -> T {
    if g1[0] == g1[1] {
        given_shared(g2, g1[0], freqs)
    } else {
        T::half() * (given_shared(g2, g1[0], freqs) + given_shared(g2, g1[1], freqs))
    }
}

/// `P(G1, G2 | theta)` on index genotypes.
pub fn joint_prob_indexed<T: Scalar>(
    g1: [u16; 2],
    g2: [u16; 2],
    theta: &RelationshipTheta<T>,
    freqs: &[T],
) -> T {
    let p1 = hwe_prob(g1, freqs);
    let mut inner = T::zero();
    if theta.z0() != T::zero() {
        inner = inner + theta.z0() * hwe_prob(g2, freqs);
    }
    if theta.z1() != T::zero() {
        inner = inner + theta.z1() * one_ibd_transition(g1, g2, freqs);
    }
    if theta.z2() != T::zero() && g1 == g2 {
        inner = inner + theta.z2();
    }
    p1 * inner
}

/// `P(G1, G2 | theta)` for labelled genotypes at one locus.
pub fn joint_genotype_prob<T: Scalar>(
    g1: &Genotype,
    g2: &Genotype,
    theta: &RelationshipTheta<T>,
    locus: LocusDistribution<'_, T>,
) -> Result<T> {
    let index = |g: &Genotype| -> Result<[u16; 2]> {
        Ok([locus.index_of(g.first())? as u16, locus.index_of(g.second())? as u16])
    };
    Ok(joint_prob_indexed(index(g1)?, index(g2)?, theta, locus.freqs))
}

/// `ln P(X1, X2 | theta, f_subpop)`: the per-locus joint probabilities
/// multiplied across loci, accumulated in log space. May be `-inf`.
pub fn pair_likelihood<T: Scalar + Float>(
    x1: &IndexedProfile,
    x2: &IndexedProfile,
    theta: &RelationshipTheta<T>,
    table: &AlleleFrequencyTable<T>,
    subpop: usize,
) -> T {
    x1.genotypes()
        .iter()
        .zip(x2.genotypes())
        .zip(table.loci())
        .fold(T::zero(), |acc, ((&g1, &g2), locus)| {
            acc + joint_prob_indexed(g1, g2, theta, locus.freqs(subpop)).ln()
        })
}

/// Per-locus `ln(P(G1,G2 | theta1) / P(G1,G2 | unrelated))`.
///
/// The common `P(G1)` factor cancels, leaving
/// `z0 + (z1 T(G2|G1) + z2 [G1 == G2]) / P(G2)`.
fn locus_log_ratio<T: Scalar + Float>(
    g1: [u16; 2],
    g2: [u16; 2],
    theta: &RelationshipTheta<T>,
    freqs: &[T],
) -> Option<T> {
    let p2 = hwe_prob(g2, freqs);
    if !(p2 > T::zero()) {
        return None;
    }
    let mut related = T::zero();
    if theta.z1() != T::zero() {
        related = related + theta.z1() * one_ibd_transition(g1, g2, freqs);
    }
    if theta.z2() != T::zero() && g1 == g2 {
        related = related + theta.z2();
    }
    Some((theta.z0() + related / p2).ln())
}

/// Natural-log LR of `theta1` against unrelated, using subpopulation
/// `subpop`'s frequencies.
pub fn log_lr<T: Scalar + Float>(
    x1: &IndexedProfile,
    x2: &IndexedProfile,
    theta1: &RelationshipTheta<T>,
    table: &AlleleFrequencyTable<T>,
    subpop: usize,
) -> Result<T> {
    let mut total = T::zero();
    for ((&g1, &g2), locus) in x1.genotypes().iter().zip(x2.genotypes()).zip(table.loci()) {
        total = total
            + locus_log_ratio(g1, g2, theta1, locus.freqs(subpop))
                .ok_or(Error::DegenerateRatio { subpop })?;
    }
    Ok(total)
}

/// The five statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Statistic {
    #[serde(rename = "LRLAF")]
    Laf,
    #[serde(rename = "LRAVG")]
    Avg,
    #[serde(rename = "LRMAX")]
    Max,
    #[serde(rename = "LRMIN")]
    Min,
    #[serde(rename = "LRCLASS")]
    Class,
}

impl Statistic {
    pub const ALL: [Statistic; 5] = [
        Statistic::Laf,
        Statistic::Avg,
        Statistic::Max,
        Statistic::Min,
        Statistic::Class,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Laf => "LRLAF",
            Statistic::Avg => "LRAVG",
            Statistic::Max => "LRMAX",
            Statistic::Min => "LRMIN",
            Statistic::Class => "LRCLASS",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim().to_ascii_uppercase();
        let t = t.strip_prefix("LR").unwrap_or(&t);
        match t {
            "LAF" => Ok(Statistic::Laf),
            "AVG" => Ok(Statistic::Avg),
            "MAX" => Ok(Statistic::Max),
            "MIN" => Ok(Statistic::Min),
            "CLASS" => Ok(Statistic::Class),
            _ => Err(Error::InvalidArgument(format!("unknown statistic {text:?}"))),
        }
    }
}

/// All five statistics for one pair, stored as natural logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrResultSet<T = f64> {
    pub log_lr_laf: T,
    pub log_lr_avg: T,
    pub log_lr_max: T,
    pub log_lr_min: T,
    pub log_lr_class: T,
    /// Subpopulation picked by the pair classifier.
    pub class_index: usize,
    pub log_per_subpop: Vec<T>,
}

impl<T: Float> LrResultSet<T> {
    pub fn log(&self, statistic: Statistic) -> T {
        match statistic {
            Statistic::Laf => self.log_lr_laf,
            Statistic::Avg => self.log_lr_avg,
            Statistic::Max => self.log_lr_max,
            Statistic::Min => self.log_lr_min,
            Statistic::Class => self.log_lr_class,
        }
    }

    pub fn lr(&self, statistic: Statistic) -> T {
        self.log(statistic).exp()
    }

    pub fn lr_laf(&self) -> T {
        self.log_lr_laf.exp()
    }

    pub fn lr_avg(&self) -> T {
        self.log_lr_avg.exp()
    }

    pub fn lr_max(&self) -> T {
        self.log_lr_max.exp()
    }

    pub fn lr_min(&self) -> T {
        self.log_lr_min.exp()
    }

    pub fn lr_class(&self) -> T {
        self.log_lr_class.exp()
    }

    pub fn per_subpop_lr(&self) -> Vec<T> {
        self.log_per_subpop.iter().map(|l| l.exp()).collect()
    }
}

/// Picks the subpopulation used by LRCLASS.
pub trait PairClassifier<T> {
    fn classify_pair(&self, x1: &IndexedProfile, x2: &IndexedProfile) -> Result<usize>;
}

impl<T, C: PairClassifier<T> + ?Sized> PairClassifier<T> for &C {
    fn classify_pair(&self, x1: &IndexedProfile, x2: &IndexedProfile) -> Result<usize> {
        (**self).classify_pair(x1, x2)
    }
}

/// Computes [`LrResultSet`]s against one table, holding the pooled table
/// and log priors so they are built once.
#[derive(Clone, Debug)]
pub struct LrCalculator<'a, T> {
    table: &'a AlleleFrequencyTable<T>,
    pooled: AlleleFrequencyTable<T>,
    log_priors: Vec<T>,
}

impl<'a, T: Scalar + Float> LrCalculator<'a, T> {
    pub fn new(table: &'a AlleleFrequencyTable<T>) -> Self {
        LrCalculator {
            table,
            pooled: table.pooled_distribution(),
            log_priors: table.priors().iter().map(|p| p.ln()).collect(),
        }
    }

    pub fn table(&self) -> &AlleleFrequencyTable<T> {
        self.table
    }

    pub fn compute<C: PairClassifier<T> + ?Sized>(
        &self,
        x1: &IndexedProfile,
        x2: &IndexedProfile,
        theta1: &RelationshipTheta<T>,
        classifier: &C,
    ) -> Result<LrResultSet<T>> {
        let r = self.table.n_subpops();
        let log_per_subpop = (0..r)
            .map(|s| log_lr(x1, x2, theta1, self.table, s))
            .collect::<Result<Vec<T>>>()?;
        let log_lr_laf = log_lr(x1, x2, theta1, &self.pooled, 0)?;
        let log_lr_max = log_per_subpop.iter().copied().fold(T::neg_infinity(), T::max);
        let log_lr_min = log_per_subpop.iter().copied().fold(T::infinity(), T::min);
        let weighted: Vec<T> = self
            .log_priors
            .iter()
            .zip(&log_per_subpop)
            .map(|(&lp, &l)| lp + l)
            .collect();
        // a prior-weighted mean lies between the extremes; clamp rounding
        let log_lr_avg = log_sum_exp(&weighted).max(log_lr_min).min(log_lr_max);
        let class_index = classifier.classify_pair(x1, x2)?;
        if class_index >= r {
            return Err(Error::InvalidArgument(format!(
                "classifier returned subpopulation {class_index} of {r}"
            )));
        }
        Ok(LrResultSet {
            log_lr_laf,
            log_lr_avg,
            log_lr_max,
            log_lr_min,
            log_lr_class: log_per_subpop[class_index],
            class_index,
            log_per_subpop,
        })
    }
}

/// One-shot form of [`LrCalculator::compute`].
pub fn compute_lr_set<T: Scalar + Float, C: PairClassifier<T> + ?Sized>(
    x1: &IndexedProfile,
    x2: &IndexedProfile,
    theta1: &RelationshipTheta<T>,
    table: &AlleleFrequencyTable<T>,
    classifier: &C,
) -> Result<LrResultSet<T>> {
    LrCalculator::new(table).compute(x1, x2, theta1, classifier)
}
