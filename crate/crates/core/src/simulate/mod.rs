//! DNA profiles and the IBD simulation model.
//!
//! Profiles exist in two forms: [`DnaProfile`] carries allele labels and is
//! what files and classifiers see; [`IndexedProfile`] carries allele indices
//! into a specific [`AlleleFrequencyTable`] and is what the likelihood code and
//! the simulator use.

mod io;

pub use io::{read_labeled_profiles, write_labeled_profiles, write_pair_dump, LabeledProfile};

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freqdata::{AlleleFrequencyTable, AlleleLabel};
use crate::num::Scalar;

/// Tolerance on `z0 + z1 + z2 = 1`.
pub const THETA_SUM_TOLERANCE: f64 = 1e-12;

/// An unordered allele pair, stored sorted so that `(a,b) == (b,a)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genotype {
    a: AlleleLabel,
    b: AlleleLabel,
}

impl Genotype {
    pub fn new(x: AlleleLabel, y: AlleleLabel) -> Self {
        if y < x {
            Genotype { a: y, b: x }
        } else {
            Genotype { a: x, b: y }
        }
    }

    pub fn parse(x: &str, y: &str) -> Result<Self> {
        Ok(Genotype::new(AlleleLabel::new(x)?, AlleleLabel::new(y)?))
    }

    pub fn first(&self) -> &AlleleLabel {
        &self.a
    }

    pub fn second(&self) -> &AlleleLabel {
        &self.b
    }

    pub fn is_homozygous(&self) -> bool {
        self.a == self.b
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.a, self.b)
    }
}

/// One individual's genotypes, in the locus order of the governing table.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DnaProfile {
    genotypes: Vec<Genotype>,
}

impl DnaProfile {
    pub fn new(genotypes: Vec<Genotype>) -> Self {
        DnaProfile { genotypes }
    }

    /// Builds a profile from `(allele, allele)` string pairs.
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Result<Self> {
        pairs
            .iter()
            .map(|(x, y)| Genotype::parse(x, y))
            .collect::<Result<Vec<_>>>()
            .map(DnaProfile::new)
    }

    pub fn genotypes(&self) -> &[Genotype] {
        &self.genotypes
    }

    pub fn n_loci(&self) -> usize {
        self.genotypes.len()
    }
}

/// A profile resolved against a table: `alleles[locus] = [i, j]` with
/// `i <= j` indexing that locus's sorted allele support.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexedProfile {
    alleles: Vec<[u16; 2]>,
}

impl IndexedProfile {
    pub fn from_indices(mut alleles: Vec<[u16; 2]>) -> Self {
        for g in &mut alleles {
            g.sort_unstable();
        }
        IndexedProfile { alleles }
    }

    /// Looks every allele up in `table`; fails on the first allele outside
    /// a locus's support.
    pub fn resolve<T: Scalar>(profile: &DnaProfile, table: &AlleleFrequencyTable<T>) -> Result<Self> {
        if profile.n_loci() != table.n_loci() {
            return Err(Error::validation(format!(
                "profile has {} loci, table has {}",
                profile.n_loci(),
                table.n_loci()
            )));
        }
        let alleles = profile
            .genotypes
            .iter()
            .zip(table.loci())
            .map(|(g, locus)| {
                let dist = locus.distribution(0);
                let i = dist.index_of(&g.a)? as u16;
                let j = dist.index_of(&g.b)? as u16;
                Ok([i, j])
            })
            .collect::<Result<Vec<_>>>()?;
        // label order and index order agree, so this is already canonical
        Ok(IndexedProfile { alleles })
    }

    pub fn to_profile<T: Scalar>(&self, table: &AlleleFrequencyTable<T>) -> DnaProfile {
        DnaProfile::new(
            self.alleles
                .iter()
                .zip(table.loci())
                .map(|(&[i, j], locus)| {
                    let alleles = locus.alleles();
                    Genotype::new(alleles[i as usize].clone(), alleles[j as usize].clone())
                })
                .collect(),
        )
    }

    pub fn genotypes(&self) -> &[[u16; 2]] {
        &self.alleles
    }

    pub fn n_loci(&self) -> usize {
        self.alleles.len()
    }
}

/// IBD-sharing probabilities `(z0, z1, z2)` of a relationship.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationshipTheta<T = f64> {
    z0: T,
    z1: T,
    z2: T,
}

impl<T: Scalar> RelationshipTheta<T> {
    pub fn new(z0: T, z1: T, z2: T) -> Result<Self> {
        for (name, z) in [("z0", z0), ("z1", z1), ("z2", z2)] {
            let v = z.as_f64();
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("{name} = {v} outside [0, 1]")));
            }
        }
        let sum = z0.as_f64() + z1.as_f64() + z2.as_f64();
        if (sum - 1.0).abs() > THETA_SUM_TOLERANCE {
            return Err(Error::validation(format!("theta sums to {sum}, expected 1")));
        }
        Ok(RelationshipTheta { z0, z1, z2 })
    }

    pub fn unrelated() -> Self {
        RelationshipTheta {
            z0: T::one(),
            z1: T::zero(),
            z2: T::zero(),
        }
    }

    pub fn parent_child() -> Self {
        RelationshipTheta {
            z0: T::zero(),
            z1: T::one(),
            z2: T::zero(),
        }
    }

    pub fn full_sibling() -> Self {
        let quarter = T::half() * T::half();
        RelationshipTheta {
            z0: quarter,
            z1: T::half(),
            z2: quarter,
        }
    }

    pub fn z0(&self) -> T {
        self.z0
    }

    pub fn z1(&self) -> T {
        self.z1
    }

    pub fn z2(&self) -> T {
        self.z2
    }

    /// True for `(1, 0, 0)`.
    pub fn is_unrelated(&self) -> bool {
        self.z1 == T::zero() && self.z2 == T::zero()
    }

    /// `alpha * a + (1 - alpha) * b`.
    pub fn mix(alpha: T, a: &Self, b: &Self) -> Self {
        let beta = T::one() - alpha;
        RelationshipTheta {
            z0: alpha * a.z0 + beta * b.z0,
            z1: alpha * a.z1 + beta * b.z1,
            z2: alpha * a.z2 + beta * b.z2,
        }
    }
}

impl RelationshipTheta<f64> {
    /// Parses `z0,z1,z2`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts = text
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::validation(format!("theta component {p:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        match parts[..] {
            [z0, z1, z2] => RelationshipTheta::new(z0, z1, z2),
            _ => Err(Error::validation("theta needs exactly three components")),
        }
    }
}

/// Two simulated profiles with the subpopulations they were drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedPair {
    pub profile_1: IndexedProfile,
    pub profile_2: IndexedProfile,
    pub true_subpop_1: usize,
    pub true_subpop_2: usize,
}

/// Precomputed cumulative distributions for drawing subpopulations and
/// alleles from one table.
#[derive(Clone, Debug)]
pub struct ProfileSampler {
    prior_cdf: Vec<f64>,
    /// `allele_cdf[subpop][locus][allele]`
    allele_cdf: Vec<Vec<Vec<f64>>>,
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn draw_from<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let total = cdf[cdf.len() - 1];
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

impl ProfileSampler {
    pub fn new<T: Scalar>(table: &AlleleFrequencyTable<T>) -> Self {
        let prior_cdf = cumulative(table.priors().iter().map(|p| p.as_f64()));
        let allele_cdf = (0..table.n_subpops())
            .map(|s| {
                table
                    .loci()
                    .iter()
                    .map(|locus| cumulative(locus.freqs(s).iter().map(|f| f.as_f64())))
                    .collect()
            })
            .collect();
        ProfileSampler {
            prior_cdf,
            allele_cdf,
        }
    }

    pub fn n_subpops(&self) -> usize {
        self.prior_cdf.len()
    }

    pub fn n_loci(&self) -> usize {
        self.allele_cdf[0].len()
    }

    /// Index `i` with probability `priors[i]`.
    pub fn draw_subpopulation<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.prior_cdf.len() == 1 {
            return 0;
        }
        draw_from(&self.prior_cdf, rng)
    }

    fn draw_allele<R: Rng + ?Sized>(&self, subpop: usize, locus: usize, rng: &mut R) -> u16 {
        draw_from(&self.allele_cdf[subpop][locus], rng) as u16
    }

    /// Two independent allele draws per locus (Hardy-Weinberg).
    pub fn simulate_profile<R: Rng + ?Sized>(&self, subpop: usize, rng: &mut R) -> IndexedProfile {
        let alleles = (0..self.n_loci())
            .map(|l| sorted(self.draw_allele(subpop, l, rng), self.draw_allele(subpop, l, rng)))
            .collect();
        IndexedProfile { alleles }
    }

    /// Unrelated pair; each member's subpopulation is drawn independently.
    pub fn simulate_unrelated_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> SimulatedPair {
        let s1 = self.draw_subpopulation(rng);
        let s2 = self.draw_subpopulation(rng);
        SimulatedPair {
            profile_1: self.simulate_profile(s1, rng),
            profile_2: self.simulate_profile(s2, rng),
            true_subpop_1: s1,
            true_subpop_2: s2,
        }
    }

    /// Pair related through `theta`, sharing one subpopulation. Per locus an
    /// IBD count `k` is drawn from `(z0, z1, z2)`; the second profile copies
    /// `k` alleles of the first (a uniformly chosen slot when `k = 1`) and
    /// draws the rest.
    pub fn simulate_related_pair<T: Scalar, R: Rng + ?Sized>(
        &self,
        theta: &RelationshipTheta<T>,
        rng: &mut R,
    ) -> SimulatedPair {
        let z0 = theta.z0().as_f64();
        let z01 = z0 + theta.z1().as_f64();
        let subpop = self.draw_subpopulation(rng);
        let mut first = Vec::with_capacity(self.n_loci());
        let mut second = Vec::with_capacity(self.n_loci());
        for l in 0..self.n_loci() {
            let g1 = sorted(self.draw_allele(subpop, l, rng), self.draw_allele(subpop, l, rng));
            let u = rng.random::<f64>();
            let g2 = if u < z0 {
                sorted(self.draw_allele(subpop, l, rng), self.draw_allele(subpop, l, rng))
            } else if u < z01 {
                let shared = g1[usize::from(rng.random_bool(0.5))];
                sorted(shared, self.draw_allele(subpop, l, rng))
            } else {
                g1
            };
            first.push(g1);
            second.push(g2);
        }
        SimulatedPair {
            profile_1: IndexedProfile { alleles: first },
            profile_2: IndexedProfile { alleles: second },
            true_subpop_1: subpop,
            true_subpop_2: subpop,
        }
    }
}

fn sorted(x: u16, y: u16) -> [u16; 2] {
    if y < x {
        [y, x]
    } else {
        [x, y]
    }
}

/// One-off subpopulation draw. Builds a sampler per call; use
/// [`ProfileSampler`] in loops.
pub fn draw_subpopulation<T: Scalar, R: Rng + ?Sized>(
    table: &AlleleFrequencyTable<T>,
    rng: &mut R,
) -> usize {
    ProfileSampler::new(table).draw_subpopulation(rng)
}

pub fn simulate_profile<T: Scalar, R: Rng + ?Sized>(
    table: &AlleleFrequencyTable<T>,
    subpop: usize,
    rng: &mut R,
) -> IndexedProfile {
    ProfileSampler::new(table).simulate_profile(subpop, rng)
}

pub fn simulate_related_pair<T: Scalar, R: Rng + ?Sized>(
    table: &AlleleFrequencyTable<T>,
    theta: &RelationshipTheta<T>,
    rng: &mut R,
) -> SimulatedPair {
    ProfileSampler::new(table).simulate_related_pair(theta, rng)
}

/// `n` individuals, each with a prior-drawn subpopulation. Individual `i`
/// uses its own random stream, so the output is independent of threading.
pub fn simulate_population<T: Scalar>(
    table: &AlleleFrequencyTable<T>,
    n: usize,
    seed: u64,
) -> Vec<LabeledProfile> {
    use rayon::prelude::*;
    let sampler = ProfileSampler::new(table);
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::rng::substream(seed, crate::rng::Domain::Profiles, i);
            let subpop = sampler.draw_subpopulation(&mut rng);
            let profile = sampler.simulate_profile(subpop, &mut rng).to_profile(table);
            LabeledProfile {
                id: i.to_string(),
                subpop,
                profile,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freqdata::LocusTable;
    use crate::rng::{substream, Domain};

    fn ab_table() -> AlleleFrequencyTable<f64> {
        let l = LocusTable::new(
            "L",
            vec![
                (AlleleLabel::new("a").unwrap(), vec![0.6]),
                (AlleleLabel::new("b").unwrap(), vec![0.4]),
            ],
        )
        .unwrap();
        AlleleFrequencyTable::new(vec!["s".into()], vec![l], vec![1.0]).unwrap()
    }

    fn three_locus_table() -> AlleleFrequencyTable<f64> {
        let loci = ["L1", "L2", "L3"]
            .iter()
            .map(|n| {
                LocusTable::new(
                    *n,
                    vec![
                        (AlleleLabel::new("1").unwrap(), vec![0.5, 0.2]),
                        (AlleleLabel::new("2").unwrap(), vec![0.5, 0.8]),
                    ],
                )
                .unwrap()
            })
            .collect();
        AlleleFrequencyTable::new(vec!["x".into(), "y".into()], loci, vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn genotype_equality_is_unordered() {
        assert_eq!(Genotype::parse("17", "15").unwrap(), Genotype::parse("15", "17").unwrap());
        assert_eq!(Genotype::parse("17", "15").unwrap().to_string(), "15/17");
    }

    #[test]
    fn theta_validation() {
        assert!(RelationshipTheta::new(0.5, 0.5, 0.0).is_ok());
        assert!(RelationshipTheta::new(0.5, 0.6, 0.0).is_err());
        assert!(RelationshipTheta::new(-0.1, 1.1, 0.0).is_err());
        assert_eq!(
            RelationshipTheta::parse("0.25, 0.5,0.25").unwrap(),
            RelationshipTheta::full_sibling()
        );
        assert!(RelationshipTheta::parse("1,0").is_err());
    }

    #[test]
    fn degenerate_prior_always_zero() {
        let s = ProfileSampler::new(&ab_table());
        let mut rng = substream(1, Domain::Other(0), 0);
        assert!((0..100).all(|_| s.draw_subpopulation(&mut rng) == 0));
    }

    #[test]
    fn single_allele_locus_is_always_homozygous() {
        let l = LocusTable::new("L", vec![(AlleleLabel::new("a").unwrap(), vec![1.0])]).unwrap();
        let t = AlleleFrequencyTable::new(vec!["s".into()], vec![l], vec![1.0]).unwrap();
        let mut rng = substream(1, Domain::Other(0), 0);
        for _ in 0..50 {
            assert_eq!(simulate_profile(&t, 0, &mut rng).genotypes(), &[[0, 0]]);
        }
    }

    #[test]
    fn profile_shape_follows_table() {
        let t = three_locus_table();
        let mut rng = substream(3, Domain::Other(0), 0);
        let p = simulate_profile(&t, 1, &mut rng);
        assert_eq!(p.n_loci(), 3);
        let labels = p.to_profile(&t);
        assert_eq!(IndexedProfile::resolve(&labels, &t).unwrap(), p);
    }

    #[test]
    fn equal_seeds_give_equal_sequences() {
        let t = three_locus_table();
        let s = ProfileSampler::new(&t);
        let run = || {
            let mut rng = substream(99, Domain::Other(1), 5);
            (0..20).map(|_| s.draw_subpopulation(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn parent_child_pairs_always_share_an_allele() {
        let t = three_locus_table();
        let s = ProfileSampler::new(&t);
        for i in 0..2000 {
            let mut rng = substream(5, Domain::AltPairs, i);
            let pair = s.simulate_related_pair(&RelationshipTheta::<f64>::parent_child(), &mut rng);
            assert_eq!(pair.true_subpop_1, pair.true_subpop_2);
            for (g1, g2) in pair.profile_1.genotypes().iter().zip(pair.profile_2.genotypes()) {
                assert!(g1.iter().any(|a| g2.contains(a)));
            }
        }
    }

    #[test]
    fn resolve_reports_unknown_allele() {
        let t = ab_table();
        let p = DnaProfile::from_pairs(&[("a", "c")]).unwrap();
        assert!(matches!(
            IndexedProfile::resolve(&p, &t),
            Err(Error::UnknownAllele { ref allele, .. }) if allele == "c"
        ));
    }
}
