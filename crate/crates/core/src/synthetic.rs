//! Synthetic multi-subpopulation frequency tables.
//!
//! A base allele distribution per locus is drawn from a symmetric Dirichlet,
//! then each subpopulation is a Dirichlet perturbation around it. Each
//! subpopulation has its own concentration; larger means closer to the base.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::freqdata::{AlleleFrequencyTable, AlleleLabel, LocusTable};
use crate::rng::{substream, Domain};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n_loci: usize,
    pub priors: Vec<f64>,
    pub min_alleles: usize,
    pub max_alleles: usize,
    /// Symmetric Dirichlet parameter of the base distribution.
    pub base_alpha: f64,
    /// One concentration per subpopulation.
    pub drift_concentration: Vec<f64>,
    /// Smallest allowed frequency before renormalization.
    pub floor: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_loci: 15,
            priors: vec![0.1, 0.2, 0.3, 0.4],
            min_alleles: 6,
            max_alleles: 14,
            base_alpha: 1.5,
            drift_concentration: vec![150.0; 4],
            floor: 1e-4,
        }
    }
}

impl SyntheticSpec {
    /// Uneven priors with a small, strongly drifted first subpopulation and
    /// two large ones close to the base.
    pub fn structured() -> Self {
        SyntheticSpec {
            priors: vec![0.11083, 0.36944, 0.35383, 0.16590],
            drift_concentration: vec![20.0, 300.0, 300.0, 60.0],
            ..SyntheticSpec::default()
        }
    }
}

fn dirichlet(alpha: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let mut draws: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let sum: f64 = draws.iter().sum();
    draws.iter_mut().for_each(|x| *x /= sum);
    draws
}

fn floored(mut p: Vec<f64>, floor: f64) -> Vec<f64> {
    p.iter_mut().for_each(|x| *x = x.max(floor));
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    p
}

/// Builds a table with loci `L1..Ln`, numeric allele labels and
/// subpopulations `S1..SR`.
pub fn synthetic_table(spec: &SyntheticSpec, seed: u64) -> Result<AlleleFrequencyTable<f64>> {
    if spec.min_alleles < 2 || spec.max_alleles < spec.min_alleles {
        return Err(Error::InvalidArgument("allele count range must start at 2 or more".into()));
    }
    if spec.drift_concentration.len() != spec.priors.len() {
        return Err(Error::InvalidArgument("need one drift concentration per subpopulation".into()));
    }
    if !(spec.base_alpha > 0.0 && spec.drift_concentration.iter().all(|&c| c > 0.0)) {
        return Err(Error::InvalidArgument("Dirichlet parameters must be positive".into()));
    }
    let r = spec.priors.len();
    let mut loci = Vec::with_capacity(spec.n_loci);
    for l in 0..spec.n_loci {
        let mut rng = substream(seed, Domain::Other(1), l as u64);
        let m = rng.random_range(spec.min_alleles..=spec.max_alleles);
        let base = floored(dirichlet(&vec![spec.base_alpha; m], &mut rng), spec.floor);
        let columns: Vec<Vec<f64>> = (0..r)
            .map(|s| {
                let alpha: Vec<f64> = base.iter().map(|p| p * spec.drift_concentration[s]).collect();
                floored(dirichlet(&alpha, &mut rng), spec.floor)
            })
            .collect();
        let rows = (0..m)
            .map(|a| {
                let label = AlleleLabel::new((8 + a).to_string())?;
                Ok((label, columns.iter().map(|c| c[a]).collect()))
            })
            .collect::<Result<Vec<_>>>()?;
        loci.push(LocusTable::new(format!("L{}", l + 1), rows)?);
    }
    let names = (1..=r).map(|i| format!("S{i}")).collect();
    AlleleFrequencyTable::new(names, loci, spec.priors.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_and_reproducible() {
        let spec = SyntheticSpec::default();
        let a = synthetic_table(&spec, 11).unwrap();
        let b = synthetic_table(&spec, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_loci(), 15);
        assert_eq!(a.n_subpops(), 4);
        assert_ne!(a, synthetic_table(&spec, 12).unwrap());
    }
}
