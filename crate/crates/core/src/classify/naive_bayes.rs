//! Naive Bayes subpopulation posterior from Hardy-Weinberg genotype
//! probabilities, with the pair likelihood taken as the product of the two
//! single-profile likelihoods.

use num_traits::Float;

use crate::error::Result;
use crate::freqdata::AlleleFrequencyTable;
use crate::kinship::{hwe_prob, PairClassifier};
use crate::num::Scalar;
use crate::simulate::{DnaProfile, IndexedProfile};

use super::PosteriorVector;

#[derive(Clone, Debug)]
pub struct NaiveBayes<'a, T> {
    table: &'a AlleleFrequencyTable<T>,
    log_priors: Vec<T>,
}

impl<'a, T: Scalar + Float> NaiveBayes<'a, T> {
    pub fn new(table: &'a AlleleFrequencyTable<T>) -> Self {
        NaiveBayes {
            table,
            log_priors: table.priors().iter().map(|p| p.ln()).collect(),
        }
    }

    pub fn table(&self) -> &'a AlleleFrequencyTable<T> {
        self.table
    }

    /// `ln P(X | A_subpop)`: sum over loci of the log HWE probability.
    pub fn profile_log_likelihood(&self, x: &IndexedProfile, subpop: usize) -> T {
        x.genotypes()
            .iter()
            .zip(self.table.loci())
            .fold(T::zero(), |acc, (&g, locus)| acc + hwe_prob(g, locus.freqs(subpop)).ln())
    }

    pub fn posterior_single(&self, x: &IndexedProfile) -> PosteriorVector<T> {
        let scores: Vec<T> = self
            .log_priors
            .iter()
            .enumerate()
            .map(|(s, &lp)| lp + self.profile_log_likelihood(x, s))
            .collect();
        PosteriorVector::from_log_scores(&scores)
    }

    /// Joint posterior of a pair; the class is the argmax (lowest index on
    /// ties). Symmetric in `x1`, `x2`.
    pub fn classify_pair(&self, x1: &IndexedProfile, x2: &IndexedProfile) -> (usize, PosteriorVector<T>) {
        let scores: Vec<T> = self
            .log_priors
            .iter()
            .enumerate()
            .map(|(s, &lp)| {
                lp + (self.profile_log_likelihood(x1, s) + self.profile_log_likelihood(x2, s))
            })
            .collect();
        let posterior = PosteriorVector::from_log_scores(&scores);
        (posterior.argmax(), posterior)
    }
}

impl<T: Scalar + Float> PairClassifier<T> for NaiveBayes<'_, T> {
    fn classify_pair(&self, x1: &IndexedProfile, x2: &IndexedProfile) -> Result<usize> {
        Ok(NaiveBayes::classify_pair(self, x1, x2).0)
    }
}

pub fn naive_bayes_posterior_single<T: Scalar + Float>(
    x: &DnaProfile,
    table: &AlleleFrequencyTable<T>,
) -> Result<PosteriorVector<T>> {
    let x = IndexedProfile::resolve(x, table)?;
    Ok(NaiveBayes::new(table).posterior_single(&x))
}

pub fn naive_bayes_classify_pair<T: Scalar + Float>(
    x1: &DnaProfile,
    x2: &DnaProfile,
    table: &AlleleFrequencyTable<T>,
) -> Result<(usize, PosteriorVector<T>)> {
    let x1 = IndexedProfile::resolve(x1, table)?;
    let x2 = IndexedProfile::resolve(x2, table)?;
    Ok(NaiveBayes::new(table).classify_pair(&x1, &x2))
}
