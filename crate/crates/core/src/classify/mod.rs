//! Subpopulation classification of DNA profiles.
//!
//! [`naive_bayes`] scores profiles directly from the frequency table;
//! [`softmax`] fits a multinomial logistic regression on one-hot encoded
//! profiles ([`encode`]). [`ProfileClassifier`] puts both behind one
//! interface for cross-validation.

pub mod encode;
pub mod naive_bayes;
pub mod softmax;

use std::fmt;
use std::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freqdata::AlleleFrequencyTable;
use crate::num::{argmax, Scalar};
use crate::simulate::{DnaProfile, IndexedProfile};

pub use encode::{encode_profile, EncodedProfile, EncodingScheme};
pub use naive_bayes::{naive_bayes_classify_pair, naive_bayes_posterior_single, NaiveBayes};
pub use softmax::{predict_softmax, train_softmax, SoftmaxHyperparams, SoftmaxModel, TrainingMeta};

/// Normalized class probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorVector<T = f64> {
    pub probs: Vec<T>,
}

impl<T: Float> PosteriorVector<T> {
    /// Normalizes unnormalized log scores with log-sum-exp.
    pub fn from_log_scores(scores: &[T]) -> Self {
        let norm = crate::num::log_sum_exp(scores);
        PosteriorVector {
            probs: scores.iter().map(|&s| (s - norm).exp()).collect(),
        }
    }

    /// Most probable class, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

/// The classification methods compared in the evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "nb")]
    NaiveBayes,
    #[serde(rename = "lrA")]
    SoftmaxA,
    #[serde(rename = "lrB")]
    SoftmaxB,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::NaiveBayes => "nb",
            Method::SoftmaxA => "lrA",
            Method::SoftmaxB => "lrB",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nb" | "naive-bayes" => Ok(Method::NaiveBayes),
            "lrA" | "lra" => Ok(Method::SoftmaxA),
            "lrB" | "lrb" => Ok(Method::SoftmaxB),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// A classification method that may need fitting before it can predict.
pub trait ProfileClassifier: Send + Sync {
    fn name(&self) -> String;

    fn requires_training(&self) -> bool;

    fn fit(&self, training: &[(&DnaProfile, usize)]) -> Result<Box<dyn FittedClassifier + '_>>;
}

/// A ready-to-use predictor. Errors of kind [`Error::UnknownAllele`] or
/// [`Error::UnseenFeatureLevel`] mean "cannot classify this sample".
pub trait FittedClassifier: Send + Sync {
    fn predict(&self, x: &DnaProfile) -> Result<usize>;
}

/// True for the per-sample errors that exclude a sample rather than abort.
pub fn is_exclusion(err: &Error) -> bool {
    matches!(err, Error::UnknownAllele { .. } | Error::UnseenFeatureLevel { .. })
}

/// Naive Bayes over a fixed table; ignores training data.
pub struct NaiveBayesClassifier<T = f64> {
    pub table: AlleleFrequencyTable<T>,
}

struct FittedNaiveBayes<'a, T>(NaiveBayes<'a, T>);

impl<T: Scalar + Float> FittedClassifier for FittedNaiveBayes<'_, T> {
    fn predict(&self, x: &DnaProfile) -> Result<usize> {
        let x = IndexedProfile::resolve(x, self.0.table())?;
        Ok(self.0.posterior_single(&x).argmax())
    }
}

impl<T: Scalar + Float> ProfileClassifier for NaiveBayesClassifier<T> {
    fn name(&self) -> String {
        Method::NaiveBayes.name().to_owned()
    }

    fn requires_training(&self) -> bool {
        false
    }

    fn fit(&self, _: &[(&DnaProfile, usize)]) -> Result<Box<dyn FittedClassifier + '_>> {
        Ok(Box::new(FittedNaiveBayes(NaiveBayes::new(&self.table))))
    }
}

/// Multinomial logistic regression with a given encoding.
pub struct SoftmaxClassifier {
    pub scheme: EncodingScheme,
    pub n_classes: usize,
    pub hyperparams: SoftmaxHyperparams,
}

impl FittedClassifier for SoftmaxModel {
    fn predict(&self, x: &DnaProfile) -> Result<usize> {
        Ok(predict_softmax(self, x)?.0)
    }
}

impl ProfileClassifier for SoftmaxClassifier {
    fn name(&self) -> String {
        match self.scheme {
            EncodingScheme::MethodA => Method::SoftmaxA.name().to_owned(),
            EncodingScheme::MethodB => Method::SoftmaxB.name().to_owned(),
        }
    }

    fn requires_training(&self) -> bool {
        true
    }

    fn fit(&self, training: &[(&DnaProfile, usize)]) -> Result<Box<dyn FittedClassifier + '_>> {
        let model = train_softmax(training, self.n_classes, self.scheme, &self.hyperparams)?;
        Ok(Box::new(model))
    }
}
