//! Confusion matrices, one-vs-rest metrics and k-fold evaluation.
//!
//! Matrices are stored `counts[predicted][true]`. Two accuracy conventions
//! are reported side by side: the overall fraction correct, and the macro
//! average of the per-class one-vs-rest accuracies.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{is_exclusion, FittedClassifier, ProfileClassifier};
use crate::error::{Error, Result};
use crate::rng::{substream, Domain};
use crate::simulate::DnaProfile;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[predicted][true]`.
    pub counts: Vec<Vec<u64>>,
    /// Samples the classifier could not label.
    pub excluded: u64,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; n_classes]; n_classes],
            excluded: 0,
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let r = counts.len();
        if r == 0 || counts.iter().any(|row| row.len() != r) {
            return Err(Error::validation("confusion matrix must be square and non-empty"));
        }
        Ok(ConfusionMatrix { counts, excluded: 0 })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    /// Labeled samples (excluded ones not counted).
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn record(&mut self, truth: usize, predicted: Option<usize>) {
        let r = self.n_classes();
        assert!(truth < r, "true class {truth} out of range");
        match predicted {
            Some(p) => {
                assert!(p < r, "predicted class {p} out of range");
                self.counts[p][truth] += 1;
            }
            None => self.excluded += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.n_classes(), other.n_classes());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.excluded += other.excluded;
    }
}

/// Tallies `(true, predicted)` pairs; `None` marks an excluded sample.
pub fn build_confusion(
    n_classes: usize,
    pairs: impl IntoIterator<Item = (usize, Option<usize>)>,
) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::zeros(n_classes);
    for (t, p) in pairs {
        m.record(t, p);
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub error: f64,
    pub f1: f64,
}

/// A metric whose denominator was zero and was reported as 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateDenominator {
    pub class: Option<usize>,
    pub metric: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    /// Macro one-vs-rest accuracy.
    pub accuracy: f64,
    /// Macro one-vs-rest error, `1 - accuracy`.
    pub error: f64,
    pub f1: f64,
    /// Fraction of labeled samples on the diagonal.
    pub overall_accuracy: f64,
    pub overall_error: f64,
    pub total: u64,
    pub excluded: u64,
    pub per_class: Vec<ClassMetrics>,
    pub degenerate: Vec<DegenerateDenominator>,
}

impl MetricSummary {
    pub fn has_degenerate(&self) -> bool {
        !self.degenerate.is_empty()
    }
}

fn ratio(num: u64, den: u64, class: Option<usize>, metric: &str, flags: &mut Vec<DegenerateDenominator>) -> f64 {
    if den == 0 {
        flags.push(DegenerateDenominator {
            class,
            metric: metric.to_owned(),
        });
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn summarize(m: &ConfusionMatrix) -> MetricSummary {
    let r = m.n_classes();
    let total = m.total();
    let mut flags = Vec::new();
    let mut per_class = Vec::with_capacity(r);
    for c in 0..r {
        let tp = m.counts[c][c];
        let predicted: u64 = m.counts[c].iter().sum();
        let actual: u64 = m.counts.iter().map(|row| row[c]).sum();
        let fp = predicted - tp;
        let fn_ = actual - tp;
        let tn = total - tp - fp - fn_;
        let k = Some(c);
        let precision = ratio(tp, tp + fp, k, "precision", &mut flags);
        let recall = ratio(tp, tp + fn_, k, "recall", &mut flags);
        let specificity = ratio(tn, tn + fp, k, "specificity", &mut flags);
        let accuracy = ratio(tp + tn, total, k, "accuracy", &mut flags);
        let error = if total == 0 { 0.0 } else { 1.0 - accuracy };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            flags.push(DegenerateDenominator {
                class: k,
                metric: "f1".to_owned(),
            });
            0.0
        };
        per_class.push(ClassMetrics {
            tp,
            fp,
            tn,
            fn_,
            precision,
            recall,
            specificity,
            accuracy,
            error,
            f1,
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / r as f64;
    let diagonal: u64 = (0..r).map(|c| m.counts[c][c]).sum();
    let overall_accuracy = ratio(diagonal, total, None, "overall_accuracy", &mut flags);
    MetricSummary {
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        specificity: mean(|c| c.specificity),
        accuracy: mean(|c| c.accuracy),
        error: mean(|c| c.error),
        f1: mean(|c| c.f1),
        overall_accuracy,
        overall_error: if total == 0 { 0.0 } else { 1.0 - overall_accuracy },
        total,
        excluded: m.excluded,
        per_class,
        degenerate: flags,
    }
}

/// Fold-averaged macro metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedSummary {
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub error: f64,
    pub f1: f64,
    pub overall_accuracy: f64,
    pub overall_error: f64,
    pub folds: usize,
    pub excluded: u64,
    pub degenerate_folds: usize,
}

pub fn average_summaries(summaries: &[MetricSummary]) -> AveragedSummary {
    let n = summaries.len().max(1) as f64;
    let mean = |f: fn(&MetricSummary) -> f64| summaries.iter().map(f).sum::<f64>() / n;
    AveragedSummary {
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        specificity: mean(|s| s.specificity),
        accuracy: mean(|s| s.accuracy),
        error: mean(|s| s.error),
        f1: mean(|s| s.f1),
        overall_accuracy: mean(|s| s.overall_accuracy),
        overall_error: mean(|s| s.overall_error),
        folds: summaries.len(),
        excluded: summaries.iter().map(|s| s.excluded).sum(),
        degenerate_folds: summaries.iter().filter(|s| s.has_degenerate()).count(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub matrix: ConfusionMatrix,
    pub summary: MetricSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodEvaluation {
    pub method: String,
    pub folds: Vec<FoldResult>,
    pub averaged: AveragedSummary,
    /// Sum of the per-fold matrices.
    pub pooled: ConfusionMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub k: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub methods: Vec<MethodEvaluation>,
}

impl EvaluationReport {
    pub fn method(&self, name: &str) -> Option<&MethodEvaluation> {
        self.methods.iter().find(|m| m.method == name)
    }
}

/// Start and end of each fold: contiguous slices, the first `n % k` folds one
/// element longer.
pub fn fold_bounds(n: usize, k: usize) -> Vec<(usize, usize)> {
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    (0..k)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let b = (start, start + len);
            start += len;
            b
        })
        .collect()
}

/// Runs a fitted classifier over labeled samples.
pub fn evaluate_fitted(
    model: &dyn FittedClassifier,
    n_classes: usize,
    samples: &[(&DnaProfile, usize)],
) -> Result<ConfusionMatrix> {
    let predictions: Vec<Result<Option<usize>>> = samples
        .par_iter()
        .map(|(x, _)| match model.predict(x) {
            Ok(p) => Ok(Some(p)),
            Err(e) if is_exclusion(&e) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut m = ConfusionMatrix::zeros(n_classes);
    for ((_, t), p) in samples.iter().zip(predictions) {
        m.record(*t, p?);
    }
    Ok(m)
}

fn check_classes(fold: usize, n_classes: usize, training: &[(&DnaProfile, usize)]) -> Result<()> {
    let mut seen = vec![false; n_classes];
    for &(_, c) in training {
        seen[c] = true;
    }
    match seen.iter().position(|s| !s) {
        Some(class) => Err(Error::FoldTooSmall { fold, class }),
        None => Ok(()),
    }
}

/// Shuffled k-fold cross-validation of each classifier on the same folds.
pub fn kfold_evaluate(
    data: &[(DnaProfile, usize)],
    n_classes: usize,
    k: usize,
    classifiers: &[&dyn ProfileClassifier],
    seed: u64,
) -> Result<EvaluationReport> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if data.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} samples cannot fill {k} folds",
            data.len()
        )));
    }
    if let Some((_, c)) = data.iter().find(|(_, c)| *c >= n_classes) {
        return Err(Error::validation(format!("class {c} out of range for {n_classes} classes")));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut substream(seed, Domain::Folds, 0));
    let bounds = fold_bounds(data.len(), k);

    let mut methods = Vec::with_capacity(classifiers.len());
    for clf in classifiers {
        let mut folds = Vec::with_capacity(k);
        for (f, &(lo, hi)) in bounds.iter().enumerate() {
            let validation: Vec<(&DnaProfile, usize)> =
                order[lo..hi].iter().map(|&i| (&data[i].0, data[i].1)).collect();
            let training: Vec<(&DnaProfile, usize)> = order[..lo]
                .iter()
                .chain(&order[hi..])
                .map(|&i| (&data[i].0, data[i].1))
                .collect();
            if clf.requires_training() {
                check_classes(f, n_classes, &training)?;
            }
            let model = clf.fit(&training)?;
            let matrix = evaluate_fitted(model.as_ref(), n_classes, &validation)?;
            let summary = summarize(&matrix);
            folds.push(FoldResult {
                fold: f,
                matrix,
                summary,
            });
        }
        let summaries: Vec<MetricSummary> = folds.iter().map(|f| f.summary.clone()).collect();
        let mut pooled = ConfusionMatrix::zeros(n_classes);
        for f in &folds {
            pooled.merge(&f.matrix);
        }
        methods.push(MethodEvaluation {
            method: clf.name(),
            averaged: average_summaries(&summaries),
            folds,
            pooled,
        });
    }
    Ok(EvaluationReport {
        k,
        n_samples: data.len(),
        seed,
        methods,
    })
}

/// Trains on one set and scores on another, reported as a single fold.
pub fn holdout_evaluate(
    train: &[(DnaProfile, usize)],
    test: &[(DnaProfile, usize)],
    n_classes: usize,
    classifiers: &[&dyn ProfileClassifier],
    seed: u64,
) -> Result<EvaluationReport> {
    let training: Vec<(&DnaProfile, usize)> = train.iter().map(|(x, c)| (x, *c)).collect();
    let testing: Vec<(&DnaProfile, usize)> = test.iter().map(|(x, c)| (x, *c)).collect();
    let mut methods = Vec::with_capacity(classifiers.len());
    for clf in classifiers {
        if clf.requires_training() {
            check_classes(0, n_classes, &training)?;
        }
        let model = clf.fit(&training)?;
        let matrix = evaluate_fitted(model.as_ref(), n_classes, &testing)?;
        let summary = summarize(&matrix);
        methods.push(MethodEvaluation {
            method: clf.name(),
            averaged: average_summaries(std::slice::from_ref(&summary)),
            pooled: matrix.clone(),
            folds: vec![FoldResult {
                fold: 0,
                matrix,
                summary,
            }],
        });
    }
    Ok(EvaluationReport {
        k: 1,
        n_samples: test.len(),
        seed,
        methods,
    })
}
