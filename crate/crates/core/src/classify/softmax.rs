//! Multinomial logistic regression over one-hot encoded profiles.
//!
//! Every feature level gets one weight per class (no dropped reference
//! level) plus an unpenalized per-class intercept. The objective is mean
//! cross-entropy plus `l2 / 2 * ||W||^2`, minimized by full-batch gradient
//! descent: Barzilai-Borwein trial steps, accepted under an Armijo
//! backtracking line search. Gradients are reduced over fixed-size chunks in
//! a fixed order, so training is bit-identical across thread counts.

use std::fs;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::DnaProfile;

use super::encode::{encode_profile, EncodingScheme};
use super::PosteriorVector;

pub const MODEL_FORMAT_VERSION: u32 = 1;

const CHUNK: usize = 2048;
const ARMIJO_C: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxHyperparams {
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once the relative loss decrease falls below this.
    pub tol: f64,
}

impl Default for SoftmaxHyperparams {
    fn default() -> Self {
        SoftmaxHyperparams {
            l2: 1e-4,
            max_iter: 10_000,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub final_loss: f64,
    pub converged: bool,
    pub n_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    pub format_version: u32,
    pub scheme: EncodingScheme,
    pub n_classes: usize,
    /// Sorted levels seen in training, per feature position.
    pub vocabulary: Vec<Vec<String>>,
    /// `weights[level * n_classes + class]`, levels numbered across all
    /// positions in order.
    pub weights: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub hyperparams: SoftmaxHyperparams,
    pub meta: TrainingMeta,
}

struct Design {
    /// Active level indices, `n_positions` per sample.
    active: Vec<u32>,
    labels: Vec<usize>,
    n_positions: usize,
    n_levels: usize,
    n_classes: usize,
}

impl Design {
    fn n_samples(&self) -> usize {
        self.labels.len()
    }

    fn n_params(&self) -> usize {
        (self.n_levels + 1) * self.n_classes
    }

    /// Mean cross-entropy + penalty, and its gradient.
    fn evaluate(&self, params: &[f64], l2: f64) -> (f64, Vec<f64>) {
        let k = self.n_classes;
        let n = self.n_samples();
        let (weights, intercepts) = params.split_at(self.n_levels * k);
        let partials: Vec<(f64, Vec<f64>)> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut grad = vec![0.0; params.len()];
                let mut loss = 0.0;
                let mut logits = vec![0.0; k];
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let active = &self.active[i * self.n_positions..(i + 1) * self.n_positions];
                    logits.copy_from_slice(intercepts);
                    for &lvl in active {
                        let row = &weights[lvl as usize * k..(lvl as usize + 1) * k];
                        for (z, w) in logits.iter_mut().zip(row) {
                            *z += w;
                        }
                    }
                    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut norm = 0.0;
                    for z in logits.iter_mut() {
                        *z = (*z - max).exp();
                        norm += *z;
                    }
                    let y = self.labels[i];
                    loss += norm.ln() - (logits[y].ln());
                    // logits now hold exp(z - max); turn into p - onehot
                    for (j, z) in logits.iter_mut().enumerate() {
                        *z /= norm;
                        if j == y {
                            *z -= 1.0;
                        }
                    }
                    for &lvl in active {
                        let row = &mut grad[lvl as usize * k..(lvl as usize + 1) * k];
                        for (g, d) in row.iter_mut().zip(&logits) {
                            *g += d;
                        }
                    }
                    for (g, d) in grad[self.n_levels * k..].iter_mut().zip(&logits) {
                        *g += d;
                    }
                }
                (loss, grad)
            })
            .collect();
        let mut loss = 0.0;
        let mut grad = vec![0.0; params.len()];
        for (l, g) in partials {
            loss += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        let inv_n = 1.0 / n as f64;
        loss *= inv_n;
        for g in grad.iter_mut() {
            *g *= inv_n;
        }
        let mut penalty = 0.0;
        for (g, w) in grad.iter_mut().zip(weights) {
            *g += l2 * w;
            penalty += w * w;
        }
        (loss + 0.5 * l2 * penalty, grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits the model. A run that hits `max_iter` still returns a model, with
/// `meta.converged = false` and a logged warning.
pub fn train_softmax(
    training: &[(&DnaProfile, usize)],
    n_classes: usize,
    scheme: EncodingScheme,
    hyperparams: &SoftmaxHyperparams,
) -> Result<SoftmaxModel> {
    if training.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if n_classes == 0 {
        return Err(Error::InvalidArgument("need at least one class".into()));
    }
    if let Some((_, y)) = training.iter().find(|(_, y)| *y >= n_classes) {
        return Err(Error::InvalidArgument(format!("label {y} >= n_classes {n_classes}")));
    }
    let encoded: Vec<Vec<String>> = training
        .iter()
        .map(|(x, _)| encode_profile(x, scheme).features)
        .collect();
    let n_positions = encoded[0].len();
    if let Some(bad) = encoded.iter().find(|f| f.len() != n_positions) {
        return Err(Error::InvalidArgument(format!(
            "profiles disagree on feature count ({} vs {n_positions})",
            bad.len()
        )));
    }
    let mut vocabulary: Vec<Vec<String>> = vec![Vec::new(); n_positions];
    for features in &encoded {
        for (v, f) in vocabulary.iter_mut().zip(features) {
            v.push(f.clone());
        }
    }
    for v in vocabulary.iter_mut() {
        v.sort();
        v.dedup();
    }
    let offsets: Vec<usize> = vocabulary
        .iter()
        .scan(0, |acc, v| {
            let start = *acc;
            *acc += v.len();
            Some(start)
        })
        .collect();
    let n_levels = vocabulary.iter().map(Vec::len).sum();
    let mut active = Vec::with_capacity(encoded.len() * n_positions);
    for features in &encoded {
        for (p, f) in features.iter().enumerate() {
            let level = vocabulary[p].binary_search(f).expect("level in vocabulary");
            active.push((offsets[p] + level) as u32);
        }
    }
    let design = Design {
        active,
        labels: training.iter().map(|(_, y)| *y).collect(),
        n_positions,
        n_levels,
        n_classes,
    };

    let mut params = vec![0.0; design.n_params()];
    let (mut loss, mut grad) = design.evaluate(&params, hyperparams.l2);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < hyperparams.max_iter {
        iterations += 1;
        let gnorm2 = dot(&grad, &grad);
        if gnorm2 == 0.0 {
            converged = true;
            break;
        }
        let mut trial_step = step;
        let (candidate, new_loss, new_grad) = loop {
            let candidate: Vec<f64> = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - trial_step * g)
                .collect();
            let (l, g) = design.evaluate(&candidate, hyperparams.l2);
            if l <= loss - ARMIJO_C * trial_step * gnorm2 || trial_step < 1e-20 {
                break (candidate, l, g);
            }
            trial_step *= 0.5;
        };
        let s: Vec<f64> = candidate.iter().zip(&params).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { dot(&s, &s) / sy } else { trial_step * 2.0 };
        let decrease = loss - new_loss;
        let relative = decrease / loss.abs().max(f64::MIN_POSITIVE);
        params = candidate;
        loss = new_loss;
        grad = new_grad;
        if relative < hyperparams.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!(
            "softmax ({scheme}) hit the {} iteration cap at loss {loss}",
            hyperparams.max_iter
        );
    }
    let intercepts = params.split_off(n_levels * n_classes);
    Ok(SoftmaxModel {
        format_version: MODEL_FORMAT_VERSION,
        scheme,
        n_classes,
        vocabulary,
        weights: params,
        intercepts,
        hyperparams: hyperparams.clone(),
        meta: TrainingMeta {
            iterations,
            final_loss: loss,
            converged,
            n_samples: training.len(),
        },
    })
}

/// Class probabilities and the argmax (lowest index on ties). Levels never
/// seen in training are an [`Error::UnseenFeatureLevel`].
pub fn predict_softmax(model: &SoftmaxModel, x: &DnaProfile) -> Result<(usize, PosteriorVector)> {
    let features = encode_profile(x, model.scheme).features;
    if features.len() != model.vocabulary.len() {
        return Err(Error::InvalidArgument(format!(
            "profile encodes to {} features, model expects {}",
            features.len(),
            model.vocabulary.len()
        )));
    }
    let k = model.n_classes;
    let mut logits = model.intercepts.clone();
    let mut offset = 0;
    for (p, (f, vocab)) in features.iter().zip(&model.vocabulary).enumerate() {
        let level = vocab
            .binary_search(f)
            .map_err(|_| Error::UnseenFeatureLevel {
                feature: p,
                level: f.clone(),
            })?;
        let row = &model.weights[(offset + level) * k..(offset + level + 1) * k];
        for (z, w) in logits.iter_mut().zip(row) {
            *z += w;
        }
        offset += vocab.len();
    }
    let posterior = PosteriorVector::from_log_scores(&logits);
    Ok((posterior.argmax(), posterior))
}

impl SoftmaxModel {
    pub fn ensure_converged(&self) -> Result<()> {
        if self.meta.converged {
            Ok(())
        } else {
            Err(Error::NonConvergence {
                iterations: self.meta.iterations,
                loss: self.meta.final_loss,
            })
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: SoftmaxModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::validation(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        let n_levels: usize = model.vocabulary.iter().map(Vec::len).sum();
        if model.weights.len() != n_levels * model.n_classes
            || model.intercepts.len() != model.n_classes
        {
            return Err(Error::validation("model weights do not match its vocabulary"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        SoftmaxModel::from_json(&fs::read_to_string(path)?)
    }
}
