use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path}, line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("validation error{}: {message}", coordinates(.locus, .subpop, .allele))]
    Validation {
        locus: Option<String>,
        subpop: Option<String>,
        allele: Option<String>,
        message: String,
    },

    #[error("allele {allele:?} is not in the support of locus {locus}")]
    UnknownAllele { locus: String, allele: String },

    #[error("H0 likelihood is zero for subpopulation {subpop}")]
    DegenerateRatio { subpop: usize },

    #[error("alpha = {alpha} needs at least {needed} null samples, have {n}")]
    InsufficientSamples { alpha: f64, n: usize, needed: usize },

    #[error("feature {feature} level {level:?} was never seen in training")]
    UnseenFeatureLevel { feature: usize, level: String },

    #[error("optimizer stopped after {iterations} iterations with loss {loss} still decreasing")]
    NonConvergence { iterations: usize, loss: f64 },

    #[error("fold {fold}: training split has no sample of class {class}")]
    FoldTooSmall { fold: usize, class: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("simulation failed at pair {pair_index} (seed {seed}): {source}")]
    Replay {
        pair_index: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation {
            locus: None,
            subpop: None,
            allele: None,
            message: message.into(),
        }
    }

    pub(crate) fn at_locus(
        locus: &str,
        subpop: Option<&str>,
        allele: Option<&str>,
        message: impl Into<String>,
    ) -> Self {
        Error::Validation {
            locus: Some(locus.to_owned()),
            subpop: subpop.map(str::to_owned),
            allele: allele.map(str::to_owned),
            message: message.into(),
        }
    }
}

fn coordinates(locus: &Option<String>, subpop: &Option<String>, allele: &Option<String>) -> String {
    let mut parts = Vec::new();
    if let Some(l) = locus {
        parts.push(format!("locus {l}"));
    }
    if let Some(s) = subpop {
        parts.push(format!("subpopulation {s}"));
    }
    if let Some(a) = allele {
        parts.push(format!("allele {a}"));
    }
    if parts.is_empty() {
        String::new()
    } else {
        format!(" at {}", parts.join(", "))
    }
}
