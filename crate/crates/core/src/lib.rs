//! Kinship likelihood ratios for DNA profile pairs drawn from a structured
//! population, with subpopulation classifiers and Monte Carlo power
//! estimation.
//!
//! Numeric core types are generic over the scalar; the aliases below fix
//! it to `f64`, which is what the pipelines use.

pub mod classify;
pub mod cli;
pub mod error;
pub mod freqdata;
pub mod kinship;
pub mod metrics;
pub mod num;
pub mod power;
pub mod rng;
pub mod simulate;
pub mod synthetic;

pub use error::{Error, Result};
pub use freqdata::{load_frequency_table, AlleleLabel, LoadOptions};
pub use kinship::{compute_lr_set, joint_genotype_prob, Statistic};
pub use simulate::{DnaProfile, Genotype, IndexedProfile};

pub type FrequencyTable = freqdata::AlleleFrequencyTable<f64>;
pub type Locus = freqdata::LocusTable<f64>;
pub type Theta = simulate::RelationshipTheta<f64>;
pub type LrSet = kinship::LrResultSet<f64>;
pub type Posterior = classify::PosteriorVector<f64>;
