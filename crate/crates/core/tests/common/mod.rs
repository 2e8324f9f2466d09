#![allow(dead_code)]

use std::path::PathBuf;

use kinship_core::freqdata::{AlleleFrequencyTable, AlleleLabel, LocusTable};
use kinship_core::synthetic::{synthetic_table, SyntheticSpec};
use kinship_core::{load_frequency_table, DnaProfile, LoadOptions};

pub const PRIORS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// The three-locus example table with a residual allele per locus.
pub fn example_table() -> AlleleFrequencyTable<f64> {
    load_frequency_table(&fixture("freq_completed.csv"), &PRIORS, &LoadOptions::default()).unwrap()
}

pub fn x1() -> DnaProfile {
    DnaProfile::from_pairs(&[("10", "10"), ("15", "17"), ("9", "10")]).unwrap()
}

pub fn x2() -> DnaProfile {
    DnaProfile::from_pairs(&[("10", "11"), ("15", "15"), ("9", "10")]).unwrap()
}

/// Four subpopulations, 15 loci, moderate differentiation.
pub fn synthetic4(seed: u64) -> AlleleFrequencyTable<f64> {
    synthetic_table(&SyntheticSpec::default(), seed).unwrap()
}

/// One locus, one subpopulation, alleles `a0..`.
pub fn single_locus(freqs: &[f64]) -> AlleleFrequencyTable<f64> {
    let rows = freqs
        .iter()
        .enumerate()
        .map(|(i, &p)| (AlleleLabel::new(format!("a{i}")).unwrap(), vec![p]))
        .collect();
    let locus = LocusTable::new("L", rows).unwrap();
    AlleleFrequencyTable::new(vec!["S".into()], vec![locus], vec![1.0]).unwrap()
}

/// Unordered genotypes `(i, j)`, `i <= j`, over `m` alleles.
pub fn unordered_genotypes(m: u16) -> Vec<[u16; 2]> {
    (0..m).flat_map(|i| (i..m).map(move |j| [i, j])).collect()
}

pub fn normalize(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

pub fn structured(seed: u64) -> AlleleFrequencyTable<f64> {
    synthetic_table(&SyntheticSpec::structured(), seed).unwrap()
}
