//! Categorical encodings of a profile for logistic regression.
//!
//! Method A: one feature per allele slot (`2m` features, smaller allele
//! first). Method B: one feature per locus whose level is the whole
//! genotype (`m` features).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::simulate::DnaProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncodingScheme {
    MethodA,
    MethodB,
}

impl fmt::Display for EncodingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingScheme::MethodA => "A",
            EncodingScheme::MethodB => "B",
        })
    }
}

impl FromStr for EncodingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "A" | "a" => Ok(EncodingScheme::MethodA),
            "B" | "b" => Ok(EncodingScheme::MethodB),
            other => Err(Error::InvalidArgument(format!("unknown encoding {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedProfile {
    pub scheme: EncodingScheme,
    pub features: Vec<String>,
}

impl EncodingScheme {
    pub fn n_features(self, n_loci: usize) -> usize {
        match self {
            EncodingScheme::MethodA => 2 * n_loci,
            EncodingScheme::MethodB => n_loci,
        }
    }
}

pub fn encode_profile(x: &DnaProfile, scheme: EncodingScheme) -> EncodedProfile {
    let features = match scheme {
        EncodingScheme::MethodA => x
            .genotypes()
            .iter()
            .flat_map(|g| [g.first().to_string(), g.second().to_string()])
            .collect(),
        EncodingScheme::MethodB => x.genotypes().iter().map(|g| g.to_string()).collect(),
    };
    EncodedProfile { scheme, features }
}
