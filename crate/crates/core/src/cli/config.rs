//! Run configuration: a flat TOML document whose keys mirror the command-line
//! flags. Flags win over file keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SEED_ENV: &str = "KINSHIP_SEED";
pub const RESOLVED_CONFIG_FILE: &str = "resolved-config.toml";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub freq: Option<PathBuf>,
    pub priors: Option<Vec<f64>>,
    pub freq_floor: Option<f64>,
    pub renormalize: Option<bool>,

    pub relationship: Option<String>,
    pub theta: Option<String>,
    pub n_null: Option<usize>,
    pub n_alt: Option<usize>,
    pub alpha: Option<Vec<f64>>,
    pub sweep: Option<String>,
    pub lrclass_classifier: Option<String>,

    pub methods: Option<Vec<String>>,
    pub k: Option<usize>,
    pub train_size: Option<usize>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub classes: Option<usize>,
    pub l2: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,

    pub n: Option<usize>,
    pub pairs: Option<usize>,

    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub curves: Option<PathBuf>,
    pub lr_out: Option<PathBuf>,
    pub linear: Option<bool>,
    /// Affects speed only, so it is left out of dumped configs.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
}

macro_rules! overlay_fields {
    ($top:ident, $base:ident; $($f:ident),* $(,)?) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start].matches('\n').count() as u64 + 1);
            Error::Parse {
                path: path.to_owned(),
                line,
                message: e.message().to_owned(),
            }
        })
    }

    /// Keys set in `self` win; the rest come from `base`.
    pub fn overlay(self, base: RunConfig) -> RunConfig {
        overlay_fields!(self, base;
            freq, priors, freq_floor, renormalize,
            relationship, theta, n_null, n_alt, alpha, sweep, lrclass_classifier,
            methods, k, train_size, train, test, classes, l2, max_iter, tol,
            n, pairs, seed, out, curves, lr_out, linear, workers,
        )
    }

    /// The seed from the config, else from `KINSHIP_SEED`.
    pub fn resolve_seed(&mut self) -> Result<u64> {
        if self.seed.is_none() {
            if let Ok(text) = std::env::var(SEED_ENV) {
                let seed = text.trim().parse().map_err(|_| {
                    Error::validation(format!("{SEED_ENV}={text:?} is not an unsigned integer"))
                })?;
                self.seed = Some(seed);
            }
        }
        self.seed
            .ok_or_else(|| Error::validation(format!("a seed is required (--seed, config key or {SEED_ENV})")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// Writes the config next to `out` (or into the working directory).
    pub fn dump_beside(&self, out: Option<&Path>) -> Result<PathBuf> {
        let dir = out
            .and_then(Path::parent)
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let path = dir.join(RESOLVED_CONFIG_FILE);
        std::fs::write(&path, self.to_toml()?)?;
        Ok(path)
    }
}
