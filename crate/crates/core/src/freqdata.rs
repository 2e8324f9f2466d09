//! Per-subpopulation allele frequency tables.
//!
//! A table holds, for every locus, the allele support shared by all
//! subpopulations and one frequency column per subpopulation, together with
//! the subpopulation proportions used as priors.

use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Tolerance on the sum of a locus column.
pub const LOCUS_SUM_TOLERANCE: f64 = 1e-6;
/// Tolerance on the sum of the subpopulation priors.
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-9;

/// An allele repeat-count token such as `"11"` or `"34.1"`.
///
/// Equality is exact string equality. Ordering is numeric-aware (so `"9"`
/// sorts before `"10"`) with the raw string as tie-break, which keeps it
/// consistent with `Eq`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AlleleLabel(String);

impl AlleleLabel {
    pub fn new(label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        let trimmed = label.trim();
        if trimmed.is_empty() {
            return Err(Error::validation("allele label must be non-empty"));
        }
        Ok(AlleleLabel(trimmed.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn numeric(&self) -> Option<f64> {
        self.0.parse::<f64>().ok().filter(|v| v.is_finite())
    }
}

impl std::str::FromStr for AlleleLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlleleLabel::new(s)
    }
}

impl TryFrom<String> for AlleleLabel {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        AlleleLabel::new(value)
    }
}

impl From<AlleleLabel> for String {
    fn from(value: AlleleLabel) -> Self {
        value.0
    }
}

impl fmt::Display for AlleleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Ord for AlleleLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.numeric(), other.numeric()) {
            (Some(a), Some(b)) => a.total_cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for AlleleLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One locus: the allele support (sorted) and a frequency column per
/// subpopulation.
#[derive(Clone, Debug, PartialEq)]
pub struct LocusTable<T> {
    name: String,
    alleles: Vec<AlleleLabel>,
    /// `freqs[subpop][allele]`
    freqs: Vec<Vec<T>>,
}

/// A single subpopulation's distribution at one locus.
#[derive(Clone, Copy, Debug)]
pub struct LocusDistribution<'a, T> {
    pub locus: &'a str,
    pub alleles: &'a [AlleleLabel],
    pub freqs: &'a [T],
}

impl<T> LocusDistribution<'_, T> {
    pub fn index_of(&self, allele: &AlleleLabel) -> Result<usize> {
        self.alleles
            .binary_search(allele)
            .map_err(|_| Error::UnknownAllele {
                locus: self.locus.to_owned(),
                allele: allele.to_string(),
            })
    }
}

impl<T: Scalar> LocusTable<T> {
    /// Builds a locus from `(allele, per-subpopulation frequencies)` rows.
    /// Rows may come in any order; they are stored sorted by label.
    pub fn new(name: impl Into<String>, rows: Vec<(AlleleLabel, Vec<T>)>) -> Result<Self> {
        let name = name.into();
        if rows.is_empty() {
            return Err(Error::at_locus(&name, None, None, "locus has no alleles"));
        }
        let n_subpops = rows[0].1.len();
        let mut rows = rows;
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        for pair in rows.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::at_locus(
                    &name,
                    None,
                    Some(pair[0].0.as_str()),
                    "duplicate allele",
                ));
            }
        }
        let mut freqs = vec![Vec::with_capacity(rows.len()); n_subpops];
        let mut alleles = Vec::with_capacity(rows.len());
        for (allele, column) in rows {
            if column.len() != n_subpops {
                return Err(Error::at_locus(
                    &name,
                    None,
                    Some(allele.as_str()),
                    format!("expected {n_subpops} frequencies, found {}", column.len()),
                ));
            }
            for (s, f) in column.into_iter().enumerate() {
                freqs[s].push(f);
            }
            alleles.push(allele);
        }
        Ok(LocusTable {
            name,
            alleles,
            freqs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alleles(&self) -> &[AlleleLabel] {
        &self.alleles
    }

    pub fn n_alleles(&self) -> usize {
        self.alleles.len()
    }

    pub fn n_subpops(&self) -> usize {
        self.freqs.len()
    }

    pub fn freqs(&self, subpop: usize) -> &[T] {
        &self.freqs[subpop]
    }

    pub fn distribution(&self, subpop: usize) -> LocusDistribution<'_, T> {
        LocusDistribution {
            locus: &self.name,
            alleles: &self.alleles,
            freqs: &self.freqs[subpop],
        }
    }

    pub fn allele_index(&self, allele: &AlleleLabel) -> Option<usize> {
        self.alleles.binary_search(allele).ok()
    }

    fn validate(&self, subpop_names: &[String]) -> Result<()> {
        if self.freqs.len() != subpop_names.len() {
            return Err(Error::at_locus(
                &self.name,
                None,
                None,
                format!(
                    "{} frequency columns for {} subpopulations",
                    self.freqs.len(),
                    subpop_names.len()
                ),
            ));
        }
        for (column, subpop) in self.freqs.iter().zip(subpop_names) {
            let mut sum = 0.0;
            for (f, allele) in column.iter().zip(&self.alleles) {
                let v = f.as_f64();
                if !(v > 0.0 && v <= 1.0) {
                    return Err(Error::at_locus(
                        &self.name,
                        Some(subpop),
                        Some(allele.as_str()),
                        format!("frequency {v} outside (0, 1]"),
                    ));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > LOCUS_SUM_TOLERANCE {
                return Err(Error::at_locus(
                    &self.name,
                    Some(subpop),
                    None,
                    format!("frequencies sum to {sum}, expected 1"),
                ));
            }
        }
        Ok(())
    }
}

/// Allele frequencies for `R` subpopulations over `m` loci plus the
/// subpopulation proportions. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct AlleleFrequencyTable<T> {
    subpops: Vec<String>,
    loci: Vec<LocusTable<T>>,
    priors: Vec<T>,
}

impl<T: Scalar> AlleleFrequencyTable<T> {
    pub fn new(subpops: Vec<String>, loci: Vec<LocusTable<T>>, priors: Vec<T>) -> Result<Self> {
        if subpops.is_empty() {
            return Err(Error::validation("at least one subpopulation is required"));
        }
        if loci.is_empty() {
            return Err(Error::validation("at least one locus is required"));
        }
        validate_priors(&priors, subpops.len())?;
        for locus in &loci {
            locus.validate(&subpops)?;
        }
        for (i, a) in loci.iter().enumerate() {
            if loci[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::at_locus(&a.name, None, None, "duplicate locus"));
            }
        }
        Ok(AlleleFrequencyTable {
            subpops,
            loci,
            priors,
        })
    }

    pub fn subpop_names(&self) -> &[String] {
        &self.subpops
    }

    pub fn n_subpops(&self) -> usize {
        self.subpops.len()
    }

    pub fn n_loci(&self) -> usize {
        self.loci.len()
    }

    pub fn loci(&self) -> &[LocusTable<T>] {
        &self.loci
    }

    pub fn locus(&self, index: usize) -> &LocusTable<T> {
        &self.loci[index]
    }

    pub fn priors(&self) -> &[T] {
        &self.priors
    }

    pub fn subpop_index(&self, name: &str) -> Option<usize> {
        self.subpops.iter().position(|s| s == name)
    }

    /// Same frequencies, different subpopulation proportions.
    pub fn with_priors(&self, priors: Vec<T>) -> Result<Self> {
        validate_priors(&priors, self.subpops.len())?;
        Ok(AlleleFrequencyTable {
            priors,
            ..self.clone()
        })
    }

    /// Table restricted to one subpopulation (prior 1).
    pub fn single_subpop(&self, subpop: usize) -> Self {
        AlleleFrequencyTable {
            subpops: vec![self.subpops[subpop].clone()],
            loci: self
                .loci
                .iter()
                .map(|l| LocusTable {
                    name: l.name.clone(),
                    alleles: l.alleles.clone(),
                    freqs: vec![l.freqs[subpop].clone()],
                })
                .collect(),
            priors: vec![T::one()],
        }
    }

    /// The prior-weighted mixture `p_1 f_1 + ... + p_R f_R` as a
    /// one-subpopulation table.
    pub fn pooled_distribution(&self) -> Self {
        if self.subpops.len() == 1 {
            return self.clone();
        }
        let loci = self
            .loci
            .iter()
            .map(|locus| {
                let pooled = (0..locus.alleles.len())
                    .map(|a| {
                        self.priors
                            .iter()
                            .zip(&locus.freqs)
                            .fold(T::zero(), |acc, (&p, column)| acc + p * column[a])
                    })
                    .collect();
                LocusTable {
                    name: locus.name.clone(),
                    alleles: locus.alleles.clone(),
                    freqs: vec![pooled],
                }
            })
            .collect();
        AlleleFrequencyTable {
            subpops: vec!["pooled".to_owned()],
            loci,
            priors: vec![T::one()],
        }
    }

    /// Writes the table in the `allele,locus,<subpop...>` CSV layout.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(File::create(path)?);
        write!(out, "allele,locus")?;
        for s in &self.subpops {
            write!(out, ",{s}")?;
        }
        writeln!(out)?;
        for locus in &self.loci {
            for (a, allele) in locus.alleles.iter().enumerate() {
                write!(out, "{allele},{}", locus.name)?;
                for column in &locus.freqs {
                    write!(out, ",{}", column[a].as_f64())?;
                }
                writeln!(out)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Free-function form of [`AlleleFrequencyTable::pooled_distribution`].
pub fn pooled_distribution<T: Scalar>(table: &AlleleFrequencyTable<T>) -> AlleleFrequencyTable<T> {
    table.pooled_distribution()
}

fn validate_priors<T: Scalar>(priors: &[T], n_subpops: usize) -> Result<()> {
    if priors.len() != n_subpops {
        return Err(Error::validation(format!(
            "{} priors given for {} subpopulations",
            priors.len(),
            n_subpops
        )));
    }
    let mut sum = 0.0;
    for (i, p) in priors.iter().enumerate() {
        let v = p.as_f64();
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::validation(format!("prior {i} = {v} outside (0, 1]")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE {
        return Err(Error::validation(format!("priors sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Knobs for [`load_frequency_table`]. The default is strict: missing cells
/// are rejected and nothing is rescaled.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Fill missing or zero cells with this frequency.
    pub freq_floor: Option<f64>,
    /// Rescale every locus column to sum to one.
    pub renormalize: bool,
}

/// Loads a frequency CSV (`allele,locus,<subpop_1>,...,<subpop_R>`).
pub fn load_frequency_table<T: Scalar>(
    path: &Path,
    priors: &[f64],
    options: &LoadOptions,
) -> Result<AlleleFrequencyTable<T>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    if header.len() < 3 {
        return Err(parse_err(1, "header needs allele,locus and at least one subpopulation".into()));
    }
    if !header[0].eq_ignore_ascii_case("allele") || !header[1].eq_ignore_ascii_case("locus") {
        return Err(parse_err(1, "header must start with allele,locus".into()));
    }
    let subpops: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();

    // loci keep first-appearance order
    let mut loci: Vec<(String, Vec<(AlleleLabel, Vec<f64>)>)> = Vec::new();
    for (row_index, record) in reader.records().enumerate() {
        let line = row_index as u64 + 2;
        let record = record?;
        if record.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let allele = AlleleLabel::new(&record[0])
            .map_err(|_| parse_err(line, "empty allele label".into()))?;
        let locus_name = record[1].to_owned();
        if locus_name.is_empty() {
            return Err(parse_err(line, "empty locus name".into()));
        }
        let mut column = Vec::with_capacity(subpops.len());
        for (cell, subpop) in record.iter().skip(2).zip(&subpops) {
            let value = if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| {
                    parse_err(line, format!("frequency {cell:?} for {subpop} is not a number"))
                })?)
            };
            let value = match (value, options.freq_floor) {
                (Some(v), Some(floor)) if v == 0.0 => {
                    info!("locus {locus_name} allele {allele} in {subpop}: zero raised to floor {floor}");
                    floor
                }
                (Some(v), _) => v,
                (None, Some(floor)) => {
                    info!("locus {locus_name} allele {allele} in {subpop}: missing, filled with floor {floor}");
                    floor
                }
                (None, None) => {
                    return Err(Error::at_locus(
                        &locus_name,
                        Some(subpop),
                        Some(allele.as_str()),
                        "allele missing from this subpopulation (inconsistent allele support)",
                    ))
                }
            };
            column.push(value);
        }
        match loci.iter_mut().find(|(name, _)| *name == locus_name) {
            Some((_, rows)) => rows.push((allele, column)),
            None => loci.push((locus_name, vec![(allele, column)])),
        }
    }

    if options.renormalize {
        for (name, rows) in &mut loci {
            for (s, subpop) in subpops.iter().enumerate() {
                let sum: f64 = rows.iter().map(|(_, c)| c[s]).sum();
                if sum > 0.0 && (sum - 1.0).abs() > f64::EPSILON {
                    warn!("renormalizing locus {name} in {subpop}: column summed to {sum}");
                    for (_, c) in rows.iter_mut() {
                        c[s] /= sum;
                    }
                }
            }
        }
    }

    let to_t = |v: f64| {
        T::from_f64(v).ok_or_else(|| Error::validation(format!("cannot represent frequency {v}")))
    };
    let loci = loci
        .into_iter()
        .map(|(name, rows)| {
            let rows = rows
                .into_iter()
                .map(|(a, c)| Ok((a, c.into_iter().map(to_t).collect::<Result<Vec<T>>>()?)))
                .collect::<Result<Vec<_>>>()?;
            LocusTable::new(name, rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let priors = priors.iter().map(|&p| to_t(p)).collect::<Result<Vec<T>>>()?;
    AlleleFrequencyTable::new(subpops, loci, priors)
}

/// Parses `p1,p2,...` as given on the command line.
pub fn parse_priors(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::validation(format!("prior {p:?} is not a number")))
        })
        .collect()
}

/// Largest absolute deviation of any locus column sum from one.
pub fn max_column_deviation<T: Scalar>(table: &AlleleFrequencyTable<T>) -> f64 {
    table
        .loci
        .iter()
        .flat_map(|l| l.freqs.iter())
        .map(|c| (c.iter().map(|f| f.as_f64()).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(s: &str) -> AlleleLabel {
        AlleleLabel::new(s).unwrap()
    }

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn labels_compare_exactly_and_sort_numerically() {
        assert_ne!(label("34.1"), label("34.2"));
        assert_ne!(label("34"), label("34.1"));
        let mut v = vec![label("10"), label("9"), label("34.1"), label("X"), label("9.3")];
        v.sort();
        let got: Vec<&str> = v.iter().map(|l| l.as_str()).collect();
        assert_eq!(got, ["9", "9.3", "10", "34.1", "X"]);
        assert!(AlleleLabel::new("  ").is_err());
    }

    #[test]
    fn single_subpop_single_locus_loads() {
        let f = csv_file("allele,locus,only\na,L1,0.6\nb,L1,0.4\n");
        let t: AlleleFrequencyTable<f64> =
            load_frequency_table(f.path(), &[1.0], &LoadOptions::default()).unwrap();
        assert_eq!(t.n_subpops(), 1);
        assert_eq!(t.n_loci(), 1);
        assert_eq!(t.locus(0).freqs(0), &[0.6, 0.4]);
    }

    #[test]
    fn short_column_is_rejected_with_coordinates() {
        let f = csv_file("allele,locus,s1,s2\na,L1,0.6,0.5\nb,L1,0.38,0.5\n");
        let err = load_frequency_table::<f64>(f.path(), &[0.5, 0.5], &LoadOptions::default())
            .unwrap_err();
        match &err {
            Error::Validation { locus, subpop, .. } => {
                assert_eq!(locus.as_deref(), Some("L1"));
                assert_eq!(subpop.as_deref(), Some("s1"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("0.98"));
    }

    #[test]
    fn missing_cell_is_strict_unless_floored() {
        let body = "allele,locus,s1,s2\na,L1,0.6,0.999\nb,L1,0.4,\n";
        let f = csv_file(body);
        let err = load_frequency_table::<f64>(f.path(), &[0.5, 0.5], &LoadOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::Validation { ref allele, .. } if allele.as_deref() == Some("b")));
        let floored = LoadOptions {
            freq_floor: Some(0.001),
            renormalize: false,
        };
        let t = load_frequency_table::<f64>(f.path(), &[0.5, 0.5], &floored).unwrap();
        assert_eq!(t.locus(0).freqs(1), &[0.999, 0.001]);
    }

    #[test]
    fn renormalize_rescales_columns() {
        let f = csv_file("allele,locus,s1\na,L1,0.3\nb,L1,0.2\n");
        assert!(load_frequency_table::<f64>(f.path(), &[1.0], &LoadOptions::default()).is_err());
        let opts = LoadOptions {
            freq_floor: None,
            renormalize: true,
        };
        let t = load_frequency_table::<f64>(f.path(), &[1.0], &opts).unwrap();
        assert!((t.locus(0).freqs(0)[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn malformed_rows_are_parse_errors() {
        let f = csv_file("allele,locus,s1\na,L1,abc\n");
        let err = load_frequency_table::<f64>(f.path(), &[1.0], &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let f = csv_file("locus,allele,s1\na,L1,1\n");
        assert!(matches!(
            load_frequency_table::<f64>(f.path(), &[1.0], &LoadOptions::default()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn bad_priors_and_frequencies_are_rejected() {
        let f = csv_file("allele,locus,s1,s2\na,L1,1.0,1.0\n");
        for priors in [&[0.5, 0.6][..], &[1.0][..], &[1.0, 0.0][..]] {
            assert!(load_frequency_table::<f64>(f.path(), priors, &LoadOptions::default()).is_err());
        }
        let f = csv_file("allele,locus,s1\na,L1,1.2\nb,L1,-0.2\n");
        assert!(load_frequency_table::<f64>(f.path(), &[1.0], &LoadOptions::default()).is_err());
        let f = csv_file("allele,locus,s1\na,L1,0.5\na,L1,0.5\n");
        assert!(load_frequency_table::<f64>(f.path(), &[1.0], &LoadOptions::default()).is_err());
    }

    #[test]
    fn pooling_two_symmetric_subpops() {
        let locus = LocusTable::new(
            "L",
            vec![(label("a"), vec![0.6, 0.4]), (label("b"), vec![0.4, 0.6])],
        )
        .unwrap();
        let t = AlleleFrequencyTable::new(vec!["x".into(), "y".into()], vec![locus], vec![0.5, 0.5])
            .unwrap();
        let pooled = t.pooled_distribution();
        assert_eq!(pooled.n_subpops(), 1);
        assert_eq!(pooled.locus(0).freqs(0), &[0.5, 0.5]);
        assert_eq!(pooled.pooled_distribution(), pooled);
    }

    #[test]
    fn pooling_one_subpop_is_identity() {
        let locus = LocusTable::new("L", vec![(label("a"), vec![0.6]), (label("b"), vec![0.4])])
            .unwrap();
        let t = AlleleFrequencyTable::new(vec!["x".into()], vec![locus], vec![1.0]).unwrap();
        assert_eq!(pooled_distribution(&t), t);
    }

    #[test]
    fn csv_write_then_load_is_lossless() {
        let locus = LocusTable::new(
            "L",
            vec![(label("10"), vec![0.125, 0.3]), (label("9.3"), vec![0.875, 0.7])],
        )
        .unwrap();
        let t = AlleleFrequencyTable::new(vec!["x".into(), "y".into()], vec![locus], vec![0.25, 0.75])
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        t.write_csv(&path).unwrap();
        let back: AlleleFrequencyTable<f64> =
            load_frequency_table(&path, &[0.25, 0.75], &LoadOptions::default()).unwrap();
        assert_eq!(back, t);
    }
}
