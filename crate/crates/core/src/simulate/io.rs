//! Profile CSV formats.
//!
//! Labeled profiles: `id,subpop,<locus>_a,<locus>_b,...`.
//! Pair dump: `pair_id,member,subpop,<locus>_a,<locus>_b,...`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::freqdata::AlleleFrequencyTable;
use crate::num::Scalar;

use super::{DnaProfile, Genotype, SimulatedPair};

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledProfile {
    pub id: String,
    pub subpop: usize,
    pub profile: DnaProfile,
}

fn locus_header<T: Scalar>(table: &AlleleFrequencyTable<T>) -> String {
    table
        .loci()
        .iter()
        .map(|l| format!("{0}_a,{0}_b", l.name()))
        .collect::<Vec<_>>()
        .join(",")
}

fn write_genotypes(out: &mut impl Write, profile: &DnaProfile) -> std::io::Result<()> {
    for g in profile.genotypes() {
        write!(out, ",{},{}", g.first(), g.second())?;
    }
    writeln!(out)
}

pub fn write_labeled_profiles<T: Scalar>(
    path: &Path,
    table: &AlleleFrequencyTable<T>,
    profiles: &[LabeledProfile],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "id,subpop,{}", locus_header(table))?;
    for p in profiles {
        write!(out, "{},{}", p.id, table.subpop_names()[p.subpop])?;
        write_genotypes(&mut out, &p.profile)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a labeled profile CSV whose locus columns follow `table`'s locus
/// order. The subpop column holds a subpopulation name or a 0-based index.
/// Alleles are not checked against the table here.
pub fn read_labeled_profiles<T: Scalar>(
    path: &Path,
    table: &AlleleFrequencyTable<T>,
) -> Result<Vec<LabeledProfile>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    let expected = 2 + 2 * table.n_loci();
    if header.len() != expected {
        return Err(parse_err(1, format!("expected {expected} columns, found {}", header.len())));
    }
    for (l, locus) in table.loci().iter().enumerate() {
        let a = &header[2 + 2 * l];
        if a.strip_suffix("_a") != Some(locus.name()) {
            return Err(parse_err(
                1,
                format!("column {} should be {}_a, found {a}", 3 + 2 * l, locus.name()),
            ));
        }
    }
    let mut profiles = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record?;
        let subpop = match table.subpop_index(&record[1]) {
            Some(s) => s,
            None => record[1]
                .parse::<usize>()
                .ok()
                .filter(|&s| s < table.n_subpops())
                .ok_or_else(|| parse_err(line, format!("unknown subpopulation {:?}", &record[1])))?,
        };
        let genotypes = (0..table.n_loci())
            .map(|l| Genotype::parse(&record[2 + 2 * l], &record[3 + 2 * l]))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| parse_err(line, e.to_string()))?;
        profiles.push(LabeledProfile {
            id: record[0].to_owned(),
            subpop,
            profile: DnaProfile::new(genotypes),
        });
    }
    Ok(profiles)
}

/// Writes both members of each pair, one row per individual.
pub fn write_pair_dump<'a, T: Scalar>(
    path: &Path,
    table: &AlleleFrequencyTable<T>,
    pairs: impl IntoIterator<Item = (u64, &'a SimulatedPair)>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "pair_id,member,subpop,{}", locus_header(table))?;
    let names = table.subpop_names();
    for (id, pair) in pairs {
        for (member, profile, subpop) in [
            (1, &pair.profile_1, pair.true_subpop_1),
            (2, &pair.profile_2, pair.true_subpop_2),
        ] {
            write!(out, "{id},{member},{}", names[subpop])?;
            write_genotypes(&mut out, &profile.to_profile(table))?;
        }
    }
    out.flush()?;
    Ok(())
}
