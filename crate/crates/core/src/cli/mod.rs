//! The `kinship` command line: argument parsing, config resolution and the
//! four subcommands.

mod config;

pub use config::{RunConfig, RESOLVED_CONFIG_FILE, SEED_ENV};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use crate::classify::{
    Method, NaiveBayes, NaiveBayesClassifier, ProfileClassifier, SoftmaxClassifier,
    SoftmaxHyperparams,
};
use crate::error::{Error, Result};
use crate::freqdata::{load_frequency_table, AlleleFrequencyTable, LoadOptions};
use crate::metrics::{
    build_confusion, holdout_evaluate, kfold_evaluate, summarize, ConfusionMatrix,
    EvaluationReport, MetricSummary,
};
use crate::power::{
    build_report, default_alpha, parse_sweep, run_records, scale_alpha, Hypothesis, PairRecord,
    SampleSet, SimulationPlan, ThresholdEntry,
};
use crate::rng::{substream, Domain};
use crate::simulate::{
    read_labeled_profiles, simulate_population, write_labeled_profiles, write_pair_dump,
    DnaProfile, ProfileSampler, RelationshipTheta,
};

#[derive(Debug, Parser)]
#[command(name = "kinship", version, about = "Kinship likelihood ratios under population substructure")]
pub struct Cli {
    /// TOML file with defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the resolved configuration next to the output file.
    #[arg(long, global = true)]
    pub dump_config: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate labeled profiles (or related pairs with --pairs).
    Simulate(SimulateArgs),
    /// Null and alternative simulation, thresholds and power.
    Power(PowerArgs),
    /// Null simulation and thresholds only.
    Thresholds(PowerArgs),
    /// Cross-validated and held-out classifier evaluation.
    ClassifyEval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Frequency CSV: allele,locus,<subpop_1>,...
    #[arg(long)]
    pub freq: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub priors: Option<Vec<f64>>,
    /// Fill missing or zero cells with this frequency.
    #[arg(long)]
    pub freq_floor: Option<f64>,
    /// Rescale locus columns to sum to one.
    #[arg(long)]
    pub renormalize: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub table: TableArgs,
    /// Number of individuals.
    #[arg(long)]
    pub n: Option<usize>,
    /// Simulate this many related pairs instead.
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub relationship: Option<String>,
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[command(flatten)]
    pub table: TableArgs,
    /// pc, sb or custom (with --theta z0,z1,z2).
    #[arg(long)]
    pub relationship: Option<String>,
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long)]
    pub n_null: Option<usize>,
    #[arg(long)]
    pub n_alt: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Alpha grid lo:hi:steps.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Classifier behind LRCLASS.
    #[arg(long)]
    pub lrclass_classifier: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sweep curves CSV.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Per-pair LR CSV.
    #[arg(long)]
    pub lr_out: Option<PathBuf>,
    /// Raw ratios instead of log10 in --lr-out.
    #[arg(long)]
    pub linear: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub table: TableArgs,
    /// Comma list of nb, lrA, lrB.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Folds; 0 skips cross-validation.
    #[arg(long)]
    pub k: Option<usize>,
    /// Simulated training profiles when --train is absent.
    #[arg(long)]
    pub train_size: Option<usize>,
    /// Labeled profile CSV used instead of simulation.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Labeled profile CSV, or a `true,predicted` CSV of class indices.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Class count for a prediction CSV without a table.
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl TableArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.freq = self.freq.clone();
        c.priors = self.priors.clone();
        c.freq_floor = self.freq_floor;
        c.renormalize = flag(self.renormalize);
    }
}

impl Command {
    fn to_config(&self) -> RunConfig {
        let mut c = RunConfig::default();
        match self {
            Command::Simulate(a) => {
                a.table.apply(&mut c);
                c.n = a.n;
                c.pairs = a.pairs;
                c.relationship = a.relationship.clone();
                c.theta = a.theta.clone();
                c.seed = a.seed;
                c.out = a.out.clone();
            }
            Command::Power(a) | Command::Thresholds(a) => {
                a.table.apply(&mut c);
                c.relationship = a.relationship.clone();
                c.theta = a.theta.clone();
                c.n_null = a.n_null;
                c.n_alt = a.n_alt;
                c.alpha = a.alpha.clone();
                c.sweep = a.sweep.clone();
                c.lrclass_classifier = a.lrclass_classifier.clone();
                c.seed = a.seed;
                c.out = a.out.clone();
                c.curves = a.curves.clone();
                c.lr_out = a.lr_out.clone();
                c.linear = flag(a.linear);
            }
            Command::ClassifyEval(a) => {
                a.table.apply(&mut c);
                c.methods = a.methods.clone();
                c.k = a.k;
                c.train_size = a.train_size;
                c.train = a.train.clone();
                c.test = a.test.clone();
                c.classes = a.classes;
                c.l2 = a.l2;
                c.max_iter = a.max_iter;
                c.tol = a.tol;
                c.seed = a.seed;
                c.out = a.out.clone();
            }
        }
        c
    }
}

/// Process exit status for an error: 2 invalid input, 3 computation
/// failure, 4 I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 4,
        Error::Csv(e) if e.is_io_error() => 4,
        Error::Json(e) if e.is_io() => 4,
        Error::DegenerateRatio { .. }
        | Error::NonConvergence { .. }
        | Error::UnseenFeatureLevel { .. }
        | Error::Replay { .. } => 3,
        _ => 2,
    }
}

/// Parses nothing; runs an already parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut flags = cli.command.to_config();
    flags.workers = cli.workers;
    let config = flags.overlay(file);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(_) => cmd_simulate(config, cli.dump_config),
        Command::Power(_) => cmd_power(config, cli.dump_config, true),
        Command::Thresholds(_) => cmd_power(config, cli.dump_config, false),
        Command::ClassifyEval(_) => cmd_classify_eval(config, cli.dump_config),
    })
}

fn require<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::validation(format!("--{name} is required")))
}

fn load_table(config: &mut RunConfig) -> Result<AlleleFrequencyTable<f64>> {
    let path = require(&config.freq, "freq")?.clone();
    if !path.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("frequency table {} not found", path.display()),
        )));
    }
    let options = LoadOptions {
        freq_floor: config.freq_floor,
        renormalize: config.renormalize.unwrap_or(false),
    };
    let priors = match &config.priors {
        Some(p) => p.clone(),
        None => {
            // a single-subpopulation table needs no priors
            let probe = load_frequency_table::<f64>(&path, &[1.0], &options)?;
            config.priors = Some(vec![1.0]);
            return Ok(probe);
        }
    };
    load_frequency_table(&path, &priors, &options)
}

fn resolve_theta(config: &mut RunConfig) -> Result<RelationshipTheta> {
    let relationship = config
        .relationship
        .clone()
        .unwrap_or_else(|| if config.theta.is_some() { "custom" } else { "pc" }.to_owned());
    let theta = match relationship.as_str() {
        "pc" => RelationshipTheta::parent_child(),
        "sb" => RelationshipTheta::full_sibling(),
        "custom" => RelationshipTheta::parse(require(&config.theta, "theta")?)?,
        other => {
            return Err(Error::validation(format!(
                "relationship {other:?} is not pc, sb or custom"
            )))
        }
    };
    if theta.is_unrelated() {
        warn!("theta1 = (1,0,0) makes every LR equal to 1; no pair can exceed a threshold");
    }
    config.relationship = Some(relationship);
    Ok(theta)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_simulate(mut config: RunConfig, dump: bool) -> Result<()> {
    let table = load_table(&mut config)?;
    let seed = config.resolve_seed()?;
    let out = require(&config.out, "out")?.clone();
    if let Some(n_pairs) = config.pairs {
        let theta = resolve_theta(&mut config)?;
        if dump {
            config.dump_beside(Some(&out))?;
        }
        let sampler = ProfileSampler::new(&table);
        let pairs: Vec<_> = (0..n_pairs as u64)
            .map(|i| {
                let mut rng = substream(seed, Domain::AltPairs, i);
                let pair = if theta.is_unrelated() {
                    sampler.simulate_unrelated_pair(&mut rng)
                } else {
                    sampler.simulate_related_pair(&theta, &mut rng)
                };
                (i, pair)
            })
            .collect();
        write_pair_dump(&out, &table, pairs.iter().map(|(i, p)| (*i, p)))?;
        info!("wrote {n_pairs} pairs to {}", out.display());
        return Ok(());
    }
    let n = *config.n.get_or_insert(1000);
    if dump {
        config.dump_beside(Some(&out))?;
    }
    let profiles = simulate_population(&table, n, seed);
    write_labeled_profiles(&out, &table, &profiles)?;
    let mut counts = vec![0usize; table.n_subpops()];
    for p in &profiles {
        counts[p.subpop] += 1;
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    writeln!(lock, "subpop,count")?;
    for (name, c) in table.subpop_names().iter().zip(&counts) {
        writeln!(lock, "{name},{c}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ThresholdReport<'a> {
    theta1: RelationshipTheta,
    seed: u64,
    replicates_null: usize,
    thresholds: &'a [ThresholdEntry],
}

fn write_lr_csv(path: &Path, sets: &[(Hypothesis, &[PairRecord])], linear: bool) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "pair_id,hypothesis,lr_laf,lr_avg,lr_max,lr_min,lr_class,class_index")?;
    for (h, records) in sets {
        for (i, r) in records.iter().enumerate() {
            write!(out, "{i},{h:?}")?;
            for &v in &r.log_lr {
                let v = if linear { v.exp() } else { v / std::f64::consts::LN_10 };
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{}", r.class_index)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_power(mut config: RunConfig, dump: bool, with_alt: bool) -> Result<()> {
    let table = load_table(&mut config)?;
    let seed = config.resolve_seed()?;
    let theta = resolve_theta(&mut config)?;
    let out = require(&config.out, "out")?.clone();
    match config.lrclass_classifier.get_or_insert_with(|| "naive-bayes".into()).as_str() {
        "naive-bayes" | "nb" => {}
        other => {
            return Err(Error::validation(format!(
                "LRCLASS classifier {other:?} is not supported; use naive-bayes"
            )))
        }
    }
    let n_null = *config.n_null.get_or_insert(1_000_000);
    let n_alt = *config.n_alt.get_or_insert(1_000_000);
    let alphas: Vec<f64> = config
        .alpha
        .clone()
        .unwrap_or_else(|| vec![default_alpha(&theta)])
        .into_iter()
        .map(|a| scale_alpha(a, n_null))
        .collect();
    config.alpha = Some(alphas.clone());
    let grid = config.sweep.as_deref().map(parse_sweep).transpose()?;
    if dump {
        config.dump_beside(Some(&out))?;
    }

    let mut plan = SimulationPlan::new(&table, theta, seed);
    plan.replicates_null = n_null;
    plan.replicates_alt = n_alt;
    plan.alphas = alphas;
    let nb = NaiveBayes::new(&table);

    info!("simulating {n_null} unrelated pairs");
    let null_records = run_records(&plan, Hypothesis::H0, &nb)?;
    let null = SampleSet::from_records(Hypothesis::H0, &plan.statistics, &null_records);

    if !with_alt {
        let thresholds = crate::power::estimate_thresholds(&null, &plan.alphas)?;
        let report = ThresholdReport {
            theta1: theta,
            seed,
            replicates_null: n_null,
            thresholds: &thresholds,
        };
        let mut w = create(&out)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
        w.flush()?;
        if let Some(p) = &config.lr_out {
            write_lr_csv(p, &[(Hypothesis::H0, &null_records)], config.linear.unwrap_or(false))?;
        }
        return Ok(());
    }

    info!("simulating {n_alt} related pairs");
    let alt_records = run_records(&plan, Hypothesis::H1, &nb)?;
    let alt = SampleSet::from_records(Hypothesis::H1, &plan.statistics, &alt_records);
    let report = build_report(&plan, &null, &alt, grid.as_deref())?;

    let mut w = create(&out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    if let Some(p) = &config.curves {
        report.write_curves(p)?;
    }
    if let Some(p) = &config.lr_out {
        write_lr_csv(
            p,
            &[(Hypothesis::H0, &null_records), (Hypothesis::H1, &alt_records)],
            config.linear.unwrap_or(false),
        )?;
    }
    for e in &report.powers {
        info!(
            "{} alpha={} threshold_log10={:.4} power={:.5} [{:.5}, {:.5}]",
            e.statistic.name(),
            e.alpha,
            e.threshold_log10,
            e.power,
            e.ci_lo,
            e.ci_hi
        );
    }
    Ok(())
}

/// A confusion matrix read straight from `true,predicted` rows.
#[derive(Debug, Serialize)]
pub struct PredictionEvaluation {
    pub matrix: ConfusionMatrix,
    pub summary: MetricSummary,
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    seed: Option<u64>,
    kfold: Option<EvaluationReport>,
    test: Option<EvaluationReport>,
    predictions: Option<PredictionEvaluation>,
}

fn is_prediction_csv(path: &Path) -> Result<bool> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let h = reader.headers()?;
    Ok(h.len() == 2 && &h[0] == "true" && &h[1] == "predicted")
}

/// Reads `true,predicted` class indices; an empty prediction is an excluded
/// sample.
pub fn read_predictions(path: &Path) -> Result<Vec<(usize, Option<usize>)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i as u64 + 2;
        let bad = |what: &str| Error::Parse {
            path: path.to_owned(),
            line,
            message: format!("{what} is not a class index"),
        };
        let t = record[0].parse().map_err(|_| bad("true"))?;
        let p = match &record[1] {
            "" => None,
            s => Some(s.parse().map_err(|_| bad("predicted"))?),
        };
        rows.push((t, p));
    }
    Ok(rows)
}

fn evaluate_predictions(path: &Path, classes: Option<usize>) -> Result<PredictionEvaluation> {
    let rows = read_predictions(path)?;
    let max = rows
        .iter()
        .flat_map(|&(t, p)| std::iter::once(t).chain(p))
        .max()
        .map_or(0, |m| m + 1);
    let n_classes = classes.unwrap_or(max);
    if max > n_classes || n_classes == 0 {
        return Err(Error::validation(format!(
            "prediction file uses {max} classes but {n_classes} were declared"
        )));
    }
    let matrix = build_confusion(n_classes, rows);
    let summary = summarize(&matrix);
    Ok(PredictionEvaluation { matrix, summary })
}

fn labeled(profiles: Vec<crate::simulate::LabeledProfile>) -> Vec<(DnaProfile, usize)> {
    profiles.into_iter().map(|p| (p.profile, p.subpop)).collect()
}

fn cmd_classify_eval(mut config: RunConfig, dump: bool) -> Result<()> {
    let out = require(&config.out, "out")?.clone();
    let prediction_mode = match &config.test {
        Some(p) => is_prediction_csv(p)?,
        None => false,
    };
    if prediction_mode && config.freq.is_none() {
        if dump {
            config.dump_beside(Some(&out))?;
        }
        let predictions = evaluate_predictions(config.test.as_ref().unwrap(), config.classes)?;
        info!(
            "predictions: overall accuracy {:.4} over {} samples ({} excluded)",
            predictions.summary.overall_accuracy, predictions.summary.total, predictions.summary.excluded
        );
        return write_json(
            &out,
            &EvalOutput {
                seed: None,
                kfold: None,
                test: None,
                predictions: Some(predictions),
            },
        );
    }

    let table = load_table(&mut config)?;
    let seed = config.resolve_seed()?;
    let n_classes = table.n_subpops();
    let methods: Vec<Method> = config
        .methods
        .get_or_insert_with(|| vec!["nb".into(), "lrA".into(), "lrB".into()])
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_>>()?;
    let k = *config.k.get_or_insert(5);
    let defaults = SoftmaxHyperparams::default();
    let hyperparams = SoftmaxHyperparams {
        l2: *config.l2.get_or_insert(defaults.l2),
        max_iter: *config.max_iter.get_or_insert(defaults.max_iter),
        tol: *config.tol.get_or_insert(defaults.tol),
    };
    let train = match &config.train {
        Some(p) => labeled(read_labeled_profiles(p, &table)?),
        None => {
            let n = *config.train_size.get_or_insert(100_000);
            labeled(simulate_population(&table, n, seed))
        }
    };
    if dump {
        config.dump_beside(Some(&out))?;
    }

    let nb = NaiveBayesClassifier { table: table.clone() };
    let softmax = |scheme| SoftmaxClassifier {
        scheme,
        n_classes,
        hyperparams: hyperparams.clone(),
    };
    let lr_a = softmax(crate::classify::EncodingScheme::MethodA);
    let lr_b = softmax(crate::classify::EncodingScheme::MethodB);
    let classifiers: Vec<&dyn ProfileClassifier> = methods
        .iter()
        .map(|m| -> &dyn ProfileClassifier {
            match m {
                Method::NaiveBayes => &nb,
                Method::SoftmaxA => &lr_a,
                Method::SoftmaxB => &lr_b,
            }
        })
        .collect();

    let kfold = if k == 0 {
        None
    } else {
        info!("{k}-fold evaluation on {} profiles", train.len());
        Some(kfold_evaluate(&train, n_classes, k, &classifiers, seed)?)
    };
    let (test, predictions) = match &config.test {
        Some(p) if prediction_mode => (None, Some(evaluate_predictions(p, Some(n_classes))?)),
        Some(p) => {
            let test = labeled(read_labeled_profiles(p, &table)?);
            (Some(holdout_evaluate(&train, &test, n_classes, &classifiers, seed)?), None)
        }
        None => (None, None),
    };
    for report in kfold.iter().chain(&test) {
        for m in &report.methods {
            info!(
                "{} (k={}): accuracy {:.4}, macro precision {:.4}, macro recall {:.4}, excluded {}",
                m.method,
                report.k,
                m.averaged.overall_accuracy,
                m.averaged.precision,
                m.averaged.recall,
                m.averaged.excluded
            );
        }
    }
    write_json(
        &out,
        &EvalOutput {
            seed: Some(seed),
            kfold,
            test,
            predictions,
        },
    )
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
