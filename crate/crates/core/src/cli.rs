//! Command-line front end. Exit status: 0 on success, 2 for bad
//! configuration or unreadable inputs, 1 when a run fails.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::adapters::{
    gold_labels, prediction_records, save_predictions, DaeDetector, Detector, PredictionFileDetector, QafeDetector,
    QA_THRESHOLD_GRID,
};
use crate::corruptor::{generate_training_set, save_training_set};
use crate::dataset::{corpus_stats, load_corpus, render_stats, Corpus};
use crate::enderanker::{tune_threshold_from, EnDeRanker, RankerConfig};
use crate::ensemble::{freq_vote, logistic_fit, LogisticConfig, LogisticEnsemble, TrainingRow};
use crate::experiment::{crossval, derive_seed, BaseDetector, CrossvalConfig, DEFAULT_L2_GRID};
use crate::fsutil::write_atomic;
use crate::metrics::{self, crossval_aggregate, evaluate, EvalReport};
use crate::registry::Registry;
use crate::types::{LabelSet, PredictionSet};

#[derive(Debug, Parser)]
#[command(name = "dialfact", version, about = "Fine-grained factual error detection for dialogue summaries")]
pub struct Cli {
    /// Registry file mapping scorer and provider ids to backends.
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label every sentence of a corpus with the ranking detector.
    Detect(DetectArgs),
    /// Generate synthetic negatives from reference sentences.
    Corrupt(CorruptArgs),
    /// Pick the ranking threshold (or the QA threshold) on a labelled corpus.
    Tune(TuneArgs),
    /// Score a predictions file against the corpus gold labels.
    Evaluate(EvaluateArgs),
    /// K-fold comparison of detectors and ensembles on one shared split.
    Crossval(CrossvalArgs),
    /// Corpus statistics.
    Stats(StatsArgs),
    /// Combine prediction files.
    #[command(subcommand)]
    Ensemble(EnsembleCommand),
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Score LinkE separately instead of folding it into Others.
    #[arg(long)]
    pub no_merge_linke: bool,
}

impl LabelArgs {
    fn merge(&self) -> bool {
        !self.no_merge_linke
    }
}

#[derive(Debug, Args)]
pub struct RankerArgs {
    #[arg(long, default_value = "mock")]
    pub scorer: String,
    #[arg(long, default_value = "heuristic")]
    pub provider: String,
    /// Keep only the first N candidates per span.
    #[arg(long)]
    pub max_candidates: Option<usize>,
    /// Also draw candidates from the query of query-based dialogues.
    #[arg(long)]
    pub include_query: bool,
    /// Re-prepare the dialogue for every scored variant.
    #[arg(long)]
    pub no_context_cache: bool,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub ranker: RankerArgs,
    #[arg(long = "T", default_value_t = 1)]
    pub threshold_t: usize,
    #[command(flatten)]
    pub labels: LabelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "heuristic")]
    pub provider: String,
    /// Negatives to generate per error class.
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub ranker: RankerArgs,
    /// Tune the QA adapter on this span-similarity file instead.
    #[arg(long)]
    pub qa: Option<PathBuf>,
    /// Candidate thresholds; defaults to 1..=10 (ranker) or 0.5,1,1.5,2 (QA).
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
    #[command(flatten)]
    pub labels: LabelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    #[command(flatten)]
    pub labels: LabelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ranking detector with this scorer id (repeatable).
    #[arg(long = "ranker")]
    pub rankers: Vec<String>,
    #[arg(long, default_value = "heuristic")]
    pub provider: String,
    #[arg(long)]
    pub max_candidates: Option<usize>,
    /// Dependency-arc judgments, NAME=PATH (repeatable).
    #[arg(long = "dae")]
    pub dae: Vec<String>,
    /// QA span similarities, NAME=PATH (repeatable).
    #[arg(long = "qa")]
    pub qa: Vec<String>,
    /// Fixed predictions, NAME=PATH (repeatable).
    #[arg(long = "labels")]
    pub fixed: Vec<String>,
    #[arg(long)]
    pub freq_vote: bool,
    #[arg(long)]
    pub logistic: bool,
    #[command(flatten)]
    pub labels: LabelArgs,
    /// Machine-readable report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EnsembleCommand {
    /// Majority voting over prediction files.
    Freq(EnsembleInputs),
    /// Fit the per-class logistic combiner on gold labels.
    Fit(EnsembleFitArgs),
    /// Apply a fitted combiner.
    Predict(EnsemblePredictArgs),
}

#[derive(Debug, Args)]
pub struct EnsembleInputs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Base detector predictions, NAME=PATH (repeatable, order matters).
    #[arg(long = "predictions", required = true)]
    pub predictions: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnsembleFitArgs {
    #[command(flatten)]
    pub inputs: EnsembleInputs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[command(flatten)]
    pub labels: LabelArgs,
}

#[derive(Debug, Args)]
pub struct EnsemblePredictArgs {
    #[command(flatten)]
    pub inputs: EnsembleInputs,
    #[arg(long)]
    pub model: PathBuf,
}

/// A failed command and the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn corpus(path: &Path) -> Result<Corpus, CliError> {
    load_corpus(path).map_err(|e| config(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn json_line<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn named(arg: &str) -> Result<(String, PathBuf), CliError> {
    match arg.split_once('=') {
        Some((n, p)) if !n.is_empty() && !p.is_empty() => {
            let path = PathBuf::from(p);
            if !path.exists() {
                return Err(config(format!("{}: no such file", path.display())));
            }
            Ok((n.to_string(), path))
        }
        _ => Err(config(format!("expected NAME=PATH, got `{arg}`"))),
    }
}

fn ranker(reg: &Registry, args: &RankerArgs, t: usize, merge: bool) -> Result<EnDeRanker, CliError> {
    let scorer = reg.scorer(&args.scorer).map_err(config)?;
    let provider = reg.provider(&args.provider).map_err(config)?;
    let cfg = RankerConfig {
        threshold_t: t,
        max_candidates: args.max_candidates,
        merge_linke: merge,
        cache_context: !args.no_context_cache,
        include_query: args.include_query,
    };
    Ok(EnDeRanker::new(scorer, provider, cfg))
}

fn eval_table(name: &str, report: &EvalReport) -> String {
    let agg = crossval_aggregate(std::slice::from_ref(report)).expect("one report");
    metrics::render_table(&[(name.to_string(), agg)])
}

fn run_detect(reg: &Registry, a: &DetectArgs) -> Result<(), CliError> {
    if a.threshold_t == 0 {
        return Err(config("--T must be at least 1"));
    }
    let c = corpus(&a.corpus)?;
    let r = ranker(reg, &a.ranker, a.threshold_t, a.labels.merge())?;
    let preds = r.detect_examples(&c.examples).map_err(runtime)?;
    save_predictions(&a.out, &prediction_records(&c.examples, &preds)).map_err(runtime)?;
    eprintln!("{} predictions written to {}", preds.len(), a.out.display());
    Ok(())
}

fn run_corrupt(reg: &Registry, a: &CorruptArgs) -> Result<(), CliError> {
    let c = corpus(&a.corpus)?;
    let provider = reg.provider(&a.provider).map_err(config)?;
    let set = generate_training_set(&c, provider.as_ref(), a.per_class, derive_seed(a.seed, "corrupt")).map_err(runtime)?;
    save_training_set(&a.out, &c, &set).map_err(runtime)?;
    eprintln!("{} negatives, {} positives written to {}", set.negatives.len(), set.positives.len(), a.out.display());
    for (class, s) in &set.shortfalls {
        eprintln!("warning: {class}: {} of {} requested", s.achieved, s.requested);
    }
    Ok(())
}

fn run_tune(reg: &Registry, a: &TuneArgs) -> Result<(), CliError> {
    let c = corpus(&a.corpus)?;
    let merge = a.labels.merge();
    let golds = gold_labels(&c.examples).map_err(config)?;
    let (best, landscape): (f64, Vec<(f64, f64)>) = match &a.qa {
        Some(path) => {
            let grid = if a.grid.is_empty() { QA_THRESHOLD_GRID.to_vec() } else { a.grid.clone() };
            let mut det = QafeDetector::from_path("qa", path, 0.0).map_err(config)?;
            let mut landscape = Vec::new();
            for &t in &grid {
                det.threshold = t;
                let preds: Vec<LabelSet> = det.predict_all(&c.examples).map_err(runtime)?.into_iter().map(|p| p.labels).collect();
                landscape.push((t, evaluate(&preds, &golds, merge).map_err(runtime)?.macro_f1));
            }
            let best = metrics::smallest_argmax(&landscape).ok_or_else(|| config("empty grid"))?;
            (best, landscape)
        }
        None => {
            let grid: Vec<usize> = if a.grid.is_empty() {
                (1..=10).collect()
            } else {
                a.grid
                    .iter()
                    .map(|&g| if g >= 1.0 && g.fract() == 0.0 { Ok(g as usize) } else { Err(config(format!("bad T {g}"))) })
                    .collect::<Result<_, _>>()?
            };
            let r = ranker(reg, &a.ranker, 1, merge)?;
            let analyses = r.analyze_examples(&c.examples).map_err(runtime)?;
            let (best, landscape) = tune_threshold_from(&analyses, &golds, &grid, merge).map_err(runtime)?;
            (best as f64, landscape.into_iter().map(|(t, s)| (t as f64, s)).collect())
        }
    };
    println!("best threshold: {best}");
    for (t, s) in &landscape {
        println!("{t:>6}  macro-F1 {s:.4}");
    }
    if let Some(out) = &a.out {
        write(out, &json_line(&serde_json::json!({ "best": best, "landscape": landscape })))?;
    }
    Ok(())
}

fn run_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let c = corpus(&a.corpus)?;
    let det = PredictionFileDetector::from_path("predictions", &a.predictions).map_err(config)?;
    let preds: Vec<LabelSet> = det.predict_all(&c.examples).map_err(config)?.into_iter().map(|p| p.labels).collect();
    let golds = gold_labels(&c.examples).map_err(config)?;
    let report = evaluate(&preds, &golds, a.labels.merge()).map_err(runtime)?;
    print!("{}", eval_table("predictions", &report));
    if let Some(out) = &a.out {
        write(out, &json_line(&report))?;
    }
    Ok(())
}

fn run_crossval(reg: &Registry, a: &CrossvalArgs) -> Result<(), CliError> {
    let c = corpus(&a.corpus)?;
    let merge = a.labels.merge();
    let provider = reg.provider(&a.provider).map_err(config)?;
    let mut detectors = Vec::new();
    for id in &a.rankers {
        let scorer = reg.scorer(id).map_err(config)?;
        let cfg = RankerConfig { max_candidates: a.max_candidates, merge_linke: merge, ..RankerConfig::default() };
        detectors.push(BaseDetector::Ranker {
            name: format!("EnDeRanker({id})"),
            ranker: EnDeRanker::new(scorer, provider.clone(), cfg),
        });
    }
    for arg in &a.dae {
        let (name, path) = named(arg)?;
        detectors.push(BaseDetector::Fixed(Box::new(DaeDetector::from_path(&name, &path).map_err(config)?)));
    }
    for arg in &a.qa {
        let (name, path) = named(arg)?;
        detectors.push(BaseDetector::Qa(QafeDetector::from_path(&name, &path, QA_THRESHOLD_GRID[0]).map_err(config)?));
    }
    for arg in &a.fixed {
        let (name, path) = named(arg)?;
        detectors.push(BaseDetector::Fixed(Box::new(PredictionFileDetector::from_path(&name, &path).map_err(config)?)));
    }
    if detectors.is_empty() {
        return Err(config("crossval needs at least one --ranker, --dae, --qa or --labels detector"));
    }
    let cfg = CrossvalConfig {
        k: a.k,
        seed: a.seed,
        merge_linke: merge,
        freq_vote: a.freq_vote,
        logistic: a.logistic,
        l2_grid: DEFAULT_L2_GRID.to_vec(),
        ..CrossvalConfig::default()
    };
    let report = crossval(&c, detectors, &cfg).map_err(|e| match e {
        crate::experiment::ExperimentError::Split(_) | crate::experiment::ExperimentError::Config(_) => config(e),
        other => runtime(other),
    })?;
    print!("{}", report.table());
    if let Some(out) = &a.out {
        write(out, report.to_json().as_bytes())?;
    }
    Ok(())
}

fn run_stats(a: &StatsArgs) -> Result<(), CliError> {
    let c = corpus(&a.corpus)?;
    let report = corpus_stats(&c).map_err(runtime)?;
    print!("{}", render_stats(&report));
    if let Some(out) = &a.out {
        write(out, &json_line(&report))?;
    }
    Ok(())
}

fn base_labels(c: &Corpus, inputs: &EnsembleInputs) -> Result<(Vec<String>, Vec<Vec<LabelSet>>), CliError> {
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for arg in &inputs.predictions {
        let (name, path) = named(arg)?;
        let det = PredictionFileDetector::from_path(&name, &path).map_err(config)?;
        cols.push(det.predict_all(&c.examples).map_err(config)?.into_iter().map(|p| p.labels).collect::<Vec<_>>());
        names.push(name);
    }
    // Per example, one label set per detector.
    let rows = (0..c.len()).map(|i| cols.iter().map(|col| col[i].clone()).collect()).collect();
    Ok((names, rows))
}

fn run_ensemble(cmd: &EnsembleCommand) -> Result<(), CliError> {
    match cmd {
        EnsembleCommand::Freq(inputs) => {
            let c = corpus(&inputs.corpus)?;
            let (_, rows) = base_labels(&c, inputs)?;
            let preds: Vec<PredictionSet> =
                rows.into_iter().map(|r| freq_vote(&r.into_iter().map(PredictionSet::new).collect::<Vec<_>>())).collect();
            save_predictions(&inputs.out, &prediction_records(&c.examples, &preds)).map_err(runtime)
        }
        EnsembleCommand::Fit(a) => {
            let c = corpus(&a.inputs.corpus)?;
            let (names, rows) = base_labels(&c, &a.inputs)?;
            let golds = gold_labels(&c.examples).map_err(config)?;
            let train: Vec<TrainingRow> =
                rows.into_iter().zip(golds).map(|(detector_labels, gold)| TrainingRow { detector_labels, gold }).collect();
            let lc = LogisticConfig { l2: a.l2, ..LogisticConfig::default() };
            let model = logistic_fit(&train, &names, derive_seed(a.seed, "upsample"), &lc, a.labels.merge()).map_err(runtime)?;
            model.save(&a.inputs.out).map_err(runtime)
        }
        EnsembleCommand::Predict(a) => {
            let c = corpus(&a.inputs.corpus)?;
            let model = LogisticEnsemble::load(&a.model).map_err(config)?;
            let (names, rows) = base_labels(&c, &a.inputs)?;
            if names != model.detector_order {
                return Err(config(format!("model expects detectors {:?}, got {:?}", model.detector_order, names)));
            }
            let preds: Vec<PredictionSet> = rows.iter().map(|r| model.predict(r)).collect::<Result<_, _>>().map_err(runtime)?;
            save_predictions(&a.inputs.out, &prediction_records(&c.examples, &preds)).map_err(runtime)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let needs_registry = matches!(cli.command, Command::Detect(_) | Command::Corrupt(_) | Command::Tune(_) | Command::Crossval(_));
    let reg = if needs_registry { Registry::locate(cli.registry.as_deref()).map_err(config)? } else { Registry::default() };
    match &cli.command {
        Command::Detect(a) => run_detect(&reg, a),
        Command::Corrupt(a) => run_corrupt(&reg, a),
        Command::Tune(a) => run_tune(&reg, a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Crossval(a) => run_crossval(&reg, a),
        Command::Stats(a) => run_stats(a),
        Command::Ensemble(cmd) => run_ensemble(cmd),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
