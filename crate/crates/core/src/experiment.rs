//! K-fold evaluation of several detectors over one shared split, with
//! per-fold tuning on the training folds and optional ensembles on top.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::adapters::{gold_labels, Detector, DetectorError, QafeDetector, QA_THRESHOLD_GRID};
use crate::dataset::{kfold_split, train_validation_split, Corpus, FoldAssignment, SplitError};
use crate::enderanker::{tune_threshold_from, EnDeRanker, SentenceAnalysis};
use crate::ensemble::{freq_vote, logistic_fit, EnsembleError, LogisticConfig, TrainingRow};
use crate::metrics::{self, crossval_aggregate, evaluate, AggregateReport, EvalReport, MetricsError};
use crate::types::{LabelSet, PredictionSet};

pub const FREQ_VOTE_NAME: &str = "FreqVoting";
pub const LOGISTIC_NAME: &str = "Logistic";
pub const DEFAULT_L2_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];

/// Sub-seed for one named component, so every random choice in a run
/// follows from a single seed.
pub fn derive_seed(seed: u64, component: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(component.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub enum BaseDetector {
    /// `T` is tuned per fold.
    Ranker { name: String, ranker: EnDeRanker },
    /// The similarity threshold is tuned per fold.
    Qa(QafeDetector),
    /// No parameters.
    Fixed(Box<dyn Detector>),
}

impl BaseDetector {
    pub fn name(&self) -> &str {
        match self {
            BaseDetector::Ranker { name, .. } => name,
            BaseDetector::Qa(d) => d.name(),
            BaseDetector::Fixed(d) => d.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalConfig {
    pub k: usize,
    pub seed: u64,
    pub merge_linke: bool,
    pub t_grid: Vec<usize>,
    pub qa_grid: Vec<f64>,
    pub l2_grid: Vec<f64>,
    pub freq_vote: bool,
    pub logistic: bool,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        CrossvalConfig {
            k: 5,
            seed: 0,
            merge_linke: true,
            t_grid: (1..=10).collect(),
            qa_grid: QA_THRESHOLD_GRID.to_vec(),
            l2_grid: DEFAULT_L2_GRID.to_vec(),
            freq_vote: false,
            logistic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorRun {
    pub name: String,
    /// Tuned settings per fold.
    pub parameters: Vec<BTreeMap<String, Value>>,
    pub folds: Vec<EvalReport>,
    pub aggregate: AggregateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalReport {
    pub config: CrossvalConfig,
    pub folds: FoldAssignment,
    pub detectors: Vec<DetectorRun>,
}

impl CrossvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn table(&self) -> String {
        let rows: Vec<(String, AggregateReport)> =
            self.detectors.iter().map(|d| (d.name.clone(), d.aggregate.clone())).collect();
        metrics::render_table(&rows)
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Config(String),
}

/// Labels for every example under every setting a detector may be tuned to.
enum Precomputed {
    Ranker(Vec<SentenceAnalysis>),
    Grid(Vec<(f64, Vec<LabelSet>)>),
    Fixed(Vec<LabelSet>),
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

fn labels(p: Vec<PredictionSet>) -> Vec<LabelSet> {
    p.into_iter().map(|p| p.labels).collect()
}

fn precompute(det: &mut BaseDetector, corpus: &Corpus, config: &CrossvalConfig) -> Result<Precomputed, ExperimentError> {
    Ok(match det {
        BaseDetector::Ranker { ranker, .. } => {
            Precomputed::Ranker(ranker.analyze_examples(&corpus.examples).map_err(DetectorError::from)?)
        }
        BaseDetector::Qa(d) => {
            let mut grid = Vec::new();
            for &t in &config.qa_grid {
                d.threshold = t;
                grid.push((t, labels(d.predict_all(&corpus.examples)?)));
            }
            Precomputed::Grid(grid)
        }
        BaseDetector::Fixed(d) => Precomputed::Fixed(labels(d.predict_all(&corpus.examples)?)),
    })
}

/// Labels on all examples with settings tuned on `train`.
fn fold_labels(
    pre: &Precomputed,
    golds: &[LabelSet],
    train: &[usize],
    config: &CrossvalConfig,
) -> Result<(Vec<LabelSet>, BTreeMap<String, Value>), ExperimentError> {
    let mut params = BTreeMap::new();
    let out = match pre {
        Precomputed::Ranker(analyses) => {
            let (t, _) = tune_threshold_from(&pick(analyses, train), &pick(golds, train), &config.t_grid, config.merge_linke)
                .map_err(DetectorError::from)?;
            params.insert("T".into(), json!(t));
            analyses.iter().map(|a| a.predict(t, config.merge_linke).labels).collect()
        }
        Precomputed::Grid(grid) => {
            let train_golds = pick(golds, train);
            let mut landscape = Vec::new();
            for (t, preds) in grid {
                landscape.push((*t, evaluate(&pick(preds, train), &train_golds, config.merge_linke)?.macro_f1));
            }
            let best = metrics::smallest_argmax(&landscape).ok_or_else(|| ExperimentError::Config("empty QA threshold grid".into()))?;
            params.insert("threshold".into(), json!(best));
            grid.iter().find(|(t, _)| *t == best).expect("best is on the grid").1.clone()
        }
        Precomputed::Fixed(preds) => preds.clone(),
    };
    Ok((out, params))
}

/// Runs every detector over the same k folds. Each fold's settings are tuned
/// on the other k-1 folds; the logistic ensemble further splits those 7:3
/// and picks its L2 penalty on the smaller part.
pub fn crossval(corpus: &Corpus, mut detectors: Vec<BaseDetector>, config: &CrossvalConfig) -> Result<CrossvalReport, ExperimentError> {
    if detectors.is_empty() {
        return Err(ExperimentError::Config("no detectors given".into()));
    }
    if config.logistic && config.l2_grid.is_empty() {
        return Err(ExperimentError::Config("empty L2 grid".into()));
    }
    let golds = gold_labels(&corpus.examples)?;
    let folds = kfold_split(corpus, config.k, config.seed)?;
    let pre: Vec<Precomputed> = detectors.iter_mut().map(|d| precompute(d, corpus, config)).collect::<Result<_, _>>()?;
    let names: Vec<String> = detectors.iter().map(|d| d.name().to_string()).collect();

    let mut runs: Vec<(String, Vec<BTreeMap<String, Value>>, Vec<EvalReport>)> =
        names.iter().map(|n| (n.clone(), Vec::new(), Vec::new())).collect();
    if config.freq_vote {
        runs.push((FREQ_VOTE_NAME.into(), Vec::new(), Vec::new()));
    }
    if config.logistic {
        runs.push((LOGISTIC_NAME.into(), Vec::new(), Vec::new()));
    }

    for f in 0..config.k {
        let train = folds.train_indices(f);
        let test = folds.fold_indices(f);
        let test_golds = pick(&golds, &test);
        let mut base = Vec::with_capacity(pre.len());
        for (i, p) in pre.iter().enumerate() {
            let (preds, params) = fold_labels(p, &golds, &train, config)?;
            runs[i].1.push(params);
            runs[i].2.push(evaluate(&pick(&preds, &test), &test_golds, config.merge_linke)?);
            base.push(preds);
        }
        let per_example = |i: usize| -> Vec<LabelSet> { base.iter().map(|b| b[i].clone()).collect() };
        let mut slot = pre.len();
        if config.freq_vote {
            let preds: Vec<LabelSet> = test
                .iter()
                .map(|&i| freq_vote(&per_example(i).into_iter().map(PredictionSet::new).collect::<Vec<_>>()).labels)
                .collect();
            runs[slot].1.push(BTreeMap::new());
            runs[slot].2.push(evaluate(&preds, &test_golds, config.merge_linke)?);
            slot += 1;
        }
        if config.logistic {
            let fold_seed = derive_seed(config.seed, &format!("logistic/{f}"));
            let (fit_idx, val_idx) = train_validation_split(&train, derive_seed(fold_seed, "split"));
            let rows = |idx: &[usize]| -> Vec<TrainingRow> {
                idx.iter().map(|&i| TrainingRow { detector_labels: per_example(i), gold: golds[i].clone() }).collect()
            };
            let fit_rows = rows(&fit_idx);
            let val_golds = pick(&golds, &val_idx);
            let mut landscape = Vec::new();
            let mut models = Vec::new();
            for &l2 in &config.l2_grid {
                let lc = LogisticConfig { l2, ..LogisticConfig::default() };
                let m = logistic_fit(&fit_rows, &names, derive_seed(fold_seed, "upsample"), &lc, config.merge_linke)?;
                let preds: Vec<LabelSet> =
                    val_idx.iter().map(|&i| m.predict(&per_example(i)).map(|p| p.labels)).collect::<Result<_, _>>()?;
                let score = if val_idx.is_empty() { 0.0 } else { evaluate(&preds, &val_golds, config.merge_linke)?.macro_f1 };
                landscape.push((l2, score));
                models.push(m);
            }
            let best = metrics::smallest_argmax(&landscape).expect("non-empty grid");
            let model = &models[config.l2_grid.iter().position(|&l| l == best).expect("on grid")];
            let preds: Vec<LabelSet> =
                test.iter().map(|&i| model.predict(&per_example(i)).map(|p| p.labels)).collect::<Result<_, _>>()?;
            runs[slot].1.push(BTreeMap::from([("l2".to_string(), json!(best))]));
            runs[slot].2.push(evaluate(&preds, &test_golds, config.merge_linke)?);
        }
    }

    let detectors = runs
        .into_iter()
        .map(|(name, parameters, folds)| {
            let aggregate = crossval_aggregate(&folds)?;
            Ok(DetectorRun { name, parameters, folds, aggregate })
        })
        .collect::<Result<_, MetricsError>>()?;
    Ok(CrossvalReport { config: config.clone(), folds, detectors })
}
