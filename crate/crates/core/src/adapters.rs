//! Uniform detector contract and adapters that turn external detector
//! outputs (dependency-arc judgments, QA span similarities, label files)
//! into prediction sets.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DialogueExample;
use crate::enderanker::{DetectError, EnDeRanker};
use crate::fsutil;
use crate::lingo::{map_role_to_class, SemanticRole};
use crate::metrics::{self, MetricsError};
use crate::types::{ErrorClass, LabelSet, PredictionSet, SummarySentence};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("{detector}: no record for {key}")]
    MissingRecord { detector: String, key: String },
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error(transparent)]
    EnDeRanker(#[from] DetectError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Invalid(String),
}

/// Anything that labels a summary sentence given its dialogue.
pub trait Detector: Send + Sync {
    fn name(&self) -> &str;

    fn predict(&self, example: &DialogueExample) -> Result<PredictionSet, DetectorError>;

    fn predict_all(&self, examples: &[DialogueExample]) -> Result<Vec<PredictionSet>, DetectorError> {
        examples.iter().map(|e| self.predict(e)).collect()
    }
}

/// Identifies a summary sentence across files. `model_id` may be omitted
/// in adapter files when a dialogue has a single summary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SentenceKey {
    pub dialogue_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    pub sentence_index: usize,
}

impl SentenceKey {
    pub fn of(s: &SummarySentence) -> Self {
        SentenceKey { dialogue_id: s.dialogue_id.clone(), model_id: Some(s.model_id.clone()), sentence_index: s.sentence_index }
    }

    fn without_model(&self) -> Self {
        SentenceKey { model_id: None, ..self.clone() }
    }
}

impl std::fmt::Display for SentenceKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.model_id {
            Some(m) => write!(f, "{}/{}#{}", self.dialogue_id, m, self.sentence_index),
            None => write!(f, "{}#{}", self.dialogue_id, self.sentence_index),
        }
    }
}

fn lookup<'a, T>(table: &'a HashMap<SentenceKey, T>, s: &SummarySentence) -> Option<&'a T> {
    let key = SentenceKey::of(s);
    table.get(&key).or_else(|| table.get(&key.without_model()))
}

fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, DetectorError> {
    let file_err = |message: String| DetectorError::File { path: path.display().to_string(), message };
    let raw = std::fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| file_err(format!("line {}: {e}", i + 1))))
        .collect()
}

// ---------------------------------------------------------------------------
// Dependency-arc adapter

/// Error class for an erroneous dependency arc type.
pub fn dae_arc_class(arc_type: &str) -> ErrorClass {
    match arc_type {
        "nsubj" | "obj" | "obl:agent" | "iobj" | "dobj" | "nmod" | "vocative" | "appos" | "nummod" | "compound"
        | "amod" | "det" | "clf" | "flat" => ErrorClass::EntE,
        "obl:tmod" | "advmod" => ErrorClass::CirE,
        "aux" => ErrorClass::PredE,
        _ => ErrorClass::Others,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcJudgment {
    #[serde(rename = "type")]
    pub arc_type: String,
    #[serde(default)]
    pub head: String,
    #[serde(default)]
    pub dependent: String,
    /// Probability that the arc is entailed by the dialogue.
    pub probability: f64,
    pub erroneous: bool,
}

impl ArcJudgment {
    /// An arc is erroneous when its entailment probability is below 0.5.
    pub fn new(arc_type: &str, head: &str, dependent: &str, probability: f64) -> Self {
        ArcJudgment {
            arc_type: arc_type.into(),
            head: head.into(),
            dependent: dependent.into(),
            probability,
            erroneous: probability < 0.5,
        }
    }
}

/// Union of the classes of all erroneous arcs; none means NoError.
pub fn dae_to_classes(judgments: &[ArcJudgment]) -> PredictionSet {
    PredictionSet::from_detected(judgments.iter().filter(|j| j.erroneous).map(|j| dae_arc_class(&j.arc_type)))
}

#[derive(Deserialize)]
struct RawArc {
    #[serde(rename = "type")]
    arc_type: String,
    #[serde(default)]
    head: String,
    #[serde(default)]
    dependent: String,
    probability: f64,
    #[serde(default)]
    erroneous: Option<bool>,
}

#[derive(Deserialize)]
struct ArcRecord {
    #[serde(flatten)]
    key: SentenceKey,
    arcs: Vec<RawArc>,
}

pub struct DaeDetector {
    name: String,
    table: HashMap<SentenceKey, Vec<ArcJudgment>>,
}

impl DaeDetector {
    pub fn new(name: &str, table: HashMap<SentenceKey, Vec<ArcJudgment>>) -> Self {
        DaeDetector { name: name.into(), table }
    }

    /// Reads `{dialogue_id, model_id?, sentence_index, arcs: [{type, probability, erroneous?}]}`
    /// lines. A stated `erroneous` flag must agree with the probability.
    pub fn from_path(name: &str, path: &Path) -> Result<Self, DetectorError> {
        let mut table = HashMap::new();
        for rec in read_records::<ArcRecord>(path)? {
            let mut arcs = Vec::with_capacity(rec.arcs.len());
            for a in rec.arcs {
                if !(0.0..=1.0).contains(&a.probability) {
                    return Err(DetectorError::Invalid(format!("{}: arc probability {} outside [0, 1]", rec.key, a.probability)));
                }
                let j = ArcJudgment::new(&a.arc_type, &a.head, &a.dependent, a.probability);
                if a.erroneous.is_some_and(|e| e != j.erroneous) {
                    return Err(DetectorError::Invalid(format!(
                        "{}: arc {} flagged {:?} but has probability {}",
                        rec.key, a.arc_type, a.erroneous, a.probability
                    )));
                }
                arcs.push(j);
            }
            table.insert(rec.key, arcs);
        }
        Ok(DaeDetector::new(name, table))
    }
}

impl Detector for DaeDetector {
    fn name(&self) -> &str {
        &self.name
    }

    fn predict(&self, example: &DialogueExample) -> Result<PredictionSet, DetectorError> {
        lookup(&self.table, &example.sentence)
            .map(|arcs| dae_to_classes(arcs))
            .ok_or_else(|| DetectorError::MissingRecord { detector: self.name.clone(), key: SentenceKey::of(&example.sentence).to_string() })
    }
}

// ---------------------------------------------------------------------------
// QA adapter

pub const QA_THRESHOLD_GRID: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanAnswer {
    #[serde(rename = "text")]
    pub span_text: String,
    pub role: SemanticRole,
    pub similarity: f64,
}

/// Every span whose answer similarity is below `threshold` contributes the
/// class of its role; none means NoError.
pub fn qafe_to_classes(answers: &[SpanAnswer], threshold: f64) -> PredictionSet {
    PredictionSet::from_detected(
        answers.iter().filter(|a| a.similarity < threshold).map(|a| map_role_to_class(&a.span_text, &a.role)),
    )
}

#[derive(Deserialize)]
struct SpanRecord {
    #[serde(flatten)]
    key: SentenceKey,
    spans: Vec<SpanAnswer>,
}

pub struct QafeDetector {
    name: String,
    table: HashMap<SentenceKey, Vec<SpanAnswer>>,
    pub threshold: f64,
}

impl QafeDetector {
    pub fn new(name: &str, table: HashMap<SentenceKey, Vec<SpanAnswer>>, threshold: f64) -> Self {
        QafeDetector { name: name.into(), table, threshold }
    }

    /// Reads `{dialogue_id, model_id?, sentence_index, spans: [{text, role, similarity}]}` lines.
    pub fn from_path(name: &str, path: &Path, threshold: f64) -> Result<Self, DetectorError> {
        let table = read_records::<SpanRecord>(path)?.into_iter().map(|r| (r.key, r.spans)).collect();
        Ok(QafeDetector::new(name, table, threshold))
    }

    fn answers(&self, example: &DialogueExample) -> Result<&Vec<SpanAnswer>, DetectorError> {
        lookup(&self.table, &example.sentence)
            .ok_or_else(|| DetectorError::MissingRecord { detector: self.name.clone(), key: SentenceKey::of(&example.sentence).to_string() })
    }

    /// Smallest threshold in `grid` with the best macro-F1 on `examples`.
    pub fn tune_threshold(&self, examples: &[DialogueExample], grid: &[f64], merge_linke: bool) -> Result<f64, DetectorError> {
        let golds = gold_labels(examples)?;
        let answers: Vec<&Vec<SpanAnswer>> = examples.iter().map(|e| self.answers(e)).collect::<Result<_, _>>()?;
        let mut landscape = Vec::with_capacity(grid.len());
        for &t in grid {
            let preds: Vec<LabelSet> = answers.iter().map(|a| qafe_to_classes(a, t).labels).collect();
            landscape.push((t, metrics::evaluate(&preds, &golds, merge_linke)?.macro_f1));
        }
        metrics::smallest_argmax(&landscape).ok_or_else(|| DetectorError::Invalid("empty threshold grid".into()))
    }
}

impl Detector for QafeDetector {
    fn name(&self) -> &str {
        &self.name
    }

    fn predict(&self, example: &DialogueExample) -> Result<PredictionSet, DetectorError> {
        Ok(qafe_to_classes(self.answers(example)?, self.threshold))
    }
}

pub fn gold_labels(examples: &[DialogueExample]) -> Result<Vec<LabelSet>, DetectorError> {
    examples
        .iter()
        .map(|e| {
            e.gold
                .as_ref()
                .map(|g| g.labels.clone())
                .ok_or_else(|| DetectorError::Invalid(format!("{} has no gold labels", SentenceKey::of(&e.sentence))))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Prediction files

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(flatten)]
    pub key: SentenceKey,
    #[serde(flatten)]
    pub prediction: PredictionSet,
}

pub fn prediction_records(examples: &[DialogueExample], predictions: &[PredictionSet]) -> Vec<PredictionRecord> {
    examples
        .iter()
        .zip(predictions)
        .map(|(e, p)| PredictionRecord { key: SentenceKey::of(&e.sentence), prediction: p.clone() })
        .collect()
}

pub fn predictions_to_jsonl(records: &[PredictionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("prediction serializes"));
        out.push('\n');
    }
    out
}

pub fn save_predictions(path: &Path, records: &[PredictionRecord]) -> std::io::Result<()> {
    fsutil::write_atomic(path, predictions_to_jsonl(records).as_bytes())
}

/// Replays labels produced elsewhere, e.g. by a supervised classifier.
pub struct PredictionFileDetector {
    name: String,
    table: HashMap<SentenceKey, PredictionSet>,
}

impl PredictionFileDetector {
    pub fn from_records(name: &str, records: Vec<PredictionRecord>) -> Self {
        PredictionFileDetector { name: name.into(), table: records.into_iter().map(|r| (r.key, r.prediction)).collect() }
    }

    pub fn from_path(name: &str, path: &Path) -> Result<Self, DetectorError> {
        Ok(Self::from_records(name, read_records(path)?))
    }
}

impl Detector for PredictionFileDetector {
    fn name(&self) -> &str {
        &self.name
    }

    fn predict(&self, example: &DialogueExample) -> Result<PredictionSet, DetectorError> {
        lookup(&self.table, &example.sentence)
            .map(|p| PredictionSet::new(p.labels.clone()))
            .ok_or_else(|| DetectorError::MissingRecord { detector: self.name.clone(), key: SentenceKey::of(&example.sentence).to_string() })
    }
}

/// EnDeRanker behind the detector contract.
pub struct EnDeRankerDetector {
    pub name: String,
    pub ranker: EnDeRanker,
}

impl Detector for EnDeRankerDetector {
    fn name(&self) -> &str {
        &self.name
    }

    fn predict(&self, example: &DialogueExample) -> Result<PredictionSet, DetectorError> {
        let a = self.ranker.analyze_example(example)?;
        Ok(a.predict(self.ranker.config.threshold_t, self.ranker.config.merge_linke))
    }

    fn predict_all(&self, examples: &[DialogueExample]) -> Result<Vec<PredictionSet>, DetectorError> {
        Ok(self.ranker.detect_examples(examples)?)
    }
}
