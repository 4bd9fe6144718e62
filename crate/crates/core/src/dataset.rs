//! Corpus files, experiment splits and corpus statistics.
//!
//! A corpus file holds one JSON object per line. Dialogue records look like
//! `{"dialogue": {"id": .., "query": .., "utterances": [{"speaker": .., "text": ..}]}}`;
//! sentence records carry `dialogue_id`, `model_id`, `sentence_index`, `text`
//! and an optional `gold` annotation. Records may appear in any order.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil;
use crate::types::{Dialogue, ErrorClass, GoldAnnotation, SummarySentence};

/// One unit of classification.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueExample {
    pub dialogue: Arc<Dialogue>,
    pub sentence: SummarySentence,
    pub gold: Option<GoldAnnotation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    /// Dialogues in file order.
    pub dialogues: Vec<Arc<Dialogue>>,
    pub examples: Vec<DialogueExample>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown dialogue id {id:?}")]
    DanglingDialogue { line: usize, id: String },
    #[error("line {line}: duplicate dialogue id {id:?}")]
    DuplicateDialogue { line: usize, id: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("corpus has no sentence records")]
    Empty,
}

#[derive(Serialize, Deserialize)]
struct DialogueRecord {
    dialogue: Dialogue,
}

#[derive(Serialize, Deserialize)]
struct SentenceRecord {
    #[serde(flatten)]
    sentence: SummarySentence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold: Option<GoldAnnotation>,
}

fn validate_dialogue(d: &mut Dialogue, line: usize) -> Result<(), LoadError> {
    let invalid = |message: String| LoadError::Invalid { line, message };
    if d.utterances.is_empty() {
        return Err(invalid(format!("dialogue {:?} has no utterances", d.id)));
    }
    if d.utterances.iter().any(|u| u.speaker.trim().is_empty()) {
        return Err(invalid(format!("dialogue {:?} has an utterance without a speaker", d.id)));
    }
    if d.utterances.iter().all(|u| u.index == 0) {
        for (i, u) in d.utterances.iter_mut().enumerate() {
            u.index = i;
        }
    } else if d.utterances.windows(2).any(|w| w[0].index >= w[1].index) {
        return Err(invalid(format!("dialogue {:?} has non-increasing utterance indices", d.id)));
    }
    Ok(())
}

/// Parses corpus text. `name` labels the result.
pub fn parse_corpus(name: &str, input: &str) -> Result<Corpus, LoadError> {
    let mut dialogues: Vec<Arc<Dialogue>> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut pending: Vec<(usize, SentenceRecord)> = Vec::new();

    for (i, raw) in input.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| LoadError::Parse { line, message: e.to_string() })?;
        let parse_err = |e: serde_json::Error| LoadError::Parse { line, message: e.to_string() };
        if value.get("dialogue").is_some() {
            let mut rec: DialogueRecord = serde_json::from_value(value).map_err(parse_err)?;
            validate_dialogue(&mut rec.dialogue, line)?;
            if by_id.contains_key(&rec.dialogue.id) {
                return Err(LoadError::DuplicateDialogue { line, id: rec.dialogue.id });
            }
            by_id.insert(rec.dialogue.id.clone(), dialogues.len());
            dialogues.push(Arc::new(rec.dialogue));
        } else {
            let rec: SentenceRecord = serde_json::from_value(value).map_err(parse_err)?;
            if rec.sentence.text.trim().is_empty() {
                return Err(LoadError::Invalid { line, message: "empty sentence text".into() });
            }
            if let Some(gold) = &rec.gold {
                gold.validate(&rec.sentence.text)
                    .map_err(|e| LoadError::Invalid { line, message: e.to_string() })?;
            }
            pending.push((line, rec));
        }
    }

    let mut examples = Vec::with_capacity(pending.len());
    for (line, rec) in pending {
        let idx = *by_id
            .get(&rec.sentence.dialogue_id)
            .ok_or_else(|| LoadError::DanglingDialogue { line, id: rec.sentence.dialogue_id.clone() })?;
        examples.push(DialogueExample { dialogue: Arc::clone(&dialogues[idx]), sentence: rec.sentence, gold: rec.gold });
    }
    if examples.is_empty() {
        return Err(LoadError::Empty);
    }
    Ok(Corpus { name: name.to_string(), dialogues, examples })
}

pub fn load_corpus(path: &Path) -> Result<Corpus, LoadError> {
    let input = std::fs::read_to_string(path)
        .map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_corpus(&name, &input)
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Corpus restricted to the examples at `indices`, keeping only the
    /// dialogues they reference.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        let examples: Vec<DialogueExample> = indices.iter().map(|&i| self.examples[i].clone()).collect();
        let dialogues = self
            .dialogues
            .iter()
            .filter(|d| examples.iter().any(|e| e.dialogue.id == d.id))
            .cloned()
            .collect();
        Corpus { name: self.name.clone(), dialogues, examples }
    }

    /// Serializes to the line format: dialogues first, then sentences.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.dialogues {
            let rec = DialogueRecord { dialogue: (**d).clone() };
            out.push_str(&serde_json::to_string(&rec).expect("dialogue serializes"));
            out.push('\n');
        }
        for ex in &self.examples {
            let rec = SentenceRecord { sentence: ex.sentence.clone(), gold: ex.gold.clone() };
            out.push_str(&serde_json::to_string(&rec).expect("sentence serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> std::io::Result<()> {
    fsutil::write_atomic(path, corpus.to_jsonl().as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("k must be at least 2, got {0}")]
    KTooSmall(usize),
    #[error("cannot split {n} examples into {k} folds")]
    KTooLarge { k: usize, n: usize },
}

/// Seeded permutation of `0..n`.
pub fn seeded_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    /// `fold_of[i]` is the fold of example `i`.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    /// Example indices in fold `f`, ascending.
    pub fn fold_indices(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == f).collect()
    }

    /// Example indices outside fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != f).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Splits `n` example indices into `k` folds. A seeded permutation is cut
/// into consecutive blocks; the first `n % k` folds get one extra example.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<FoldAssignment, SplitError> {
    if k < 2 {
        return Err(SplitError::KTooSmall(k));
    }
    if k > n {
        return Err(SplitError::KTooLarge { k, n });
    }
    let perm = seeded_permutation(n, seed);
    let (base, extra) = (n / k, n % k);
    let mut fold_of = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &perm[pos..pos + size] {
            fold_of[i] = f;
        }
        pos += size;
    }
    Ok(FoldAssignment { k, seed, fold_of })
}

pub fn kfold_split(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldAssignment, SplitError> {
    kfold_indices(corpus.len(), k, seed)
}

/// 7:3 train/validation split of `indices` through a seeded permutation.
/// The train side gets `round(0.7 * n)` items (halves round up); both sides
/// keep ascending order.
pub fn train_validation_split(indices: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n = indices.len();
    let n_train = (7 * n + 5) / 10;
    let perm = seeded_permutation(n, seed);
    let mut train: Vec<usize> = perm[..n_train].iter().map(|&p| indices[p]).collect();
    let mut val: Vec<usize> = perm[n_train..].iter().map(|&p| indices[p]).collect();
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub example_count: usize,
    pub dialogue_count: usize,
    /// Sentence-level label occurrences; every class is present.
    pub per_class_counts: BTreeMap<ErrorClass, usize>,
    pub avg_tokens_per_dialogue: f64,
    pub avg_utterances_per_dialogue: f64,
    pub avg_tokens_per_sentence: f64,
    /// Sentences per (dialogue, model) summary.
    pub avg_sentences_per_summary: f64,
    /// Mean query length over dialogues that have a query.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_query_tokens: Option<f64>,
    pub inconsistent_sentences: usize,
    pub inconsistent_rate: f64,
    pub avg_errors_per_inconsistent_sentence: f64,
    /// The same figures per dialogue `source`, when sources are recorded.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_source: BTreeMap<String, StatsReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("example {index} ({dialogue_id}/{model_id}#{sentence_index}) has no gold annotation")]
    MissingGold { index: usize, dialogue_id: String, model_id: String, sentence_index: usize },
}

fn whitespace_tokens(s: &str) -> usize {
    s.split_whitespace().count()
}

fn mean(total: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total as f64 / n as f64
    }
}

fn stats_of(examples: &[&DialogueExample]) -> StatsReport {
    let mut per_class_counts: BTreeMap<ErrorClass, usize> = ErrorClass::ALL.iter().map(|&c| (c, 0)).collect();
    let mut inconsistent = 0;
    let mut errors = 0;
    let mut sentence_tokens = 0;
    let mut summaries: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut dialogues: Vec<&Dialogue> = Vec::new();
    for ex in examples {
        let gold = ex.gold.as_ref().expect("checked by caller");
        for c in gold.labels.iter() {
            *per_class_counts.get_mut(&c).expect("all classes present") += 1;
        }
        if !gold.labels.is_no_error() {
            inconsistent += 1;
            errors += gold.labels.error_count();
        }
        sentence_tokens += whitespace_tokens(&ex.sentence.text);
        *summaries.entry((&ex.sentence.dialogue_id, &ex.sentence.model_id)).or_default() += 1;
        if !dialogues.iter().any(|d| d.id == ex.dialogue.id) {
            dialogues.push(&ex.dialogue);
        }
    }
    let dialogue_tokens: usize =
        dialogues.iter().flat_map(|d| d.utterances.iter()).map(|u| whitespace_tokens(&u.text)).sum();
    let utterances: usize = dialogues.iter().map(|d| d.utterances.len()).sum();
    let queries: Vec<usize> = dialogues.iter().filter_map(|d| d.query.as_deref()).map(whitespace_tokens).collect();
    StatsReport {
        example_count: examples.len(),
        dialogue_count: dialogues.len(),
        per_class_counts,
        avg_tokens_per_dialogue: mean(dialogue_tokens, dialogues.len()),
        avg_utterances_per_dialogue: mean(utterances, dialogues.len()),
        avg_tokens_per_sentence: mean(sentence_tokens, examples.len()),
        avg_sentences_per_summary: mean(examples.len(), summaries.len()),
        avg_query_tokens: (!queries.is_empty()).then(|| mean(queries.iter().sum(), queries.len())),
        inconsistent_sentences: inconsistent,
        inconsistent_rate: mean(inconsistent, examples.len()),
        avg_errors_per_inconsistent_sentence: mean(errors, inconsistent),
        by_source: BTreeMap::new(),
    }
}

/// Token counts split on whitespace.
pub fn corpus_stats(corpus: &Corpus) -> Result<StatsReport, StatsError> {
    if let Some((index, ex)) = corpus.examples.iter().enumerate().find(|(_, e)| e.gold.is_none()) {
        return Err(StatsError::MissingGold {
            index,
            dialogue_id: ex.sentence.dialogue_id.clone(),
            model_id: ex.sentence.model_id.clone(),
            sentence_index: ex.sentence.sentence_index,
        });
    }
    let all: Vec<&DialogueExample> = corpus.examples.iter().collect();
    let mut report = stats_of(&all);
    let mut groups: BTreeMap<String, Vec<&DialogueExample>> = BTreeMap::new();
    for ex in &corpus.examples {
        if let Some(src) = &ex.dialogue.source {
            groups.entry(src.clone()).or_default().push(ex);
        }
    }
    report.by_source = groups.into_iter().map(|(k, v)| (k, stats_of(&v))).collect();
    Ok(report)
}

/// Plain-text rendering of a stats report.
pub fn render_stats(report: &StatsReport) -> String {
    let mut columns: Vec<(&str, &StatsReport)> = vec![("All", report)];
    columns.extend(report.by_source.iter().map(|(k, v)| (k.as_str(), v)));
    let mut out = String::new();
    let _ = write!(out, "{:<34}", "");
    for (name, _) in &columns {
        let _ = write!(out, "{name:>12}");
    }
    out.push('\n');
    let mut row = |label: &str, f: &dyn Fn(&StatsReport) -> String| {
        let _ = write!(out, "{label:<34}");
        for (_, r) in &columns {
            let _ = write!(out, "{:>12}", f(r));
        }
        out.push('\n');
    };
    row("examples", &|r| r.example_count.to_string());
    row("dialogues", &|r| r.dialogue_count.to_string());
    row("avg tokens per dialogue", &|r| format!("{:.2}", r.avg_tokens_per_dialogue));
    row("avg utterances per dialogue", &|r| format!("{:.2}", r.avg_utterances_per_dialogue));
    row("avg tokens per sentence", &|r| format!("{:.2}", r.avg_tokens_per_sentence));
    row("avg sentences per summary", &|r| format!("{:.2}", r.avg_sentences_per_summary));
    row("avg query tokens", &|r| r.avg_query_tokens.map_or("-".into(), |q| format!("{q:.2}")));
    for c in ErrorClass::ALL {
        row(c.as_str(), &|r| r.per_class_counts[&c].to_string());
    }
    row("inconsistent sentences", &|r| r.inconsistent_sentences.to_string());
    row("inconsistent rate (%)", &|r| format!("{:.1}", 100.0 * r.inconsistent_rate));
    row("avg errors per inconsistent", &|r| format!("{:.2}", r.avg_errors_per_inconsistent_sentence));
    out
}
