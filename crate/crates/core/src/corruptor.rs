//! Synthetic negatives from reference-summary sentences: one span of the
//! target category is swapped for a same-category span from the same
//! dialogue or from the rest of the corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Corpus;
use crate::fsutil;
use crate::lingo::{self, is_pronoun, map_role_to_class, morph, role_for_span, AnalysisError, Annotation, AnnotatorProvider, PRONOUNS};
use crate::text;
use crate::types::{Dialogue, ErrorClass, ErrorSpan, GoldAnnotation, LabelSet, Verifiability};

/// Causal markers and their reversed-causality counterparts.
pub const CAUSE_MARKERS: [&str; 4] = ["because", "since", "as", "cos"];
pub const RESULT_MARKERS: [&str; 4] = ["so", "therefore", "thus", "hence"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReplacementScope {
    SameDialogue,
    CorpusWide,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacedSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptedExample {
    pub original: String,
    pub corrupted: String,
    /// Offsets into `original`.
    pub replaced_span: ReplacedSpan,
    pub replacement: String,
    pub label: ErrorClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifiability: Option<Verifiability>,
    /// Unset for CorefE and LinkE, whose inventories are closed lists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement_scope: Option<ReplacementScope>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorruptError {
    #[error("sentence has no replaceable {0} unit")]
    NoReplaceableUnit(ErrorClass),
    #[error("no {0} replacement available for this scope")]
    EmptyPool(ErrorClass),
    #[error("NoError is not a corruption target")]
    NotAnError,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Replaceable material of one dialogue.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DialogueInventory {
    /// (NE class, text); speakers are listed as PERSON.
    pub entities: Vec<(String, String)>,
    /// (modifier role, text)
    pub modifiers: Vec<(String, String)>,
    pub verb_lemmas: Vec<String>,
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

impl DialogueInventory {
    pub fn build(dialogue: &Dialogue, provider: &dyn AnnotatorProvider) -> Result<Self, AnalysisError> {
        let mut inv = DialogueInventory::default();
        for s in dialogue.speakers() {
            push_unique(&mut inv.entities, ("PERSON".to_string(), s.to_string()));
        }
        for u in &dialogue.utterances {
            if u.text.trim().is_empty() {
                continue;
            }
            let ann = lingo::analyze(provider, &u.text)?;
            let slice = |s: usize, e: usize| text::slice_chars(&u.text, s, e).unwrap_or_default().to_string();
            for e in &ann.entities {
                push_unique(&mut inv.entities, (e.label.clone(), slice(e.start, e.end)));
            }
            for f in &ann.srl_frames {
                for a in &f.args {
                    if lingo::SemanticRole::new(a.role.clone()).is_modifier() {
                        push_unique(&mut inv.modifiers, (a.role.clone(), slice(a.start, a.end)));
                    }
                }
            }
            for (t, pos) in ann.tokens.iter().zip(&ann.pos) {
                if pos == "VERB" {
                    let lemma = t.lemma.clone().unwrap_or_else(|| morph::lemmatize(&t.text));
                    push_unique(&mut inv.verb_lemmas, lemma);
                }
            }
        }
        Ok(inv)
    }
}

/// Inventories of every dialogue, in corpus order.
#[derive(Debug, Clone, Default)]
pub struct ReplacementPools {
    pub dialogues: Vec<(String, DialogueInventory)>,
}

impl ReplacementPools {
    pub fn build(corpus: &Corpus, provider: &dyn AnnotatorProvider) -> Result<Self, AnalysisError> {
        let dialogues = corpus
            .dialogues
            .iter()
            .map(|d| Ok((d.id.clone(), DialogueInventory::build(d, provider)?)))
            .collect::<Result<_, AnalysisError>>()?;
        Ok(ReplacementPools { dialogues })
    }

    pub fn own(&self, id: &str) -> Option<&DialogueInventory> {
        self.dialogues.iter().find(|(d, _)| d == id).map(|(_, inv)| inv)
    }

    /// Items drawn from `f` over the inventory of `id` (same dialogue) or
    /// over every other dialogue (corpus-wide), deduplicated in order.
    fn collect<T: Clone + PartialEq>(&self, id: &str, scope: ReplacementScope, f: impl Fn(&DialogueInventory) -> Vec<T>) -> Vec<T> {
        let mut out = Vec::new();
        for (d, inv) in &self.dialogues {
            let keep = match scope {
                ReplacementScope::SameDialogue => d == id,
                ReplacementScope::CorpusWide => d != id,
            };
            if keep {
                for x in f(inv) {
                    push_unique(&mut out, x);
                }
            }
        }
        out
    }
}

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

fn match_case(template: &str, word: &str) -> String {
    let upper = template.chars().next().is_some_and(char::is_uppercase);
    if word == "i" {
        return "I".into();
    }
    if upper {
        lingo::capitalize(word)
    } else {
        word.to_string()
    }
}

struct Unit {
    start: usize,
    end: usize,
    text: String,
    /// (replacement, whether it is grounded in the dialogue)
    replacements: Vec<(String, bool)>,
}

fn units(
    sentence: &str,
    ann: &Annotation,
    dialogue: &Dialogue,
    pools: &ReplacementPools,
    target: ErrorClass,
    scope: ReplacementScope,
) -> Result<Vec<Unit>, CorruptError> {
    let frames = &ann.srl_frames;
    let slice = |s: usize, e: usize| text::slice_chars(sentence, s, e).unwrap_or_default().to_string();
    let class_of = |s: usize, e: usize| map_role_to_class(&slice(s, e), &role_for_span(frames, s, e));
    // For scoped classes, corpus-wide replacements must not occur in the dialogue.
    let admissible = |r: &str| scope == ReplacementScope::SameDialogue || !dialogue.mentions(r);
    let grounded = |r: String| {
        let g = dialogue.mentions(&r);
        (r, g)
    };
    let mut found: Vec<Unit> = Vec::new();
    let mut any_unit = false;
    let add = |start: usize, end: usize, candidates: Vec<(String, bool)>, found: &mut Vec<Unit>| {
        let text = slice(start, end);
        let replacements: Vec<(String, bool)> =
            candidates.into_iter().filter(|(r, _)| fold(r) != fold(&text) && !r.trim().is_empty()).collect();
        if !found.iter().any(|u| u.start == start && u.end == end) {
            found.push(Unit { start, end, text, replacements });
        }
    };
    match target {
        ErrorClass::NoError => return Err(CorruptError::NotAnError),
        ErrorClass::EntE => {
            for e in &ann.entities {
                if class_of(e.start, e.end) != ErrorClass::EntE {
                    continue;
                }
                any_unit = true;
                let pool = pools.collect(&dialogue.id, scope, |inv| {
                    inv.entities.iter().filter(|(l, _)| *l == e.label).map(|(_, t)| t.clone()).collect()
                });
                let pool = pool.into_iter().filter(|r| admissible(r) && !is_pronoun(r)).map(&grounded).collect();
                add(e.start, e.end, pool, &mut found);
            }
        }
        ErrorClass::CirE => {
            let mut spans: Vec<(usize, usize, String)> = Vec::new();
            for f in frames {
                for a in &f.args {
                    if lingo::SemanticRole::new(a.role.clone()).is_modifier() {
                        push_unique(&mut spans, (a.start, a.end, a.role.clone()));
                    }
                }
            }
            for (s, e, _) in spans {
                // The role that the span actually resolves to decides the pool.
                let role = role_for_span(frames, s, e);
                if map_role_to_class(&slice(s, e), &role) != ErrorClass::CirE {
                    continue;
                }
                any_unit = true;
                let pool = pools.collect(&dialogue.id, scope, |inv| {
                    inv.modifiers.iter().filter(|(r, _)| *r == role.as_str()).map(|(_, t)| t.clone()).collect()
                });
                add(s, e, pool.into_iter().filter(|r| admissible(r)).map(&grounded).collect(), &mut found);
            }
        }
        ErrorClass::PredE => {
            for (t, pos) in ann.tokens.iter().zip(&ann.pos) {
                if pos != "VERB" || class_of(t.start, t.end) != ErrorClass::PredE {
                    continue;
                }
                any_unit = true;
                let own_lemma = t.lemma.clone().unwrap_or_else(|| morph::lemmatize(&t.text));
                let lemmas = pools.collect(&dialogue.id, scope, |inv| inv.verb_lemmas.clone());
                let own_lemmas: BTreeSet<String> =
                    pools.own(&dialogue.id).map(|inv| inv.verb_lemmas.iter().cloned().collect()).unwrap_or_default();
                let mut forms = Vec::new();
                for l in lemmas {
                    if fold(&l) == fold(&own_lemma) || (scope == ReplacementScope::CorpusWide && own_lemmas.contains(&l)) {
                        continue;
                    }
                    let form = match_case(&t.text, &morph::match_verb_form(&t.text, &l));
                    if scope == ReplacementScope::CorpusWide && dialogue.mentions(&form) {
                        continue;
                    }
                    push_unique(&mut forms, (form, own_lemmas.contains(&l)));
                }
                add(t.start, t.end, forms, &mut found);
            }
        }
        ErrorClass::CorefE => {
            for t in &ann.tokens {
                if !is_pronoun(&t.text) || class_of(t.start, t.end) != ErrorClass::CorefE {
                    continue;
                }
                any_unit = true;
                let pool = PRONOUNS.iter().map(|p| (match_case(&t.text, p), false)).collect();
                add(t.start, t.end, pool, &mut found);
            }
        }
        ErrorClass::LinkE => {
            for t in &ann.tokens {
                let w = fold(&t.text);
                let reversed: &[&str] = if CAUSE_MARKERS.contains(&w.as_str()) {
                    &RESULT_MARKERS
                } else if RESULT_MARKERS.contains(&w.as_str()) {
                    &CAUSE_MARKERS
                } else {
                    continue;
                };
                any_unit = true;
                add(t.start, t.end, reversed.iter().map(|m| (match_case(&t.text, m), false)).collect(), &mut found);
            }
        }
        ErrorClass::Others => {
            for (t, pos) in ann.tokens.iter().zip(&ann.pos) {
                if !matches!(pos.as_str(), "NOUN" | "PROPN" | "ADJ") || class_of(t.start, t.end) != ErrorClass::Others {
                    continue;
                }
                any_unit = true;
                let pool = pools.collect(&dialogue.id, scope, |inv| inv.entities.iter().map(|(_, t)| t.clone()).collect());
                let pool = pool.into_iter().filter(|r| admissible(r) && !is_pronoun(r)).map(&grounded).collect();
                add(t.start, t.end, pool, &mut found);
            }
        }
    }
    if !any_unit {
        return Err(CorruptError::NoReplaceableUnit(target));
    }
    let usable: Vec<Unit> = found.into_iter().filter(|u| !u.replacements.is_empty()).collect();
    if usable.is_empty() {
        return Err(CorruptError::EmptyPool(target));
    }
    Ok(usable)
}

/// Whether `class` takes a same-dialogue / corpus-wide split.
pub fn is_scoped(class: ErrorClass) -> bool {
    class.supports_verifiability()
}

/// Corrupts one unit of an already analyzed sentence.
pub fn corrupt_annotated<R: Rng + ?Sized>(
    sentence: &str,
    annotation: &Annotation,
    dialogue: &Dialogue,
    pools: &ReplacementPools,
    target: ErrorClass,
    scope: ReplacementScope,
    rng: &mut R,
) -> Result<CorruptedExample, CorruptError> {
    let scope = if is_scoped(target) { scope } else { ReplacementScope::SameDialogue };
    let candidates = units(sentence, annotation, dialogue, pools, target, scope)?;
    let unit = candidates.choose(rng).expect("non-empty");
    let (replacement, intrinsic) = unit.replacements.choose(rng).expect("non-empty").clone();
    let corrupted = text::splice_chars(sentence, unit.start, unit.end, &replacement).expect("unit inside sentence");
    let (verifiability, replacement_scope) = if is_scoped(target) {
        (Some(if intrinsic { Verifiability::Intrinsic } else { Verifiability::Extrinsic }), Some(scope))
    } else {
        (None, None)
    };
    Ok(CorruptedExample {
        original: sentence.to_string(),
        corrupted,
        replaced_span: ReplacedSpan { start: unit.start, end: unit.end, text: unit.text.clone() },
        replacement,
        label: target,
        verifiability,
        replacement_scope,
    })
}

/// Corrupts `sentence` for `target`. `scope` is ignored for CorefE and LinkE.
pub fn corrupt<R: Rng + ?Sized>(
    sentence: &str,
    dialogue: &Dialogue,
    pools: &ReplacementPools,
    target: ErrorClass,
    scope: ReplacementScope,
    provider: &dyn AnnotatorProvider,
    rng: &mut R,
) -> Result<CorruptedExample, CorruptError> {
    let ann = lingo::analyze(provider, sentence)?;
    corrupt_annotated(sentence, &ann, dialogue, pools, target, scope, rng)
}

/// A generated example tied to the sentence it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticExample {
    pub dialogue_id: String,
    pub source_model_id: String,
    pub source_sentence_index: usize,
    #[serde(flatten)]
    pub example: CorruptedExample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub requested: usize,
    pub achieved: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub negatives: Vec<SyntheticExample>,
    /// Corpus example indices emitted unchanged as NoError.
    pub positives: Vec<usize>,
    /// Classes that ran out of material.
    pub shortfalls: BTreeMap<ErrorClass, Shortfall>,
}

fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h = (h ^ p).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

/// `per_class_count` negatives for every error class plus every sentence as
/// a NoError positive. Scoped classes put the first half (rounded up) in
/// the same-dialogue scope and the rest corpus-wide.
pub fn generate_training_set(
    corpus: &Corpus,
    provider: &dyn AnnotatorProvider,
    per_class_count: usize,
    seed: u64,
) -> Result<TrainingSet, CorruptError> {
    let pools = ReplacementPools::build(corpus, provider)?;
    let annotations: Vec<Annotation> =
        corpus.examples.iter().map(|e| lingo::analyze(provider, &e.sentence.text)).collect::<Result<_, _>>()?;
    let mut negatives = Vec::new();
    let mut shortfalls = BTreeMap::new();
    for (ci, &class) in ErrorClass::ERRORS.iter().enumerate() {
        let plan: Vec<(ReplacementScope, usize)> = if is_scoped(class) {
            let same = per_class_count.div_ceil(2);
            vec![(ReplacementScope::SameDialogue, same), (ReplacementScope::CorpusWide, per_class_count - same)]
        } else {
            vec![(ReplacementScope::SameDialogue, per_class_count)]
        };
        let mut achieved = 0;
        for (si, (scope, want)) in plan.into_iter().enumerate() {
            if want == 0 {
                continue;
            }
            let mut order: Vec<usize> = (0..corpus.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[ci as u64, si as u64])));
            let mut got = 0;
            let mut failures_in_row = 0;
            let mut attempt: u64 = 0;
            while got < want && failures_in_row < order.len() {
                let i = order[(attempt as usize) % order.len()];
                let ex = &corpus.examples[i];
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[ci as u64, si as u64, attempt]));
                attempt += 1;
                match corrupt_annotated(&ex.sentence.text, &annotations[i], &ex.dialogue, &pools, class, scope, &mut rng) {
                    Ok(c) => {
                        failures_in_row = 0;
                        got += 1;
                        negatives.push(SyntheticExample {
                            dialogue_id: ex.dialogue.id.clone(),
                            source_model_id: ex.sentence.model_id.clone(),
                            source_sentence_index: ex.sentence.sentence_index,
                            example: c,
                        });
                    }
                    Err(CorruptError::NoReplaceableUnit(_) | CorruptError::EmptyPool(_)) => failures_in_row += 1,
                    Err(e) => return Err(e),
                }
            }
            achieved += got;
        }
        if achieved < per_class_count {
            shortfalls.insert(class, Shortfall { requested: per_class_count, achieved });
        }
    }
    Ok(TrainingSet { negatives, positives: (0..corpus.len()).collect(), shortfalls })
}

#[derive(Serialize)]
struct Provenance<'a> {
    replaced_span: &'a ReplacedSpan,
    replacement: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    scope: Option<ReplacementScope>,
    source_model_id: &'a str,
    source_sentence_index: usize,
}

#[derive(Serialize)]
struct ExportRecord<'a> {
    dialogue_id: &'a str,
    model_id: &'a str,
    sentence_index: usize,
    text: &'a str,
    gold: GoldAnnotation,
    #[serde(skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance<'a>>,
}

pub const SYNTHETIC_MODEL_ID: &str = "synthetic";
pub const REFERENCE_MODEL_ID: &str = "reference";

/// Training data in the corpus line format. Negatives carry the synthetic
/// label, a span over the replacement and a provenance block; sentence
/// indices number the records.
pub fn export_training_set(corpus: &Corpus, set: &TrainingSet) -> String {
    let mut out = String::new();
    for d in &corpus.dialogues {
        let _ = writeln!(out, "{}", serde_json::json!({ "dialogue": **d }));
    }
    let mut serial = 0;
    for &i in &set.positives {
        let ex = &corpus.examples[i];
        let rec = ExportRecord {
            dialogue_id: &ex.dialogue.id,
            model_id: REFERENCE_MODEL_ID,
            sentence_index: serial,
            text: &ex.sentence.text,
            gold: GoldAnnotation { labels: LabelSet::no_error(), spans: vec![], explanation: None },
            provenance: None,
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&rec).expect("record serializes"));
        serial += 1;
    }
    for n in &set.negatives {
        let c = &n.example;
        let start = c.replaced_span.start;
        let span = ErrorSpan {
            start,
            end: start + text::char_len(&c.replacement),
            class: c.label,
            verifiability: c.verifiability,
        };
        let rec = ExportRecord {
            dialogue_id: &n.dialogue_id,
            model_id: SYNTHETIC_MODEL_ID,
            sentence_index: serial,
            text: &c.corrupted,
            gold: GoldAnnotation { labels: LabelSet::from_detected([c.label]), spans: vec![span], explanation: None },
            provenance: Some(Provenance {
                replaced_span: &c.replaced_span,
                replacement: &c.replacement,
                scope: c.replacement_scope,
                source_model_id: &n.source_model_id,
                source_sentence_index: n.source_sentence_index,
            }),
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&rec).expect("record serializes"));
        serial += 1;
    }
    out
}

pub fn save_training_set(path: &Path, corpus: &Corpus, set: &TrainingSet) -> std::io::Result<()> {
    fsutil::write_atomic(path, export_training_set(corpus, set).as_bytes())
}
