//! Linguistic analysis: the annotator contract, span-of-interest extraction,
//! candidate generation, and the semantic-role to error-class mapping.

mod fixture;
mod heuristic;
pub mod morph;
mod process;

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;
use crate::types::{Dialogue, ErrorClass, SummarySentence};

pub use fixture::FixtureProvider;
pub use heuristic::HeuristicProvider;
pub use morph::{match_verb_form, try_match_verb_form};
pub use process::ProcessProvider;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("provider `{provider}` failed: {message}")]
    Provider { provider: String, message: String },
    #[error("provider returned an invalid annotation: {0}")]
    InvalidAnnotation(String),
}

impl AnalysisError {
    pub fn provider(provider: &str, message: impl fmt::Display) -> Self {
        AnalysisError::Provider { provider: provider.to_string(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSpan {
    pub role: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SrlFrame {
    pub args: Vec<RoleSpan>,
}

/// Full analysis of one text, also the wire format of out-of-process
/// providers. `pos` holds one universal POS tag per token (`VERB`, `AUX`,
/// `NOUN`, `PROPN`, `PRON`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Annotation {
    pub tokens: Vec<Token>,
    pub pos: Vec<String>,
    #[serde(default)]
    pub entities: Vec<EntitySpan>,
    #[serde(default)]
    pub noun_chunks: Vec<ChunkSpan>,
    #[serde(default)]
    pub srl_frames: Vec<SrlFrame>,
}

impl Annotation {
    /// Checks offsets against `text` and the token/tag alignment.
    pub fn validate(&self, text: &str) -> Result<(), AnalysisError> {
        let len = text::char_len(text);
        let bad = |what: &str, start: usize, end: usize| {
            AnalysisError::InvalidAnnotation(format!("{what} [{start}, {end}) outside text of {len} characters"))
        };
        if self.pos.len() != self.tokens.len() {
            return Err(AnalysisError::InvalidAnnotation(format!(
                "{} POS tags for {} tokens",
                self.pos.len(),
                self.tokens.len()
            )));
        }
        for t in &self.tokens {
            if t.start >= t.end || t.end > len {
                return Err(bad("token", t.start, t.end));
            }
        }
        for e in &self.entities {
            if e.start >= e.end || e.end > len {
                return Err(bad("entity", e.start, e.end));
            }
        }
        for c in &self.noun_chunks {
            if c.start >= c.end || c.end > len {
                return Err(bad("noun chunk", c.start, c.end));
            }
        }
        for arg in self.srl_frames.iter().flat_map(|f| &f.args) {
            if arg.start >= arg.end || arg.end > len {
                return Err(bad("role span", arg.start, arg.end));
            }
        }
        Ok(())
    }
}

/// Contract for any linguistic annotator (rule-based, table-driven, or an
/// external process). Implementations must be deterministic per input.
pub trait AnnotatorProvider: Send + Sync {
    fn name(&self) -> &str;

    fn annotate(&self, text: &str) -> Result<Annotation, AnalysisError>;

    /// Whether concurrent `annotate` calls are safe. Callers serialize
    /// access to providers that return `false`.
    fn concurrent_safe(&self) -> bool {
        true
    }

    fn tokenize(&self, text: &str) -> Result<Vec<Token>, AnalysisError> {
        Ok(self.annotate(text)?.tokens)
    }

    fn pos_tags(&self, text: &str) -> Result<Vec<String>, AnalysisError> {
        Ok(self.annotate(text)?.pos)
    }

    fn named_entities(&self, text: &str) -> Result<Vec<EntitySpan>, AnalysisError> {
        Ok(self.annotate(text)?.entities)
    }

    fn noun_chunks(&self, text: &str) -> Result<Vec<ChunkSpan>, AnalysisError> {
        Ok(self.annotate(text)?.noun_chunks)
    }

    fn srl(&self, text: &str) -> Result<Vec<SrlFrame>, AnalysisError> {
        Ok(self.annotate(text)?.srl_frames)
    }
}

/// Annotates and validates in one step.
pub fn analyze(provider: &dyn AnnotatorProvider, text: &str) -> Result<Annotation, AnalysisError> {
    let annotation = provider.annotate(text)?;
    annotation.validate(text)?;
    Ok(annotation)
}

/// Semantic role label such as `ARG0`, `ARGM-TMP`, `V`, or `NONE`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SemanticRole(pub String);

const CORE_ROLES: [&str; 6] = ["arg0", "arg1", "arg2", "arg3", "arg4", "arg5"];

impl SemanticRole {
    pub fn new(label: impl Into<String>) -> Self {
        SemanticRole(label.into())
    }

    pub fn none() -> Self {
        SemanticRole("NONE".into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_core(&self) -> bool {
        let lower = self.0.to_lowercase();
        CORE_ROLES.contains(&lower.as_str())
    }

    pub fn is_modifier(&self) -> bool {
        self.0.to_uppercase().contains("ARGM")
    }

    pub fn is_verb(&self) -> bool {
        self.0.eq_ignore_ascii_case("V")
    }
}

impl fmt::Display for SemanticRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Pronoun inventory of the role mapping, reproduced as printed (no `me`).
pub const PRONOUNS: [&str; 22] = [
    "i", "we", "us", "you", "he", "him", "she", "her", "it", "they", "them", "this", "that",
    "these", "those", "myself", "yourself", "himself", "herself", "ourselves", "yourselves",
    "themselves",
];

pub fn is_pronoun(span_text: &str) -> bool {
    let lower = span_text.to_lowercase();
    PRONOUNS.contains(&lower.as_str())
}

/// Routes a span to an error class by its semantic role.
pub fn map_role_to_class(span_text: &str, role: &SemanticRole) -> ErrorClass {
    if role.is_core() {
        if is_pronoun(span_text) {
            ErrorClass::CorefE
        } else {
            ErrorClass::EntE
        }
    } else if role.is_modifier() {
        ErrorClass::CirE
    } else if role.is_verb() {
        ErrorClass::PredE
    } else {
        ErrorClass::Others
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SoiKind {
    NamedEntity,
    NounPhrase,
    Verb,
}

impl SoiKind {
    /// Retention priority for exact-span duplicates (higher wins).
    fn priority(self) -> u8 {
        match self {
            SoiKind::NamedEntity => 2,
            SoiKind::Verb => 1,
            SoiKind::NounPhrase => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanOfInterest {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub kind: SoiKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ne_class: Option<String>,
    pub role: SemanticRole,
    /// Base form, set for verb SOIs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
}

impl SpanOfInterest {
    pub fn error_class(&self) -> ErrorClass {
        map_role_to_class(&self.text, &self.role)
    }
}

/// Role of the shortest SRL argument containing `[start, end)`; ties go to
/// the earliest frame, then the earliest argument.
pub fn role_for_span(frames: &[SrlFrame], start: usize, end: usize) -> SemanticRole {
    let mut best: Option<&RoleSpan> = None;
    for arg in frames.iter().flat_map(|f| &f.args) {
        if arg.start <= start && end <= arg.end {
            let shorter = best.is_none_or(|b| arg.end - arg.start < b.end - b.start);
            if shorter {
                best = Some(arg);
            }
        }
    }
    best.map(|a| SemanticRole::new(a.role.clone())).unwrap_or_else(SemanticRole::none)
}

fn span_text(text: &str, start: usize, end: usize) -> Result<String, AnalysisError> {
    text::slice_chars(text, start, end)
        .map(str::to_string)
        .ok_or_else(|| AnalysisError::InvalidAnnotation(format!("span [{start}, {end}) outside text")))
}

fn token_lemma(token: &Token) -> String {
    token.lemma.clone().unwrap_or_else(|| morph::lemmatize(&token.text))
}

/// SOIs from an existing analysis of `text`.
pub fn sois_from_annotation(text: &str, annotation: &Annotation) -> Result<Vec<SpanOfInterest>, AnalysisError> {
    let frames = &annotation.srl_frames;
    let mut raw = Vec::new();
    for e in &annotation.entities {
        raw.push(SpanOfInterest {
            text: span_text(text, e.start, e.end)?,
            start: e.start,
            end: e.end,
            kind: SoiKind::NamedEntity,
            ne_class: Some(e.label.clone()),
            role: role_for_span(frames, e.start, e.end),
            lemma: None,
        });
    }
    for c in &annotation.noun_chunks {
        raw.push(SpanOfInterest {
            text: span_text(text, c.start, c.end)?,
            start: c.start,
            end: c.end,
            kind: SoiKind::NounPhrase,
            ne_class: None,
            role: role_for_span(frames, c.start, c.end),
            lemma: None,
        });
    }
    for (token, pos) in annotation.tokens.iter().zip(&annotation.pos) {
        if pos == "VERB" {
            raw.push(SpanOfInterest {
                text: span_text(text, token.start, token.end)?,
                start: token.start,
                end: token.end,
                kind: SoiKind::Verb,
                ne_class: None,
                role: role_for_span(frames, token.start, token.end),
                lemma: Some(token_lemma(token)),
            });
        }
    }
    // Keep one record per exact span, preferring NamedEntity > Verb > NounPhrase.
    raw.sort_by(|a, b| {
        (a.start, a.end)
            .cmp(&(b.start, b.end))
            .then(b.kind.priority().cmp(&a.kind.priority()))
    });
    raw.dedup_by(|later, kept| later.start == kept.start && later.end == kept.end);
    Ok(raw)
}

/// Spans of interest of a summary sentence: named entities, noun chunks and
/// verbs, each with the role of its shortest containing SRL span.
pub fn identify_sois(
    sentence: &SummarySentence,
    provider: &dyn AnnotatorProvider,
) -> Result<Vec<SpanOfInterest>, AnalysisError> {
    if sentence.text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let annotation = analyze(provider, &sentence.text)?;
    sois_from_annotation(&sentence.text, &annotation)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateSource {
    SameDialogue,
    SpeakerName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSpan {
    pub text: String,
    pub source: CandidateSource,
    pub kind: SoiKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CandidateConfig {
    /// Also mine the query of query-based dialogues.
    pub include_query: bool,
}

/// An extracted dialogue span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueSpan {
    pub text: String,
    pub label: String,
    pub role: SemanticRole,
}

/// Per-dialogue inventory used by candidate generation and corruption.
/// Entries keep extraction order (speaker, then utterance, left to right).
#[derive(Debug, Clone, Default)]
pub struct DialogueAnalysis {
    pub speakers: Vec<String>,
    pub entities: Vec<DialogueSpan>,
    pub noun_phrases: Vec<DialogueSpan>,
    /// (surface form, lemma)
    pub verbs: Vec<(String, String)>,
}

impl DialogueAnalysis {
    pub fn build(
        dialogue: &Dialogue,
        provider: &dyn AnnotatorProvider,
        config: CandidateConfig,
    ) -> Result<Self, AnalysisError> {
        let mut out = DialogueAnalysis::default();
        let mut texts: Vec<(Option<&str>, &str)> = Vec::new();
        if config.include_query {
            if let Some(q) = &dialogue.query {
                texts.push((None, q));
            }
        }
        for u in &dialogue.utterances {
            texts.push((Some(&u.speaker), &u.text));
        }
        for (speaker, text) in texts {
            if let Some(s) = speaker {
                if !out.speakers.iter().any(|known| known == s) {
                    out.speakers.push(s.to_string());
                }
            }
            if text.trim().is_empty() {
                continue;
            }
            let ann = analyze(provider, text)?;
            for e in &ann.entities {
                out.entities.push(DialogueSpan {
                    text: span_text(text, e.start, e.end)?,
                    label: e.label.clone(),
                    role: role_for_span(&ann.srl_frames, e.start, e.end),
                });
            }
            for c in &ann.noun_chunks {
                out.noun_phrases.push(DialogueSpan {
                    text: span_text(text, c.start, c.end)?,
                    label: String::new(),
                    role: role_for_span(&ann.srl_frames, c.start, c.end),
                });
            }
            for (token, pos) in ann.tokens.iter().zip(&ann.pos) {
                if pos == "VERB" {
                    out.verbs.push((token.text.clone(), token_lemma(token)));
                }
            }
        }
        Ok(out)
    }

    /// Candidate replacements for `soi`, deduplicated, without the SOI text.
    pub fn candidates_for(&self, soi: &SpanOfInterest) -> Vec<CandidateSpan> {
        let mut seen: HashSet<String> = HashSet::new();
        seen.insert(soi.text.clone());
        let mut out = Vec::new();
        let mut push = |text: String, source: CandidateSource, out: &mut Vec<CandidateSpan>| {
            if !text.is_empty() && seen.insert(text.clone()) {
                out.push(CandidateSpan { text, source, kind: soi.kind });
            }
        };
        match soi.kind {
            SoiKind::NamedEntity => {
                let class = soi.ne_class.as_deref().unwrap_or_default();
                if class == "PERSON" {
                    for s in &self.speakers {
                        push(s.clone(), CandidateSource::SpeakerName, &mut out);
                    }
                }
                for e in self.entities.iter().filter(|e| e.label == class) {
                    push(e.text.clone(), CandidateSource::SameDialogue, &mut out);
                }
            }
            SoiKind::NounPhrase => {
                for np in &self.noun_phrases {
                    push(np.text.clone(), CandidateSource::SameDialogue, &mut out);
                }
            }
            SoiKind::Verb => {
                let capitalized = soi.text.chars().next().is_some_and(char::is_uppercase);
                for (_, lemma) in &self.verbs {
                    let mut form = morph::match_verb_form(&soi.text, lemma);
                    if capitalized {
                        form = capitalize(&form);
                    }
                    push(form, CandidateSource::SameDialogue, &mut out);
                }
            }
        }
        out
    }

    /// Distinct verb lemmas in extraction order.
    pub fn verb_lemmas(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.verbs.iter().filter(|(_, l)| seen.insert(l.clone())).map(|(_, l)| l.clone()).collect()
    }
}

pub(crate) fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Candidate spans for one SOI drawn from `dialogue`.
pub fn generate_candidates(
    soi: &SpanOfInterest,
    dialogue: &Dialogue,
    provider: &dyn AnnotatorProvider,
    config: CandidateConfig,
) -> Result<Vec<CandidateSpan>, AnalysisError> {
    Ok(DialogueAnalysis::build(dialogue, provider, config)?.candidates_for(soi))
}
