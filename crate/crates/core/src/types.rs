//! Domain types shared by every module.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentence-level label. `NoError` is exclusive of every other class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorClass {
    NoError,
    EntE,
    PredE,
    CirE,
    CorefE,
    LinkE,
    Others,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 7] = [
        ErrorClass::NoError,
        ErrorClass::EntE,
        ErrorClass::PredE,
        ErrorClass::CirE,
        ErrorClass::CorefE,
        ErrorClass::LinkE,
        ErrorClass::Others,
    ];

    /// Error classes only (everything but `NoError`).
    pub const ERRORS: [ErrorClass; 6] = [
        ErrorClass::EntE,
        ErrorClass::PredE,
        ErrorClass::CirE,
        ErrorClass::CorefE,
        ErrorClass::LinkE,
        ErrorClass::Others,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::NoError => "NoError",
            ErrorClass::EntE => "EntE",
            ErrorClass::PredE => "PredE",
            ErrorClass::CirE => "CirE",
            ErrorClass::CorefE => "CorefE",
            ErrorClass::LinkE => "LinkE",
            ErrorClass::Others => "Others",
        }
    }

    pub fn is_error(self) -> bool {
        self != ErrorClass::NoError
    }

    /// Verifiability is only defined for the semantic-frame classes.
    pub fn supports_verifiability(self) -> bool {
        matches!(self, ErrorClass::EntE | ErrorClass::PredE | ErrorClass::CirE)
    }

    /// The class set a report is scored over, in report column order.
    pub fn evaluated(merge_linke: bool) -> Vec<ErrorClass> {
        let mut classes = vec![
            ErrorClass::NoError,
            ErrorClass::EntE,
            ErrorClass::CirE,
            ErrorClass::PredE,
            ErrorClass::CorefE,
        ];
        if !merge_linke {
            classes.push(ErrorClass::LinkE);
        }
        classes.push(ErrorClass::Others);
        classes
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("unknown label `{0}`")]
    Unknown(String),
    #[error("NoError cannot be combined with other classes")]
    NoErrorNotExclusive,
    #[error("label set is empty")]
    Empty,
    #[error("verifiability is only defined for EntE, PredE and CirE, not {0}")]
    VerifiabilityNotAllowed(ErrorClass),
}

impl FromStr for ErrorClass {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorClass::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| LabelError::Unknown(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verifiability {
    Intrinsic,
    Extrinsic,
}

/// A validated, non-empty set of classes honoring `NoError` exclusivity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct LabelSet(BTreeSet<ErrorClass>);

impl LabelSet {
    pub fn new<I: IntoIterator<Item = ErrorClass>>(labels: I) -> Result<Self, LabelError> {
        let set: BTreeSet<ErrorClass> = labels.into_iter().collect();
        if set.is_empty() {
            return Err(LabelError::Empty);
        }
        if set.contains(&ErrorClass::NoError) && set.len() > 1 {
            return Err(LabelError::NoErrorNotExclusive);
        }
        Ok(LabelSet(set))
    }

    pub fn no_error() -> Self {
        LabelSet(BTreeSet::from([ErrorClass::NoError]))
    }

    /// Builds a prediction from detected error classes: an empty detection
    /// becomes `{NoError}`, and a stray `NoError` next to real errors is dropped.
    pub fn from_detected<I: IntoIterator<Item = ErrorClass>>(errors: I) -> Self {
        let set: BTreeSet<ErrorClass> = errors.into_iter().filter(|c| c.is_error()).collect();
        if set.is_empty() {
            LabelSet::no_error()
        } else {
            LabelSet(set)
        }
    }

    pub fn contains(&self, class: ErrorClass) -> bool {
        self.0.contains(&class)
    }

    pub fn is_no_error(&self) -> bool {
        self.0.contains(&ErrorClass::NoError)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ErrorClass> + '_ {
        self.0.iter().copied()
    }

    /// Error classes in the set, excluding `NoError`.
    pub fn error_count(&self) -> usize {
        self.0.iter().filter(|c| c.is_error()).count()
    }

    pub fn as_set(&self) -> &BTreeSet<ErrorClass> {
        &self.0
    }
}

impl<'de> Deserialize<'de> for LabelSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<ErrorClass>::deserialize(deserializer)?;
        LabelSet::new(raw).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|c| c.as_str()).collect();
        write!(f, "{{{}}}", names.join(", "))
    }
}

/// Maps LinkE onto Others when `merge_linke` is set; identity otherwise.
pub fn normalize_labels(labels: &LabelSet, merge_linke: bool) -> LabelSet {
    if !merge_linke {
        return labels.clone();
    }
    let merged = labels.iter().map(|c| {
        if c == ErrorClass::LinkE {
            ErrorClass::Others
        } else {
            c
        }
    });
    LabelSet(merged.collect())
}

/// Raw-set entry point for callers holding unvalidated labels.
pub fn normalize_label_iter<I: IntoIterator<Item = ErrorClass>>(
    labels: I,
    merge_linke: bool,
) -> Result<LabelSet, LabelError> {
    LabelSet::new(labels).map(|set| normalize_labels(&set, merge_linke))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: String,
    pub text: String,
    #[serde(default)]
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    pub utterances: Vec<Utterance>,
    /// Originating corpus, e.g. `SAMSum` or `QMSum`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl Dialogue {
    /// Transcript as fed to a scorer: `speaker: text` lines, prefixed by
    /// `query || ` for query-based dialogues.
    pub fn context_text(&self) -> String {
        let transcript: Vec<String> = self
            .utterances
            .iter()
            .map(|u| format!("{}: {}", u.speaker, u.text))
            .collect();
        let transcript = transcript.join("\n");
        match &self.query {
            Some(q) => format!("{q} || {transcript}"),
            None => transcript,
        }
    }

    /// Speaker names in order of first appearance.
    pub fn speakers(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for u in &self.utterances {
            if !seen.contains(&u.speaker.as_str()) {
                seen.push(u.speaker.as_str());
            }
        }
        seen
    }

    /// Whether `needle` occurs (token-aligned, case-insensitive) in an
    /// utterance or as a speaker name.
    pub fn mentions(&self, needle: &str) -> bool {
        self.utterances.iter().any(|u| {
            crate::text::contains_phrase(&u.text, needle) || u.speaker.eq_ignore_ascii_case(needle.trim())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarySentence {
    pub dialogue_id: String,
    pub model_id: String,
    pub sentence_index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSpan {
    pub start: usize,
    pub end: usize,
    pub class: ErrorClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifiability: Option<Verifiability>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub labels: LabelSet,
    #[serde(default)]
    pub spans: Vec<ErrorSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error("span [{start}, {end}) lies outside a sentence of {len} characters")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
    #[error("span class {0} is not among the sentence labels")]
    SpanClassNotLabelled(ErrorClass),
    #[error("a NoError sentence cannot carry error spans")]
    SpansOnNoError,
}

impl GoldAnnotation {
    pub fn validate(&self, sentence_text: &str) -> Result<(), AnnotationError> {
        if self.labels.is_no_error() && !self.spans.is_empty() {
            return Err(AnnotationError::SpansOnNoError);
        }
        let len = sentence_text.chars().count();
        for span in &self.spans {
            if span.start > span.end || span.end > len {
                return Err(AnnotationError::SpanOutOfBounds { start: span.start, end: span.end, len });
            }
            if !self.labels.contains(span.class) {
                return Err(AnnotationError::SpanClassNotLabelled(span.class));
            }
            if span.verifiability.is_some() && !span.class.supports_verifiability() {
                return Err(LabelError::VerifiabilityNotAllowed(span.class).into());
            }
        }
        Ok(())
    }
}

/// One scored entry in a detector's per-sentence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoiDiagnostic {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub role: String,
    pub rank: usize,
    pub soi_score: f64,
    pub candidates: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sois: Vec<SoiDiagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A detector's multi-label output for one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub labels: LabelSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

impl PredictionSet {
    pub fn new(labels: LabelSet) -> Self {
        PredictionSet { labels, diagnostics: None }
    }

    pub fn from_detected<I: IntoIterator<Item = ErrorClass>>(errors: I) -> Self {
        PredictionSet::new(LabelSet::from_detected(errors))
    }

    pub fn with_diagnostics(mut self, diagnostics: Diagnostics) -> Self {
        self.diagnostics = Some(diagnostics);
        self
    }
}
