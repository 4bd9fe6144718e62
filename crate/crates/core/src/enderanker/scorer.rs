use std::any::Any;
use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plugin::LineClient;
use crate::text;
use crate::types::Dialogue;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("scorer `{scorer}` failed: {message}")]
    Scorer { scorer: String, message: String },
    #[error("cannot score an empty token sequence")]
    EmptyTokens,
    #[error("scorer returned {got} log-probabilities for {expected} tokens")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid log-probability {value} at token {index}")]
    InvalidLogProb { index: usize, value: f64 },
}

impl ScoreError {
    pub fn scorer(scorer: &str, message: impl std::fmt::Display) -> Self {
        ScoreError::Scorer { scorer: scorer.to_string(), message: message.to_string() }
    }
}

/// A dialogue encoded once and reused for every variant of its sentences.
#[derive(Clone)]
pub struct PreparedContext {
    pub dialogue_id: String,
    pub text: String,
    /// Scorer-specific state built by [`SequenceScorer::prepare`].
    pub state: Option<Arc<dyn Any + Send + Sync>>,
}

impl std::fmt::Debug for PreparedContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PreparedContext")
            .field("dialogue_id", &self.dialogue_id)
            .field("text", &self.text)
            .field("state", &self.state.is_some())
            .finish()
    }
}

/// Conditional token log-probabilities of a sentence given a dialogue.
pub trait SequenceScorer: Send + Sync {
    fn name(&self) -> &str;

    /// Token stream the log-probabilities refer to. Whitespace by default.
    fn tokenize(&self, sentence: &str) -> Vec<String> {
        sentence.split_whitespace().map(str::to_string).collect()
    }

    fn prepare(&self, dialogue: &Dialogue) -> Result<PreparedContext, ScoreError> {
        Ok(PreparedContext { dialogue_id: dialogue.id.clone(), text: dialogue.context_text(), state: None })
    }

    /// One value `log p(w_i | w_<i, D)` per token.
    fn token_logprobs(&self, context: &PreparedContext, tokens: &[String]) -> Result<Vec<f64>, ScoreError>;

    fn token_logprobs_batch(&self, context: &PreparedContext, batch: &[Vec<String>]) -> Result<Vec<Vec<f64>>, ScoreError> {
        batch.iter().map(|tokens| self.token_logprobs(context, tokens)).collect()
    }

    /// Whether concurrent calls are safe; callers serialize otherwise.
    fn concurrent_safe(&self) -> bool {
        true
    }
}

/// Average token log-probability after checking the scorer's output.
pub fn mean_logprob(logprobs: &[f64], n_tokens: usize) -> Result<f64, ScoreError> {
    if n_tokens == 0 {
        return Err(ScoreError::EmptyTokens);
    }
    if logprobs.len() != n_tokens {
        return Err(ScoreError::LengthMismatch { expected: n_tokens, got: logprobs.len() });
    }
    if let Some((index, &value)) = logprobs.iter().enumerate().find(|(_, v)| !v.is_finite() || **v > 0.0) {
        return Err(ScoreError::InvalidLogProb { index, value });
    }
    Ok(logprobs.iter().sum::<f64>() / n_tokens as f64)
}

/// `(1/n) * sum_i log p(w_i | w_<i, D)`.
pub fn score_sentence(scorer: &dyn SequenceScorer, context: &PreparedContext, tokens: &[String]) -> Result<f64, ScoreError> {
    if tokens.is_empty() {
        return Err(ScoreError::EmptyTokens);
    }
    mean_logprob(&scorer.token_logprobs(context, tokens)?, tokens.len())
}

fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub dialogue_id: String,
    pub sentence: String,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockTable {
    pub default_probability: f64,
    /// When set, unlisted sentences get pseudo-random per-token
    /// probabilities derived from this seed instead of the default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hashed_seed: Option<u64>,
    #[serde(default)]
    pub entries: Vec<MockEntry>,
}

/// Table-driven scorer. Entries are keyed by (dialogue id, sentence tokens
/// joined by single spaces) and give per-token probabilities; anything else
/// falls back to the default probability or the seeded hash.
#[derive(Debug, Clone)]
pub struct MockScorer {
    table: HashMap<(String, String), Vec<f64>>,
    default_probability: f64,
    hashed_seed: Option<u64>,
}

impl MockScorer {
    pub fn new(default_probability: f64) -> Self {
        MockScorer { table: HashMap::new(), default_probability, hashed_seed: None }
    }

    /// Deterministic pseudo-random probabilities in [0.05, 0.95) for every
    /// unlisted token, depending on the dialogue, position and the token
    /// with its predecessor.
    pub fn hashed(seed: u64) -> Self {
        MockScorer { table: HashMap::new(), default_probability: 0.5, hashed_seed: Some(seed) }
    }

    pub fn with_entry(mut self, dialogue_id: &str, sentence: &str, probabilities: Vec<f64>) -> Self {
        self.insert(dialogue_id, sentence, probabilities);
        self
    }

    pub fn insert(&mut self, dialogue_id: &str, sentence: &str, probabilities: Vec<f64>) {
        let key = sentence.split_whitespace().collect::<Vec<_>>().join(" ");
        self.table.insert((dialogue_id.to_string(), key), probabilities);
    }

    pub fn from_table(t: MockTable) -> Self {
        let mut m = MockScorer { table: HashMap::new(), default_probability: t.default_probability, hashed_seed: t.hashed_seed };
        for e in t.entries {
            m.insert(&e.dialogue_id, &e.sentence, e.probabilities);
        }
        m
    }

    pub fn from_path(path: &Path) -> Result<Self, ScoreError> {
        let raw = std::fs::read_to_string(path).map_err(|e| ScoreError::scorer("mock", format!("{}: {e}", path.display())))?;
        let table: MockTable = serde_json::from_str(&raw).map_err(|e| ScoreError::scorer("mock", e))?;
        Ok(Self::from_table(table))
    }

    /// Probability the mock assigns to token `i` of `tokens`.
    pub fn probability(&self, dialogue_id: &str, tokens: &[String], i: usize) -> f64 {
        let key = (dialogue_id.to_string(), tokens.join(" "));
        if let Some(p) = self.table.get(&key) {
            if p.len() == tokens.len() {
                return p[i];
            }
        }
        match self.hashed_seed {
            Some(seed) => {
                let prev = if i > 0 { tokens[i - 1].as_bytes() } else { b"" };
                let h = fnv1a(&[&seed.to_le_bytes(), dialogue_id.as_bytes(), &i.to_le_bytes(), prev, tokens[i].as_bytes()]);
                0.05 + 0.9 * ((h >> 11) as f64 / (1u64 << 53) as f64)
            }
            None => self.default_probability,
        }
    }
}

impl SequenceScorer for MockScorer {
    fn name(&self) -> &str {
        "mock"
    }

    fn token_logprobs(&self, context: &PreparedContext, tokens: &[String]) -> Result<Vec<f64>, ScoreError> {
        Ok((0..tokens.len()).map(|i| self.probability(&context.dialogue_id, tokens, i).ln()).collect())
    }
}

fn normalize_word(w: &str) -> String {
    w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

struct UnigramState {
    counts: HashMap<String, usize>,
    total: usize,
}

/// Unigram model of the dialogue with add-one smoothing: a token's
/// probability grows with how often it occurs in the context. The word
/// counts are the prepared state.
#[derive(Debug, Clone, Default)]
pub struct OverlapScorer;

impl OverlapScorer {
    fn state(context: &PreparedContext) -> UnigramState {
        let mut counts = HashMap::new();
        let mut total = 0;
        for t in text::word_tokens(&context.text) {
            let w = normalize_word(&t.text);
            if !w.is_empty() {
                *counts.entry(w).or_insert(0) += 1;
                total += 1;
            }
        }
        UnigramState { counts, total }
    }
}

impl SequenceScorer for OverlapScorer {
    fn name(&self) -> &str {
        "overlap"
    }

    fn prepare(&self, dialogue: &Dialogue) -> Result<PreparedContext, ScoreError> {
        let mut ctx = PreparedContext { dialogue_id: dialogue.id.clone(), text: dialogue.context_text(), state: None };
        ctx.state = Some(Arc::new(Self::state(&ctx)));
        Ok(ctx)
    }

    fn token_logprobs(&self, context: &PreparedContext, tokens: &[String]) -> Result<Vec<f64>, ScoreError> {
        let built;
        let state = match context.state.as_ref().and_then(|s| s.downcast_ref::<UnigramState>()) {
            Some(s) => s,
            None => {
                built = Self::state(context);
                &built
            }
        };
        let vocab = state.counts.len() + 1;
        Ok(tokens
            .iter()
            .map(|t| {
                let c = state.counts.get(&normalize_word(t)).copied().unwrap_or(0);
                ((c + 1) as f64 / (state.total + vocab) as f64).ln()
            })
            .collect())
    }
}

#[derive(Serialize)]
struct SingleRequest<'a> {
    context: &'a str,
    sentence_tokens: &'a [String],
}

#[derive(Deserialize)]
struct SingleResponse {
    token_logprobs: Vec<f64>,
}

#[derive(Serialize)]
struct BatchRequest<'a> {
    context: &'a str,
    batch: &'a [Vec<String>],
}

#[derive(Deserialize)]
struct BatchResponse {
    batch_logprobs: Vec<Vec<f64>>,
}

/// Scorer served by an external process over line-delimited JSON:
/// `{"context", "sentence_tokens"}` -> `{"token_logprobs"}`, and
/// `{"context", "batch"}` -> `{"batch_logprobs"}`.
pub struct ProcessScorer {
    name: String,
    client: LineClient,
    batch: bool,
}

impl ProcessScorer {
    pub fn spawn(name: &str, program: &str, args: &[String], batch: bool) -> Result<Self, ScoreError> {
        let client = LineClient::spawn(program, args).map_err(|e| ScoreError::scorer(name, e))?;
        Ok(ProcessScorer { name: name.to_string(), client, batch })
    }
}

impl SequenceScorer for ProcessScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn token_logprobs(&self, context: &PreparedContext, tokens: &[String]) -> Result<Vec<f64>, ScoreError> {
        let resp: SingleResponse = self
            .client
            .call(&SingleRequest { context: &context.text, sentence_tokens: tokens })
            .map_err(|e| ScoreError::scorer(&self.name, e))?;
        Ok(resp.token_logprobs)
    }

    fn token_logprobs_batch(&self, context: &PreparedContext, batch: &[Vec<String>]) -> Result<Vec<Vec<f64>>, ScoreError> {
        if !self.batch {
            return batch.iter().map(|t| self.token_logprobs(context, t)).collect();
        }
        let resp: BatchResponse = self
            .client
            .call(&BatchRequest { context: &context.text, batch })
            .map_err(|e| ScoreError::scorer(&self.name, e))?;
        if resp.batch_logprobs.len() != batch.len() {
            return Err(ScoreError::scorer(&self.name, format!("{} results for {} sentences", resp.batch_logprobs.len(), batch.len())));
        }
        Ok(resp.batch_logprobs)
    }
}
