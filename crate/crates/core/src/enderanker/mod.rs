//! Unsupervised ranking detector. Each span of interest is swapped for
//! every candidate span from the dialogue; the original sentence and its
//! variants are scored by average token log-likelihood, and an SOI ranked
//! below the threshold flags the error class of its semantic role.

mod scorer;

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scorer::{
    mean_logprob, score_sentence, MockEntry, MockScorer, MockTable, OverlapScorer, PreparedContext, ProcessScorer,
    ScoreError, SequenceScorer,
};

use crate::dataset::{Corpus, DialogueExample};
use crate::lingo::{
    self, map_role_to_class, AnalysisError, AnnotatorProvider, CandidateConfig, CandidateSpan, DialogueAnalysis,
    SpanOfInterest,
};
use crate::metrics::{self, MetricsError};
use crate::text;
use crate::types::{normalize_labels, Diagnostics, Dialogue, LabelSet, PredictionSet, SoiDiagnostic, SummarySentence};

pub const NO_SOI_NOTE: &str = "no spans of interest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub soi_score: f64,
    pub candidate_scores: Vec<(String, f64)>,
    /// 1-based position of the original among all spans, best first.
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankerConfig {
    pub threshold_t: usize,
    /// Keep only the first `n` candidates of each SOI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_candidates: Option<usize>,
    pub merge_linke: bool,
    /// Prepare each dialogue once and reuse it for every variant.
    #[serde(default = "yes")]
    pub cache_context: bool,
    #[serde(default)]
    pub include_query: bool,
}

fn yes() -> bool {
    true
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig { threshold_t: 1, max_candidates: None, merge_linke: true, cache_context: true, include_query: false }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("{dialogue_id}#{sentence_index}: {source}")]
    Analysis { dialogue_id: String, sentence_index: usize, source: AnalysisError },
    #[error("SOI {soi:?}: {source}")]
    Score { soi: String, source: ScoreError },
    #[error("{0}")]
    Context(ScoreError),
    #[error("{sois} SOIs but {candidate_lists} candidate lists")]
    CandidateMismatch { sois: usize, candidate_lists: usize },
    #[error("threshold T must be at least 1")]
    ZeroThreshold,
    #[error("empty threshold grid")]
    EmptyGrid,
    #[error("tuning needs gold labels on every validation example")]
    MissingGold,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Rank of a score among candidates: one plus the number of strictly
/// better candidates, so the original wins ties.
pub fn rank_from_scores(soi_score: f64, candidate_scores: &[f64]) -> usize {
    1 + candidate_scores.iter().filter(|&&c| c > soi_score).count()
}

/// Where an SOI's variants get their context from.
#[derive(Clone, Copy)]
pub enum ContextSource<'a> {
    Prepared(&'a PreparedContext),
    /// Re-prepared for every variant.
    Fresh(&'a Dialogue),
}

fn score_all(
    scorer: &dyn SequenceScorer,
    context: ContextSource<'_>,
    token_lists: &[Vec<String>],
) -> Result<Vec<f64>, ScoreError> {
    if token_lists.iter().any(Vec::is_empty) {
        return Err(ScoreError::EmptyTokens);
    }
    match context {
        ContextSource::Prepared(ctx) => {
            let out = scorer.token_logprobs_batch(ctx, token_lists)?;
            if out.len() != token_lists.len() {
                return Err(ScoreError::LengthMismatch { expected: token_lists.len(), got: out.len() });
            }
            out.iter().zip(token_lists).map(|(lp, t)| mean_logprob(lp, t.len())).collect()
        }
        ContextSource::Fresh(dialogue) => token_lists
            .iter()
            .map(|t| {
                let ctx = scorer.prepare(dialogue)?;
                score_sentence(scorer, &ctx, t)
            })
            .collect(),
    }
}

/// Scores `sentence` and one variant per candidate (the SOI span replaced
/// by the candidate text, re-tokenized by the scorer) and ranks the original.
pub fn rank_soi_with(
    scorer: &dyn SequenceScorer,
    context: ContextSource<'_>,
    sentence: &str,
    soi: &SpanOfInterest,
    candidates: &[CandidateSpan],
) -> Result<RankResult, ScoreError> {
    let mut token_lists = Vec::with_capacity(candidates.len() + 1);
    token_lists.push(scorer.tokenize(sentence));
    for c in candidates {
        let variant = text::splice_chars(sentence, soi.start, soi.end, &c.text)
            .ok_or_else(|| ScoreError::scorer(scorer.name(), format!("SOI span [{}, {}) outside sentence", soi.start, soi.end)))?;
        token_lists.push(scorer.tokenize(&variant));
    }
    let scores = score_all(scorer, context, &token_lists)?;
    let soi_score = scores[0];
    let rank = rank_from_scores(soi_score, &scores[1..]);
    let candidate_scores = candidates.iter().map(|c| c.text.clone()).zip(scores[1..].iter().copied()).collect();
    Ok(RankResult { soi_score, candidate_scores, rank })
}

pub fn rank_soi(
    scorer: &dyn SequenceScorer,
    context: &PreparedContext,
    sentence: &SummarySentence,
    soi: &SpanOfInterest,
    candidates: &[CandidateSpan],
) -> Result<RankResult, ScoreError> {
    rank_soi_with(scorer, ContextSource::Prepared(context), &sentence.text, soi, candidates)
}

/// Labels from precomputed ranks: every SOI with rank > `t` contributes the
/// class of its role; nothing flagged means NoError.
pub fn predict_from_ranks(sois: &[SpanOfInterest], ranks: &[RankResult], t: usize, merge_linke: bool) -> PredictionSet {
    let mut diag = Diagnostics::default();
    let mut flagged = Vec::new();
    for (soi, r) in sois.iter().zip(ranks) {
        let hit = r.rank > t;
        if hit {
            flagged.push(map_role_to_class(&soi.text, &soi.role));
        }
        diag.sois.push(SoiDiagnostic {
            text: soi.text.clone(),
            start: soi.start,
            end: soi.end,
            role: soi.role.as_str().to_string(),
            rank: r.rank,
            soi_score: r.soi_score,
            candidates: r.candidate_scores.len(),
            flagged: hit,
        });
    }
    if sois.is_empty() {
        diag.note = Some(NO_SOI_NOTE.to_string());
    }
    let labels = normalize_labels(&LabelSet::from_detected(flagged), merge_linke);
    PredictionSet::new(labels).with_diagnostics(diag)
}

fn truncate(candidates: &[CandidateSpan], max: Option<usize>) -> &[CandidateSpan] {
    match max {
        Some(m) if m < candidates.len() => &candidates[..m],
        _ => candidates,
    }
}

/// Runs the detector on one sentence given its SOIs and their candidates.
pub fn detect(
    scorer: &dyn SequenceScorer,
    dialogue: &Dialogue,
    sentence: &SummarySentence,
    sois: &[SpanOfInterest],
    candidates_by_soi: &[Vec<CandidateSpan>],
    config: &RankerConfig,
) -> Result<PredictionSet, DetectError> {
    if config.threshold_t == 0 {
        return Err(DetectError::ZeroThreshold);
    }
    if sois.len() != candidates_by_soi.len() {
        return Err(DetectError::CandidateMismatch { sois: sois.len(), candidate_lists: candidates_by_soi.len() });
    }
    let prepared = if config.cache_context && !sois.is_empty() {
        Some(scorer.prepare(dialogue).map_err(DetectError::Context)?)
    } else {
        None
    };
    let ranks = rank_all(scorer, dialogue, prepared.as_ref(), &sentence.text, sois, candidates_by_soi, config.max_candidates)?;
    Ok(predict_from_ranks(sois, &ranks, config.threshold_t, config.merge_linke))
}

fn rank_all(
    scorer: &dyn SequenceScorer,
    dialogue: &Dialogue,
    prepared: Option<&PreparedContext>,
    sentence: &str,
    sois: &[SpanOfInterest],
    candidates_by_soi: &[Vec<CandidateSpan>],
    max_candidates: Option<usize>,
) -> Result<Vec<RankResult>, DetectError> {
    let source = match prepared {
        Some(ctx) => ContextSource::Prepared(ctx),
        None => ContextSource::Fresh(dialogue),
    };
    sois.iter()
        .zip(candidates_by_soi)
        .map(|(soi, cands)| {
            rank_soi_with(scorer, source, sentence, soi, truncate(cands, max_candidates))
                .map_err(|source| DetectError::Score { soi: soi.text.clone(), source })
        })
        .collect()
}

/// Everything about one sentence that does not depend on `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceAnalysis {
    pub sois: Vec<SpanOfInterest>,
    pub candidates: Vec<Vec<CandidateSpan>>,
    pub ranks: Vec<RankResult>,
}

impl SentenceAnalysis {
    pub fn predict(&self, t: usize, merge_linke: bool) -> PredictionSet {
        predict_from_ranks(&self.sois, &self.ranks, t, merge_linke)
    }
}

/// The detector bound to a scorer and an annotator.
#[derive(Clone)]
pub struct EnDeRanker {
    pub scorer: Arc<dyn SequenceScorer>,
    pub provider: Arc<dyn AnnotatorProvider>,
    pub config: RankerConfig,
}

struct DialogueCache {
    analysis: DialogueAnalysis,
    context: Option<PreparedContext>,
}

impl EnDeRanker {
    pub fn new(scorer: Arc<dyn SequenceScorer>, provider: Arc<dyn AnnotatorProvider>, config: RankerConfig) -> Self {
        EnDeRanker { scorer, provider, config }
    }

    fn parallel(&self) -> bool {
        self.scorer.concurrent_safe() && self.provider.concurrent_safe()
    }

    fn candidate_config(&self) -> CandidateConfig {
        CandidateConfig { include_query: self.config.include_query }
    }

    fn build_cache(&self, dialogue: &Dialogue) -> Result<DialogueCache, DetectError> {
        let analysis = DialogueAnalysis::build(dialogue, self.provider.as_ref(), self.candidate_config())
            .map_err(|source| DetectError::Analysis { dialogue_id: dialogue.id.clone(), sentence_index: 0, source })?;
        let context = if self.config.cache_context {
            Some(self.scorer.prepare(dialogue).map_err(DetectError::Context)?)
        } else {
            None
        };
        Ok(DialogueCache { analysis, context })
    }

    fn analyze_with(&self, ex: &DialogueExample, cache: &DialogueCache) -> Result<SentenceAnalysis, DetectError> {
        let sois = lingo::identify_sois(&ex.sentence, self.provider.as_ref()).map_err(|source| DetectError::Analysis {
            dialogue_id: ex.sentence.dialogue_id.clone(),
            sentence_index: ex.sentence.sentence_index,
            source,
        })?;
        let candidates: Vec<Vec<CandidateSpan>> = sois
            .iter()
            .map(|s| {
                let mut c = cache.analysis.candidates_for(s);
                if let Some(m) = self.config.max_candidates {
                    c.truncate(m);
                }
                c
            })
            .collect();
        let ranks = rank_all(
            self.scorer.as_ref(),
            &ex.dialogue,
            cache.context.as_ref(),
            &ex.sentence.text,
            &sois,
            &candidates,
            None,
        )?;
        Ok(SentenceAnalysis { sois, candidates, ranks })
    }

    pub fn analyze_example(&self, ex: &DialogueExample) -> Result<SentenceAnalysis, DetectError> {
        self.analyze_with(ex, &self.build_cache(&ex.dialogue)?)
    }

    /// Analyses in example order. Dialogue-level work runs once per dialogue.
    pub fn analyze_examples(&self, examples: &[DialogueExample]) -> Result<Vec<SentenceAnalysis>, DetectError> {
        let mut order: Vec<&Arc<Dialogue>> = Vec::new();
        for ex in examples {
            if !order.iter().any(|d| d.id == ex.dialogue.id) {
                order.push(&ex.dialogue);
            }
        }
        let caches: Vec<DialogueCache> = if self.parallel() {
            order.par_iter().map(|d| self.build_cache(d)).collect::<Result<_, _>>()?
        } else {
            order.iter().map(|d| self.build_cache(d)).collect::<Result<_, _>>()?
        };
        let by_id: HashMap<&str, &DialogueCache> = order.iter().map(|d| d.id.as_str()).zip(caches.iter()).collect();
        let run = |ex: &DialogueExample| self.analyze_with(ex, by_id[ex.dialogue.id.as_str()]);
        if self.parallel() {
            examples.par_iter().map(run).collect()
        } else {
            examples.iter().map(run).collect()
        }
    }

    pub fn detect_examples(&self, examples: &[DialogueExample]) -> Result<Vec<PredictionSet>, DetectError> {
        if self.config.threshold_t == 0 {
            return Err(DetectError::ZeroThreshold);
        }
        Ok(self
            .analyze_examples(examples)?
            .iter()
            .map(|a| a.predict(self.config.threshold_t, self.config.merge_linke))
            .collect())
    }

    /// Tunes `T` on `validation` and returns it.
    pub fn tune_threshold(&self, validation: &Corpus, grid: &[usize]) -> Result<usize, DetectError> {
        let golds: Vec<LabelSet> = validation
            .examples
            .iter()
            .map(|e| e.gold.as_ref().map(|g| g.labels.clone()).ok_or(DetectError::MissingGold))
            .collect::<Result<_, _>>()?;
        let analyses = self.analyze_examples(&validation.examples)?;
        Ok(tune_threshold_from(&analyses, &golds, grid, self.config.merge_linke)?.0)
    }
}

/// Macro-F1 for every `T` in `grid` and the smallest `T` reaching the best.
pub fn tune_threshold_from(
    analyses: &[SentenceAnalysis],
    golds: &[LabelSet],
    grid: &[usize],
    merge_linke: bool,
) -> Result<(usize, Vec<(usize, f64)>), DetectError> {
    if grid.is_empty() {
        return Err(DetectError::EmptyGrid);
    }
    if grid.contains(&0) {
        return Err(DetectError::ZeroThreshold);
    }
    let mut landscape = Vec::with_capacity(grid.len());
    for &t in grid {
        let preds: Vec<LabelSet> = analyses.iter().map(|a| a.predict(t, merge_linke).labels).collect();
        landscape.push((t, metrics::evaluate(&preds, golds, merge_linke)?.macro_f1));
    }
    let best = metrics::smallest_argmax(&landscape).ok_or(DetectError::EmptyGrid)?;
    Ok((best, landscape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lingo::{CandidateSource, SemanticRole, SoiKind};
    use crate::types::{ErrorClass, Utterance};

    fn soi(text: &str, start: usize, role: &str) -> SpanOfInterest {
        SpanOfInterest {
            text: text.into(),
            start,
            end: start + text.chars().count(),
            kind: SoiKind::NamedEntity,
            ne_class: Some("PERSON".into()),
            role: SemanticRole::new(role),
            lemma: None,
        }
    }

    fn cand(text: &str) -> CandidateSpan {
        CandidateSpan { text: text.into(), source: CandidateSource::SameDialogue, kind: SoiKind::NamedEntity }
    }

    fn dialogue() -> Dialogue {
        Dialogue {
            id: "d".into(),
            query: None,
            utterances: vec![Utterance { speaker: "Vanessa".into(), text: "Lucas is late".into(), index: 0 }],
            source: None,
        }
    }

    #[test]
    fn rank_rule() {
        assert_eq!(rank_from_scores(-1.0, &[-0.5, -1.5]), 2);
        assert_eq!(rank_from_scores(-1.0, &[]), 1);
        assert_eq!(rank_from_scores(-1.0, &[-1.0, -2.0]), 1);
    }

    #[test]
    fn detect_flags_strictly_above_threshold() {
        let sentence = SummarySentence { dialogue_id: "d".into(), model_id: "m".into(), sentence_index: 0, text: "Lucas waits".into() };
        let mut m = MockScorer::new(0.5).with_entry("d", "Lucas waits", vec![0.1, 0.1]);
        for (i, name) in ["A", "B", "C", "D"].iter().enumerate() {
            m.insert("d", &format!("{name} waits"), vec![0.2 + 0.1 * i as f64, 0.5]);
        }
        let sois = vec![soi("Lucas", 0, "ARG0")];
        let cands = vec![["A", "B", "C", "D"].iter().map(|c| cand(c)).collect::<Vec<_>>()];
        let run = |t| {
            let cfg = RankerConfig { threshold_t: t, ..RankerConfig::default() };
            detect(&m, &dialogue(), &sentence, &sois, &cands, &cfg).unwrap()
        };
        let p = run(3);
        assert_eq!(p.labels, LabelSet::from_detected([ErrorClass::EntE]));
        assert_eq!(p.diagnostics.as_ref().unwrap().sois[0].rank, 5);
        assert!(run(5).labels.is_no_error());
        assert!(run(4).labels.contains(ErrorClass::EntE));
    }

    #[test]
    fn no_soi_note() {
        let m = MockScorer::new(0.5);
        let sentence = SummarySentence { dialogue_id: "d".into(), model_id: "m".into(), sentence_index: 0, text: "Ok.".into() };
        let p = detect(&m, &dialogue(), &sentence, &[], &[], &RankerConfig::default()).unwrap();
        assert!(p.labels.is_no_error());
        assert_eq!(p.diagnostics.unwrap().note.as_deref(), Some(NO_SOI_NOTE));
    }

    #[test]
    fn cached_equals_uncached() {
        let s = OverlapScorer;
        let sentence = SummarySentence { dialogue_id: "d".into(), model_id: "m".into(), sentence_index: 0, text: "Vanessa waits".into() };
        let sois = vec![soi("Vanessa", 0, "ARG0")];
        let cands = vec![vec![cand("Lucas"), cand("Tom")]];
        let a = detect(&s, &dialogue(), &sentence, &sois, &cands, &RankerConfig::default()).unwrap();
        let cfg = RankerConfig { cache_context: false, ..RankerConfig::default() };
        let b = detect(&s, &dialogue(), &sentence, &sois, &cands, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tuning_picks_smallest_best() {
        let analyses = vec![SentenceAnalysis {
            sois: vec![soi("Lucas", 0, "ARG0")],
            candidates: vec![vec![]],
            ranks: vec![RankResult { soi_score: -1.0, candidate_scores: vec![], rank: 1 }],
        }];
        let golds = vec![LabelSet::no_error()];
        assert_eq!(tune_threshold_from(&analyses, &golds, &[1, 2], true).unwrap().0, 1);
        assert_eq!(tune_threshold_from(&analyses, &golds, &[4], true).unwrap().0, 4);
        assert!(tune_threshold_from(&analyses, &golds, &[], true).is_err());
    }
}
