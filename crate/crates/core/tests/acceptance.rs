//! Acceptance checks, one line per criterion:
//! `criterion N <name>: PASS|FAIL|SKIP <detail>`.
//! Exits non-zero when any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use dialfact::adapters::{dae_arc_class, dae_to_classes, ArcJudgment, PredictionRecord};
use dialfact::corruptor::{
    export_training_set, generate_training_set, ReplacementScope, CAUSE_MARKERS, RESULT_MARKERS,
};
use dialfact::dataset::{corpus_stats, load_corpus};
use dialfact::enderanker::{
    rank_from_scores, tune_threshold_from, MockScorer, PreparedContext, RankResult, RankerConfig,
    ScoreError, SentenceAnalysis, SequenceScorer,
};
use dialfact::ensemble::{freq_vote, logistic_fit, upsample, LogisticConfig, TrainingRow};
use dialfact::lingo::{
    self, map_role_to_class, role_for_span, CandidateConfig, CandidateSource, CandidateSpan, DialogueAnalysis,
    SemanticRole, SoiKind, SpanOfInterest,
};
use dialfact::metrics::{cohens_kappa, evaluate};
use dialfact::{ErrorClass, LabelSet, PredictionSet, Verifiability};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dialfact"))
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

// ---------------------------------------------------------------------------
// 1-2: released corpus

const CORPUS_ENV: &str = "DIASUMFACT_CORPUS";

fn released_corpus() -> Result<dialfact::dataset::Corpus, Outcome> {
    match std::env::var_os(CORPUS_ENV) {
        None => Err(Outcome::Skip(format!("{CORPUS_ENV} is not set; the released corpus is not bundled"))),
        Some(p) => load_corpus(Path::new(&p)).map_err(|e| Outcome::Fail(format!("cannot load {p:?}: {e}"))),
    }
}

fn released_statistics() -> Outcome {
    let start = Instant::now();
    let corpus = match released_corpus() {
        Ok(c) => c,
        Err(o) => return o,
    };
    let stats = match corpus_stats(&corpus) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    use ErrorClass::*;
    let expected = [(NoError, 853), (EntE, 256), (PredE, 106), (CirE, 48), (CorefE, 62), (LinkE, 41), (Others, 42)];
    let mut problems = Vec::new();
    for (c, n) in expected {
        if stats.per_class_counts[&c] != n {
            problems.push(format!("{c}: {} != {n}", stats.per_class_counts[&c]));
        }
    }
    for (src, n) in [("SAMSum", 757), ("QMSum", 583)] {
        let got = stats.by_source.get(src).map(|s| s.example_count);
        if got != Some(n) {
            problems.push(format!("{src} examples: {got:?} != {n}"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        problems.push(format!("took {elapsed:?}"));
    }
    ensure(problems.is_empty(), if problems.is_empty() { format!("exact counts in {elapsed:?}") } else { problems.join("; ") })
}

fn released_ratios() -> Outcome {
    let corpus = match released_corpus() {
        Ok(c) => c,
        Err(o) => return o,
    };
    let stats = match corpus_stats(&corpus) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let mut problems = Vec::new();
    for (src, pct) in [("SAMSum", 33.3), ("QMSum", 41.9)] {
        match stats.by_source.get(src) {
            Some(s) if (100.0 * s.inconsistent_rate - pct).abs() <= 0.5 => {}
            Some(s) => problems.push(format!("{src} rate {:.2}% vs {pct}%", 100.0 * s.inconsistent_rate)),
            None => problems.push(format!("no {src} sentences")),
        }
    }
    if (stats.avg_errors_per_inconsistent_sentence - 1.14).abs() > 0.01 {
        problems.push(format!("errors per inconsistent sentence {:.3}", stats.avg_errors_per_inconsistent_sentence));
    }
    ensure(problems.is_empty(), if problems.is_empty() { "rates within tolerance".into() } else { problems.join("; ") })
}

// ---------------------------------------------------------------------------
// 3: ranking detector against a brute-force oracle

/// Enumerates the variants of each SOI, scores them straight from the
/// mock's per-token probabilities, sorts best-first with the original
/// ahead of equal scores, and thresholds.
fn oracle_detect(
    scorer: &MockScorer,
    dialogue_id: &str,
    text: &str,
    sois: &[SpanOfInterest],
    candidates: &[Vec<CandidateSpan>],
    t: usize,
) -> (BTreeSet<ErrorClass>, Vec<usize>) {
    let score = |s: &str| -> f64 {
        let toks: Vec<String> = s.split_whitespace().map(String::from).collect();
        (0..toks.len()).map(|i| scorer.probability(dialogue_id, &toks, i).ln()).sum::<f64>() / toks.len() as f64
    };
    let mut flagged = Vec::new();
    let mut ranks = Vec::new();
    for (soi, cands) in sois.iter().zip(candidates) {
        let mut entries: Vec<(f64, bool)> = vec![(score(text), true)];
        for c in cands {
            entries.push((score(&splice(text, soi.start, soi.end, &c.text)), false));
        }
        // Descending by score; on equal scores the original comes first.
        entries.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(b.1.cmp(&a.1)));
        let rank = 1 + entries.iter().position(|e| e.1).unwrap();
        ranks.push(rank);
        if rank > t {
            flagged.push(algorithm1(&soi.text, soi.role.as_str()));
        }
    }
    let merged = flagged.into_iter().map(|c| if c == ErrorClass::LinkE { ErrorClass::Others } else { c });
    (union_or_no_error(merged), ranks)
}

fn ranker_oracle() -> Outcome {
    let start = Instant::now();
    let corpus = fixture_corpus();
    let provider = airport_provider();
    let scorer = MockScorer::hashed(0);
    let dir = tmp();
    let mut mismatches = Vec::new();
    let mut flagged_total = 0;
    for t in 1..=3usize {
        let out = dir.path().join(format!("preds{t}.jsonl"));
        let status = bin()
            .args(["detect", "--corpus"])
            .arg(fixture("corpus.jsonl"))
            .args(["--scorer", "mock", "--provider"])
            .arg(format!("fixture:{}", fixture("airport_annotations.json").display()))
            .args(["--T", &t.to_string(), "--out"])
            .arg(&out)
            .env_remove("DIALFACT_REGISTRY")
            .status()
            .expect("binary runs");
        if !status.success() {
            return Outcome::Fail(format!("detect exited with {status}"));
        }
        let records: Vec<PredictionRecord> = std::fs::read_to_string(&out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        if records.len() != corpus.len() {
            return Outcome::Fail(format!("{} records for {} sentences", records.len(), corpus.len()));
        }
        let mut analyses: BTreeMap<String, DialogueAnalysis> = BTreeMap::new();
        for (ex, rec) in corpus.examples.iter().zip(&records) {
            let d = &ex.dialogue;
            let analysis = analyses
                .entry(d.id.clone())
                .or_insert_with(|| DialogueAnalysis::build(d, &provider, CandidateConfig::default()).unwrap());
            let sois = lingo::identify_sois(&ex.sentence, &provider).unwrap();
            let cands: Vec<Vec<CandidateSpan>> = sois.iter().map(|s| analysis.candidates_for(s)).collect();
            let (labels, ranks) = oracle_detect(&scorer, &d.id, &ex.sentence.text, &sois, &cands, t);
            let got_ranks: Vec<usize> =
                rec.prediction.diagnostics.as_ref().map(|dg| dg.sois.iter().map(|s| s.rank).collect()).unwrap_or_default();
            if &labels != rec.prediction.labels.as_set() || ranks != got_ranks {
                mismatches.push(format!("T={t} {}#{}", d.id, ex.sentence.sentence_index));
            }
            flagged_total += usize::from(!rec.prediction.labels.is_no_error());
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        mismatches.push(format!("took {elapsed:?}"));
    }
    ensure(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("{} sentences x 3 thresholds agree ({flagged_total} flagged) in {elapsed:?}", corpus.len())
        } else {
            mismatches.join(", ")
        },
    )
}

// ---------------------------------------------------------------------------
// 4: ranking invariants

/// Gives every token of a variant the same log-probability, looked up by
/// the variant text, optionally passed through a monotone map.
struct TableScorer {
    table: BTreeMap<String, f64>,
    transform: fn(f64) -> f64,
}

impl SequenceScorer for TableScorer {
    fn name(&self) -> &str {
        "table"
    }

    fn token_logprobs(&self, _: &PreparedContext, tokens: &[String]) -> Result<Vec<f64>, ScoreError> {
        let v = *self.table.get(&tokens.join(" ")).expect("variant in table");
        Ok(vec![(self.transform)(v); tokens.len()])
    }
}

fn identity(x: f64) -> f64 {
    x
}
fn affine(x: f64) -> f64 {
    3.0 * x - 0.5
}
fn cubic(x: f64) -> f64 {
    x * x * x
}
fn negexp(x: f64) -> f64 {
    -(-x).exp()
}

fn ranking_invariants() -> Outcome {
    let mut runner = TestRunner::new(PropConfig { cases: 1000, failure_persistence: None, ..PropConfig::default() });
    // Scores on a coarse grid so that ties are frequent.
    let score = (-40i32..=0).prop_map(|v| f64::from(v) / 4.0);
    let strat = (score.clone(), proptest::collection::vec(score.clone(), 0..12), score, 0usize..8);
    let insertion = runner.run(&strat, |(soi, cands, extra, at)| {
        let before = rank_from_scores(soi, &cands);
        let mut more = cands.clone();
        more.insert(at.min(more.len()), extra);
        let after = rank_from_scores(soi, &more);
        prop_assert!(after >= before);
        prop_assert_eq!(after - before, usize::from(extra > soi));
        Ok(())
    });
    if let Err(e) = insertion {
        return Outcome::Fail(format!("rank monotonicity: {e}"));
    }

    let mut runner = TestRunner::new(PropConfig { cases: 1000, failure_persistence: None, ..PropConfig::default() });
    let grid = (-40i32..=-1).prop_map(|v| f64::from(v) / 4.0);
    let strat = (
        proptest::collection::vec((grid.clone(), proptest::collection::vec(grid, 0..6), 0usize..4), 1..4),
        1usize..5,
        0usize..3,
    );
    let roles = ["ARG0", "ARGM-TMP", "V", "ARG1"];
    let transforms: [fn(f64) -> f64; 3] = [affine, cubic, negexp];
    let invariance = runner.run(&strat, |(layout, t, which)| {
        let dialogue = dialfact::Dialogue {
            id: "d".into(),
            query: None,
            utterances: vec![dialfact::Utterance { speaker: "A".into(), text: "x".into(), index: 0 }],
            source: None,
        };
        // One word per SOI; candidates are distinct made-up words.
        let words: Vec<String> = (0..layout.len()).map(|i| format!("w{i}")).collect();
        let text = words.join(" ");
        let mut table = BTreeMap::new();
        table.insert(text.clone(), layout.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max));
        let mut sois = Vec::new();
        let mut cand_lists = Vec::new();
        let mut offset = 0;
        for (i, (soi_score, cands, role)) in layout.iter().enumerate() {
            let w = &words[i];
            let start = offset;
            offset += w.len() + 1;
            sois.push(SpanOfInterest {
                text: w.clone(),
                start,
                end: start + w.len(),
                kind: SoiKind::NamedEntity,
                ne_class: Some("PERSON".into()),
                role: SemanticRole::new(roles[*role]),
                lemma: None,
            });
            let mut list = Vec::new();
            for (j, &c) in cands.iter().enumerate() {
                let cw = format!("c{i}x{j}");
                let variant = splice(&text, start, start + w.len(), &cw);
                table.insert(variant, c);
                list.push(CandidateSpan { text: cw, source: CandidateSource::SameDialogue, kind: SoiKind::NamedEntity });
            }
            cand_lists.push(list);
            let _ = soi_score;
        }
        let sentence = dialfact::SummarySentence { dialogue_id: "d".into(), model_id: "m".into(), sentence_index: 0, text };
        let cfg = RankerConfig { threshold_t: t, ..RankerConfig::default() };
        let base = TableScorer { table: table.clone(), transform: identity };
        let moved = TableScorer { table, transform: transforms[which] };
        let a = dialfact::enderanker::detect(&base, &dialogue, &sentence, &sois, &cand_lists, &cfg).unwrap();
        let b = dialfact::enderanker::detect(&moved, &dialogue, &sentence, &sois, &cand_lists, &cfg).unwrap();
        prop_assert_eq!(&a.labels, &b.labels);
        let ra: Vec<usize> = a.diagnostics.unwrap().sois.iter().map(|s| s.rank).collect();
        let rb: Vec<usize> = b.diagnostics.unwrap().sois.iter().map(|s| s.rank).collect();
        prop_assert_eq!(ra, rb);
        Ok(())
    });
    if let Err(e) = invariance {
        return Outcome::Fail(format!("transform invariance: {e}"));
    }

    let mut runner = TestRunner::new(PropConfig { cases: 1000, failure_persistence: None, ..PropConfig::default() });
    let grid = (-8i32..=0).prop_map(|v| f64::from(v) / 2.0);
    let strat = (grid.clone(), proptest::collection::vec(grid, 0..10), any::<u64>());
    let ties = runner.run(&strat, |(soi, cands, seed)| {
        let r = rank_from_scores(soi, &cands);
        prop_assert_eq!(r, 1 + cands.iter().filter(|&&c| c > soi).count());
        let mut shuffled = cands.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(rank_from_scores(soi, &shuffled), r);
        let mut tied = cands.clone();
        tied.push(soi);
        prop_assert_eq!(rank_from_scores(soi, &tied), r);
        prop_assert_eq!(rank_from_scores(soi, &cands), r);
        Ok(())
    });
    match ties {
        Err(e) => Outcome::Fail(format!("tie rule: {e}")),
        Ok(()) => Outcome::Pass("3 x 1000 cases, zero violations".into()),
    }
}

// ---------------------------------------------------------------------------
// 5: role-to-class table

fn role_mapping_table() -> Outcome {
    let mut roles: Vec<String> = Vec::new();
    for i in 0..=5 {
        roles.push(format!("ARG{i}"));
        roles.push(format!("arg{i}"));
    }
    for m in [
        "TMP", "LOC", "MNR", "CAU", "PRP", "PNC", "DIR", "ADV", "DIS", "NEG", "MOD", "EXT", "PRD", "GOL", "COM", "REC",
        "ADJ", "LVB", "CXN", "PRR",
    ] {
        roles.push(format!("ARGM-{m}"));
        roles.push(format!("C-ARGM-{m}"));
        roles.push(format!("R-ARGM-{m}"));
    }
    for r in ["V", "v", "NONE", "", "ARG6", "ARGA", "C-ARG0", "R-ARG1", "C-V", "O", "B-ARG0", "ARG"] {
        roles.push(r.to_string());
    }
    let pronouns = [
        "i", "we", "us", "you", "he", "him", "she", "her", "it", "they", "them", "this", "that", "these", "those",
        "myself", "yourself", "himself", "herself", "ourselves", "yourselves", "themselves",
    ];
    let mut spans: Vec<String> = Vec::new();
    for p in pronouns {
        spans.push(p.to_string());
        spans.push(p.to_uppercase());
        let mut c = p.chars();
        spans.push(c.next().unwrap().to_uppercase().chain(c).collect());
    }
    for s in ["Lucas", "the airport", "me", "mine", "his", "their", "it's", "New York", "called", "themself", ""] {
        spans.push(s.to_string());
    }
    if dialfact::lingo::PRONOUNS.len() != pronouns.len() || !pronouns.iter().all(|p| dialfact::lingo::PRONOUNS.contains(p)) {
        return Outcome::Fail("pronoun inventory differs from the printed list".into());
    }
    let mut bad = Vec::new();
    let mut n = 0;
    for r in &roles {
        for s in &spans {
            n += 1;
            let got = map_role_to_class(s, &SemanticRole::new(r.clone()));
            if got != algorithm1(s, r) {
                bad.push(format!("({s:?}, {r:?}) -> {got}"));
            }
        }
    }
    ensure(bad.is_empty(), if bad.is_empty() { format!("{n} (span, role) pairs") } else { bad.join(", ") })
}

// ---------------------------------------------------------------------------
// 6: dependency-arc table

fn arc_table() -> Outcome {
    use ErrorClass::*;
    let rows: [(&[&str], ErrorClass); 3] = [
        (&["nsubj", "obj", "obl:agent", "iobj", "dobj", "nmod", "vocative", "appos", "nummod", "compound", "amod", "det", "clf", "flat"], EntE),
        (&["obl:tmod", "advmod"], CirE),
        (&["aux"], PredE),
    ];
    let mut bad = Vec::new();
    let mut listed = Vec::new();
    for (types, class) in rows {
        for t in types {
            listed.push(*t);
            if dae_arc_class(t) != class {
                bad.push(format!("{t} -> {}", dae_arc_class(t)));
            }
        }
    }
    for t in ["case", "mark", "cc", "conj", "punct", "xcomp", "ccomp", "obl", "nsubj:pass", "NSUBJ", "", "root", "cop"] {
        if dae_arc_class(t) != Others {
            bad.push(format!("unknown {t} -> {}", dae_arc_class(t)));
        }
    }
    // Every combination of erroneous arcs stays clear of the discourse classes.
    let mut pool: Vec<&str> = listed.clone();
    pool.extend(["case", "mark", "punct", "weird"]);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..2000 {
        let k = rng.gen_range(0..6);
        let arcs: Vec<ArcJudgment> =
            (0..k).map(|_| ArcJudgment::new(pool[rng.gen_range(0..pool.len())], "h", "d", rng.gen_range(0.0..1.0))).collect();
        let p = dae_to_classes(&arcs);
        if p.labels.contains(CorefE) || p.labels.contains(LinkE) {
            bad.push(format!("{:?} reached a discourse class", arcs.iter().map(|a| &a.arc_type).collect::<Vec<_>>()));
            break;
        }
        let expected = union_or_no_error(arcs.iter().filter(|a| a.probability < 0.5).map(|a| dae_arc_class(&a.arc_type)));
        if p.labels.as_set() != &expected {
            bad.push("union mismatch".into());
            break;
        }
    }
    ensure(bad.is_empty(), if bad.is_empty() { format!("{} listed types, unknowns and 2000 arc sets", listed.len()) } else { bad.join(", ") })
}

// ---------------------------------------------------------------------------
// 7: corruption labels

fn corruption_consistency() -> Outcome {
    let corpus = fixture_corpus();
    let provider = heuristic();
    let per_class = 1000;
    let set = match generate_training_set(&corpus, &provider, per_class, 2024) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let mut problems = Vec::new();
    if !set.shortfalls.is_empty() {
        problems.push(format!("shortfalls {:?}", set.shortfalls));
    }
    let mut per: BTreeMap<ErrorClass, (usize, usize, usize)> = BTreeMap::new();
    let mut annotations = BTreeMap::new();
    for n in &set.negatives {
        let c = &n.example;
        let e = per.entry(c.label).or_default();
        e.0 += 1;
        match c.replacement_scope {
            Some(ReplacementScope::SameDialogue) => e.1 += 1,
            Some(ReplacementScope::CorpusWide) => e.2 += 1,
            None => {}
        }
        let consistent = if c.label == ErrorClass::LinkE {
            let (from, to) = (c.replaced_span.text.to_lowercase(), c.replacement.to_lowercase());
            (CAUSE_MARKERS.contains(&from.as_str()) && RESULT_MARKERS.contains(&to.as_str()))
                || (RESULT_MARKERS.contains(&from.as_str()) && CAUSE_MARKERS.contains(&to.as_str()))
        } else {
            let ann = annotations
                .entry(c.original.clone())
                .or_insert_with(|| lingo::analyze(&provider, &c.original).unwrap())
                .clone();
            let role = role_for_span(&ann.srl_frames, c.replaced_span.start, c.replaced_span.end);
            algorithm1(&c.replaced_span.text, role.as_str()) == c.label
        };
        if !consistent {
            problems.push(format!("{} {:?} -> {:?}", c.label, c.replaced_span.text, c.replacement));
        }
        let one_span = c.corrupted == splice(&c.original, c.replaced_span.start, c.replaced_span.end, &c.replacement)
            && c.corrupted != c.original
            && c.replacement.to_lowercase() != c.replaced_span.text.to_lowercase();
        if !one_span {
            problems.push(format!("bad splice {:?}", c.corrupted));
        }
        if c.verifiability.is_some() != c.label.supports_verifiability() {
            problems.push(format!("{} verifiability {:?}", c.label, c.verifiability));
        }
        if c.replacement_scope == Some(ReplacementScope::SameDialogue) && c.verifiability != Some(Verifiability::Intrinsic) {
            problems.push(format!("same-dialogue {:?} not intrinsic", c.replacement));
        }
        if c.replacement_scope == Some(ReplacementScope::CorpusWide) && c.verifiability != Some(Verifiability::Extrinsic) {
            problems.push(format!("corpus-wide {:?} not extrinsic", c.replacement));
        }
    }
    for class in ErrorClass::ERRORS {
        let (n, same, wide) = per.get(&class).copied().unwrap_or_default();
        if n != per_class {
            problems.push(format!("{class}: {n} examples"));
        }
        if class.supports_verifiability() && (same as i64 - wide as i64).abs() > 1 {
            problems.push(format!("{class}: split {same}/{wide}"));
        }
    }
    let again = generate_training_set(&corpus, &provider, per_class, 2024).unwrap();
    if export_training_set(&corpus, &again) != export_training_set(&corpus, &set) {
        problems.push("not deterministic".into());
    }
    let other = generate_training_set(&corpus, &provider, 20, 2025).unwrap();
    let same_seed_small = generate_training_set(&corpus, &provider, 20, 2024).unwrap();
    if other.negatives == same_seed_small.negatives {
        problems.push("seed has no effect".into());
    }
    problems.truncate(8);
    ensure(
        problems.is_empty(),
        if problems.is_empty() { format!("{} negatives, all consistent, scopes split 500/500", set.negatives.len()) } else { problems.join("; ") },
    )
}

// ---------------------------------------------------------------------------
// 8: metrics

fn random_labels(rng: &mut ChaCha8Rng) -> LabelSet {
    if rng.gen_bool(0.35) {
        LabelSet::no_error()
    } else {
        let k = rng.gen_range(1..=3);
        LabelSet::new((0..k).map(|_| ErrorClass::ERRORS[rng.gen_range(0..6)])).unwrap()
    }
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..500 {
        let n = rng.gen_range(1..40);
        let preds: Vec<LabelSet> = (0..n).map(|_| random_labels(&mut rng)).collect();
        let golds: Vec<LabelSet> = (0..n).map(|_| random_labels(&mut rng)).collect();
        let merge = rng.gen_bool(0.5);
        let r = evaluate(&preds, &golds, merge).unwrap();
        let ps: Vec<BTreeSet<ErrorClass>> = preds.iter().map(|p| p.as_set().clone()).collect();
        let gs: Vec<BTreeSet<ErrorClass>> = golds.iter().map(|g| g.as_set().clone()).collect();
        let (per, micro, macro_f1) = brute_force_f1(&ps, &gs, merge);
        let same = per.iter().all(|(c, f)| (r.per_class_f1[c] - f).abs() < 1e-12)
            && per.len() == r.per_class_f1.len()
            && (r.micro_f1 - micro).abs() < 1e-12
            && (r.macro_f1 - macro_f1).abs() < 1e-12;
        if !same {
            return Outcome::Fail(format!("case {case}: {r:?}"));
        }
        // Swapping sides swaps FP and FN and keeps every F1.
        let s = evaluate(&golds, &preds, merge).unwrap();
        if r.counts.iter().any(|(c, k)| s.counts[c].fp != k.fn_ || s.counts[c].fn_ != k.fp) {
            return Outcome::Fail(format!("case {case}: swap asymmetry"));
        }
    }
    let k1 = cohens_kappa(&["a", "b", "c", "a"], &["a", "b", "c", "a"]).unwrap();
    let k0 = cohens_kappa(&["x", "x", "y", "y"], &["x", "y", "x", "y"]).unwrap();
    // p_o = 0.8, p_e = 0.6*0.4 + 0.4*0.6 = 0.48 -> 0.32 / 0.52
    let kh = cohens_kappa(&[1, 1, 1, 0, 0], &[1, 1, 0, 0, 0]).unwrap();
    let ok = (k1 - 1.0).abs() < 1e-12 && k0.abs() < 1e-12 && (kh - 0.32 / 0.52).abs() < 1e-12;
    ensure(ok, format!("500 random fixtures match; kappa identity {k1}, chance {k0}, hand case {kh:.6}"))
}

// ---------------------------------------------------------------------------
// 9: threshold tuning

fn threshold_landscapes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let roles = ["ARG0", "ARG1", "ARGM-LOC", "ARGM-TMP", "V", "NONE"];
    let words = ["Lucas", "it", "the airport", "called", "them", "tomorrow"];
    let grid: Vec<usize> = (1..=10).collect();
    let mut plateaus = 0;
    for case in 0..50 {
        let n = rng.gen_range(5..30);
        let mut analyses = Vec::new();
        let mut golds = Vec::new();
        for _ in 0..n {
            let k = rng.gen_range(0..4);
            let sois: Vec<SpanOfInterest> = (0..k)
                .map(|_| SpanOfInterest {
                    text: words[rng.gen_range(0..words.len())].into(),
                    start: 0,
                    end: 1,
                    kind: SoiKind::NounPhrase,
                    ne_class: None,
                    role: SemanticRole::new(roles[rng.gen_range(0..roles.len())]),
                    lemma: None,
                })
                .collect();
            let ranks: Vec<RankResult> = sois
                .iter()
                .map(|_| RankResult { soi_score: -1.0, candidate_scores: vec![], rank: rng.gen_range(1..=12) })
                .collect();
            analyses.push(SentenceAnalysis { candidates: vec![vec![]; sois.len()], sois, ranks });
            golds.push(random_labels(&mut rng));
        }
        let (best, landscape) = tune_threshold_from(&analyses, &golds, &grid, true).unwrap();
        let gs: Vec<BTreeSet<ErrorClass>> = golds.iter().map(|g| g.as_set().clone()).collect();
        let mut oracle: Option<(usize, f64)> = None;
        let mut values = Vec::new();
        for &t in &grid {
            let preds: Vec<BTreeSet<ErrorClass>> = analyses
                .iter()
                .map(|a| {
                    union_or_no_error(
                        a.sois.iter().zip(&a.ranks).filter(|(_, r)| r.rank > t).map(|(s, _)| algorithm1(&s.text, s.role.as_str())),
                    )
                })
                .collect();
            let m = brute_force_f1(&preds, &gs, true).2;
            values.push(m);
            if oracle.is_none_or(|(_, b)| m > b) {
                oracle = Some((t, m));
            }
        }
        let (t_star, m_star) = oracle.unwrap();
        plateaus += usize::from(values.iter().filter(|&&v| v == m_star).count() > 1);
        let landscape_ok = landscape.iter().zip(&values).all(|((_, a), b)| (a - b).abs() < 1e-12);
        if best != t_star || !landscape_ok {
            return Outcome::Fail(format!("case {case}: tuned {best}, oracle {t_star}"));
        }
    }
    Outcome::Pass(format!("50 landscapes ({plateaus} with tied maxima)"))
}

// ---------------------------------------------------------------------------
// 10: ensembles

fn oracle_vote(preds: &[LabelSet]) -> BTreeSet<ErrorClass> {
    let mut counts: BTreeMap<ErrorClass, usize> = BTreeMap::new();
    for p in preds {
        for c in p.iter() {
            *counts.entry(c).or_default() += 1;
        }
    }
    let max = counts.values().copied().max().unwrap_or(0);
    union_or_no_error(counts.into_iter().filter(|&(_, n)| n == max).map(|(c, _)| c))
}

fn ensembles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut mixed_ties = 0;
    for case in 0..1000 {
        let k = rng.gen_range(1..=6);
        let mut preds: Vec<LabelSet> = (0..k).map(|_| random_labels(&mut rng)).collect();
        let expected = oracle_vote(&preds);
        let sets: Vec<PredictionSet> = preds.iter().cloned().map(PredictionSet::new).collect();
        let got = freq_vote(&sets);
        preds.shuffle(&mut rng);
        let shuffled = freq_vote(&preds.iter().cloned().map(PredictionSet::new).collect::<Vec<_>>());
        if got.labels.as_set() != &expected || shuffled != got {
            return Outcome::Fail(format!("vote case {case}: {:?} vs {expected:?}", got.labels));
        }
        let no_error_votes = preds.iter().filter(|p| p.is_no_error()).count();
        mixed_ties += usize::from(no_error_votes > 0 && !got.labels.is_no_error() && expected.len() < 7);
    }
    // Separable toy sets: class c is exactly what detector `d(c)` says.
    let merge = true;
    for case in 0..100 {
        let detectors = rng.gen_range(1..=4);
        let n = rng.gen_range(4..40);
        let owner: BTreeMap<ErrorClass, usize> =
            ErrorClass::ERRORS.iter().map(|&c| (c, rng.gen_range(0..detectors))).collect();
        let mut rows = Vec::new();
        for _ in 0..n {
            let labels: Vec<LabelSet> = (0..detectors).map(|_| random_labels(&mut rng)).collect();
            let gold = LabelSet::from_detected(
                [ErrorClass::EntE, ErrorClass::PredE, ErrorClass::CirE, ErrorClass::CorefE, ErrorClass::Others]
                    .into_iter()
                    .filter(|c| {
                        let l = dialfact::normalize_labels(&labels[owner[c]], merge);
                        l.contains(*c)
                    }),
            );
            rows.push(TrainingRow { detector_labels: labels, gold });
        }
        let names: Vec<String> = (0..detectors).map(|i| format!("d{i}")).collect();
        let model = logistic_fit(&rows, &names, 3, &LogisticConfig::default(), merge).unwrap();
        for r in &rows {
            let p = model.predict(&r.detector_labels).unwrap();
            if p.labels != r.gold {
                return Outcome::Fail(format!("separable case {case}: {:?} vs {:?}", p.labels, r.gold));
            }
        }
    }
    for case in 0..500 {
        let n = rng.gen_range(1..60);
        let bias = rng.gen_range(0.05..0.95);
        let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(bias)).collect();
        let idx = upsample(&y, case);
        let pos = idx.iter().filter(|&&i| y[i]).count();
        let neg = idx.len() - pos;
        let (p0, n0) = (y.iter().filter(|&&v| v).count(), y.iter().filter(|&&v| !v).count());
        let balanced = if p0 == 0 || n0 == 0 { pos == p0 && neg == n0 } else { pos == neg && pos == p0.max(n0) };
        let all_kept = (0..n).all(|i| idx.contains(&i));
        if !balanced || !all_kept {
            return Outcome::Fail(format!("upsample case {case}: {pos}/{neg} from {p0}/{n0}"));
        }
    }
    Outcome::Pass(format!("1000 vote vectors ({mixed_ties} with NoError votes set aside), 100 separable fits, 500 upsamplings"))
}

// ---------------------------------------------------------------------------
// 11: reproducibility

fn reproducible_crossval() -> Outcome {
    let dir = tmp();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let output = bin()
            .args(["crossval", "--corpus"])
            .arg(fixture("corpus.jsonl"))
            .args(["--k", "5", "--seed", "7", "--ranker", "mock", "--ranker", "overlap", "--provider", "heuristic"])
            .arg("--dae")
            .arg(format!("DAE={}", fixture("dae.jsonl").display()))
            .arg("--qa")
            .arg(format!("QAFactEval={}", fixture("qa.jsonl").display()))
            .args(["--freq-vote", "--logistic", "--out"])
            .arg(&out)
            .env_remove("DIALFACT_REGISTRY")
            .output()
            .expect("binary runs");
        (output, out)
    };
    let (first, a) = run("a.json");
    let (second, b) = run("b.json");
    if !first.status.success() || !second.status.success() {
        return Outcome::Fail(String::from_utf8_lossy(&first.stderr).into_owned());
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let detectors = report["detectors"].as_array().map(Vec::len).unwrap_or(0);
    ensure(
        a == b && first.stdout == second.stdout && detectors == 6,
        format!("{} bytes identical across runs, {detectors} detectors on one split", a.len()),
    )
}

fn main() {
    let started = Instant::now();
    let criteria: [(&str, Check); 11] = [
        ("dataset statistics", released_statistics),
        ("headline ratios", released_ratios),
        ("ranking oracle equivalence", ranker_oracle),
        ("ranking invariants", ranking_invariants),
        ("role mapping table", role_mapping_table),
        ("arc type table", arc_table),
        ("corruption label consistency", corruption_consistency),
        ("metrics oracle", metrics_oracle),
        ("threshold tuning", threshold_landscapes),
        ("ensembles", ensembles),
        ("end-to-end reproducibility", reproducible_crossval),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Outcome::Fail(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {:>2} {name}: {tag} {detail} [{:.1?}]", i + 1, t0.elapsed());
    }
    println!("acceptance finished in {:.1?}", started.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
