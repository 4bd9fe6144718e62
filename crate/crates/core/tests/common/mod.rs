//! Fixtures and independent reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use dialfact::dataset::{load_corpus, Corpus};
use dialfact::lingo::{AnnotatorProvider, FixtureProvider, HeuristicProvider};
use dialfact::ErrorClass;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

pub fn fixture_corpus() -> Corpus {
    load_corpus(&fixture("corpus.jsonl")).expect("fixture corpus loads")
}

/// Hand-built annotations of the running example, heuristic for the rest.
pub fn airport_provider() -> FixtureProvider {
    FixtureProvider::from_path(&fixture("airport_annotations.json"))
        .expect("annotation fixture loads")
        .with_fallback(Box::new(HeuristicProvider::new()))
}

pub fn heuristic() -> HeuristicProvider {
    HeuristicProvider::new()
}

pub fn provider_name(p: &dyn AnnotatorProvider) -> String {
    p.name().to_string()
}

/// The role-to-class procedure transcribed literally, with role labels
/// compared case-insensitively and spans lower-cased before the pronoun
/// lookup.
pub fn algorithm1(span: &str, role: &str) -> ErrorClass {
    let pronouns = [
        "i", "we", "us", "you", "he", "him", "she", "her", "it", "they", "them", "this", "that", "these", "those",
        "myself", "yourself", "himself", "herself", "ourselves", "yourselves", "themselves",
    ];
    let core = ["arg0", "arg1", "arg2", "arg3", "arg4", "arg5"];
    let sr = role.to_lowercase();
    if core.contains(&sr.as_str()) {
        if pronouns.contains(&span.to_lowercase().as_str()) {
            ErrorClass::CorefE
        } else {
            ErrorClass::EntE
        }
    } else if role.to_uppercase().contains("ARGM") {
        ErrorClass::CirE
    } else if sr == "v" {
        ErrorClass::PredE
    } else {
        ErrorClass::Others
    }
}

/// Per-class F1 by enumerating every (sentence, class) pair.
pub fn brute_force_f1(
    preds: &[BTreeSet<ErrorClass>],
    golds: &[BTreeSet<ErrorClass>],
    merge: bool,
) -> (BTreeMap<ErrorClass, f64>, f64, f64) {
    let fold = |s: &BTreeSet<ErrorClass>| -> BTreeSet<ErrorClass> {
        s.iter().map(|&c| if merge && c == ErrorClass::LinkE { ErrorClass::Others } else { c }).collect()
    };
    let classes: Vec<ErrorClass> =
        ErrorClass::ALL.iter().copied().filter(|&c| !(merge && c == ErrorClass::LinkE)).collect();
    let mut per = BTreeMap::new();
    let (mut tp_all, mut fp_all, mut fn_all) = (0usize, 0usize, 0usize);
    for &c in &classes {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (p, g) in preds.iter().zip(golds) {
            let (p, g) = (fold(p), fold(g));
            match (p.contains(&c), g.contains(&c)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        let f1 = if tp + fp + fn_ == 0 { 0.0 } else { 2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fn_ as f64) };
        per.insert(c, f1);
    }
    let macro_f1 = per.values().sum::<f64>() / classes.len() as f64;
    let micro = if tp_all + fp_all + fn_all == 0 {
        0.0
    } else {
        2.0 * tp_all as f64 / (2.0 * tp_all as f64 + fp_all as f64 + fn_all as f64)
    };
    (per, micro, macro_f1)
}

/// Union of flagged classes, `{NoError}` when nothing is flagged.
pub fn union_or_no_error(flagged: impl IntoIterator<Item = ErrorClass>) -> BTreeSet<ErrorClass> {
    let s: BTreeSet<ErrorClass> = flagged.into_iter().filter(|&c| c != ErrorClass::NoError).collect();
    if s.is_empty() {
        BTreeSet::from([ErrorClass::NoError])
    } else {
        s
    }
}

pub fn splice(text: &str, start: usize, end: usize, with: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out: String = chars[..start].iter().collect();
    out.push_str(with);
    out.extend(&chars[end..]);
    out
}
