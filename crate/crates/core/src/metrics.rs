//! Multi-label F1, fold aggregation and Cohen's kappa.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{normalize_labels, ErrorClass, LabelSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    /// `2TP / (2TP + FP + FN)`, zero when the denominator is zero.
    pub fn f1(self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Evaluated classes in report order.
    pub classes: Vec<ErrorClass>,
    pub per_class_f1: BTreeMap<ErrorClass, f64>,
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Gold occurrences per class.
    pub support: BTreeMap<ErrorClass, usize>,
    pub counts: BTreeMap<ErrorClass, Counts>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{predictions} predictions but {golds} gold label sets")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("no reports to aggregate")]
    Empty,
    #[error("reports disagree on the evaluated class set")]
    InconsistentClasses,
    #[error("kappa needs two equally long, non-empty label sequences ({0} vs {1})")]
    KappaInput(usize, usize),
}

/// Scores `predictions` against `golds`. Both sides are normalized with
/// `merge_linke` first; the micro average pools counts over every evaluated
/// class, NoError included.
pub fn evaluate(predictions: &[LabelSet], golds: &[LabelSet], merge_linke: bool) -> Result<EvalReport, MetricsError> {
    if predictions.len() != golds.len() {
        return Err(MetricsError::LengthMismatch { predictions: predictions.len(), golds: golds.len() });
    }
    let classes = ErrorClass::evaluated(merge_linke);
    let mut counts: BTreeMap<ErrorClass, Counts> = classes.iter().map(|&c| (c, Counts::default())).collect();
    for (p, g) in predictions.iter().zip(golds) {
        let p = normalize_labels(p, merge_linke);
        let g = normalize_labels(g, merge_linke);
        for (&c, k) in counts.iter_mut() {
            match (p.contains(c), g.contains(c)) {
                (true, true) => k.tp += 1,
                (true, false) => k.fp += 1,
                (false, true) => k.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let pooled = counts.values().fold(Counts::default(), |a, k| Counts { tp: a.tp + k.tp, fp: a.fp + k.fp, fn_: a.fn_ + k.fn_ });
    let per_class_f1: BTreeMap<ErrorClass, f64> = counts.iter().map(|(&c, k)| (c, k.f1())).collect();
    let macro_f1 = classes.iter().map(|c| per_class_f1[c]).sum::<f64>() / classes.len() as f64;
    Ok(EvalReport {
        support: counts.iter().map(|(&c, k)| (c, k.tp + k.fn_)).collect(),
        micro_f1: pooled.f1(),
        macro_f1,
        per_class_f1,
        counts,
        classes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub per_class_f1: BTreeMap<ErrorClass, f64>,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub k: usize,
    pub classes: Vec<ErrorClass>,
    pub mean: ScoreSummary,
    /// Population standard deviation across folds.
    pub std: ScoreSummary,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn crossval_aggregate(fold_reports: &[EvalReport]) -> Result<AggregateReport, MetricsError> {
    let first = fold_reports.first().ok_or(MetricsError::Empty)?;
    if fold_reports.iter().any(|r| r.classes != first.classes) {
        return Err(MetricsError::InconsistentClasses);
    }
    let column = |f: &dyn Fn(&EvalReport) -> f64| mean_std(&fold_reports.iter().map(f).collect::<Vec<_>>());
    let mut mean = ScoreSummary { per_class_f1: BTreeMap::new(), micro_f1: 0.0, macro_f1: 0.0 };
    let mut std = mean.clone();
    for &c in &first.classes {
        let (m, s) = column(&|r| r.per_class_f1[&c]);
        mean.per_class_f1.insert(c, m);
        std.per_class_f1.insert(c, s);
    }
    (mean.micro_f1, std.micro_f1) = column(&|r| r.micro_f1);
    (mean.macro_f1, std.macro_f1) = column(&|r| r.macro_f1);
    Ok(AggregateReport { k: fold_reports.len(), classes: first.classes.clone(), mean, std })
}

/// Cohen's kappa between two annotators' category sequences.
pub fn cohens_kappa<T: Ord>(labels_a: &[T], labels_b: &[T]) -> Result<f64, MetricsError> {
    if labels_a.is_empty() || labels_a.len() != labels_b.len() {
        return Err(MetricsError::KappaInput(labels_a.len(), labels_b.len()));
    }
    let n = labels_a.len() as f64;
    let agree = labels_a.iter().zip(labels_b).filter(|(a, b)| a == b).count() as f64;
    let p_o = agree / n;
    let mut marginals: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    for a in labels_a {
        marginals.entry(a).or_default().0 += 1;
    }
    for b in labels_b {
        marginals.entry(b).or_default().1 += 1;
    }
    let p_e: f64 = marginals.values().map(|&(x, y)| (x as f64 / n) * (y as f64 / n)).sum();
    if p_e >= 1.0 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Smallest setting among those attaining the highest score.
pub fn smallest_argmax<T: PartialOrd + Copy>(landscape: &[(T, f64)]) -> Option<T> {
    let best = landscape.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
    landscape
        .iter()
        .filter(|&&(_, s)| s == best)
        .map(|&(v, _)| v)
        .fold(None, |acc: Option<T>, v| match acc {
            Some(a) if a <= v => Some(a),
            _ => Some(v),
        })
}

pub fn column_name(c: ErrorClass) -> &'static str {
    match c {
        ErrorClass::NoError => "NoE",
        other => other.as_str(),
    }
}

/// Aligned text table, one row per model, cells `mean±std`.
pub fn render_table(rows: &[(String, AggregateReport)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(5).max(5) + 2;
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "Model");
    for &c in &first.classes {
        let _ = write!(out, "{:>12}", column_name(c));
    }
    let _ = writeln!(out, "{:>12}{:>12}", "Micro Avg", "Macro Avg");
    for (name, r) in rows {
        let _ = write!(out, "{name:<width$}");
        let cell = |m: f64, s: f64| format!("{m:.2}±{s:.2}");
        for c in &r.classes {
            let _ = write!(out, "{:>12}", cell(r.mean.per_class_f1[c], r.std.per_class_f1[c]));
        }
        let _ = writeln!(out, "{:>12}{:>12}", cell(r.mean.micro_f1, r.std.micro_f1), cell(r.mean.macro_f1, r.std.macro_f1));
    }
    out
}
