//! Detector combination: frequency voting and per-class logistic regression
//! over the base detectors' binary outputs.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil;
use crate::types::{normalize_labels, ErrorClass, LabelSet, PredictionSet};

/// Classes with the highest count across detectors (NoError counted like
/// any other class). Ties are all kept; NoError is dropped from a tie with
/// error classes.
pub fn freq_vote(predictions: &[PredictionSet]) -> PredictionSet {
    let mut counts: BTreeMap<ErrorClass, usize> = BTreeMap::new();
    for p in predictions {
        for c in p.labels.iter() {
            *counts.entry(c).or_default() += 1;
        }
    }
    let max = counts.values().copied().max().unwrap_or(0);
    let winners = counts.into_iter().filter(|&(_, n)| n == max && max > 0).map(|(c, _)| c);
    PredictionSet::from_detected(winners.filter(|c| c.is_error()).collect::<Vec<_>>())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("expected {expected} features, got {got}")]
    FeatureLength { expected: usize, got: usize },
    #[error("empty training set")]
    EmptyTraining,
    #[error("model file: {0}")]
    ModelFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { l2: 1e-4, max_iter: 100, tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub class: ErrorClass,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Set when the training data could not support a fit (no positives,
    /// no negatives, or constant features); the model then always answers
    /// this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<bool>,
}

impl ClassModel {
    pub fn probability(&self, features: &[f64]) -> f64 {
        sigmoid(self.bias + self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>())
    }

    pub fn predict(&self, features: &[f64]) -> bool {
        match self.constant {
            Some(v) => v,
            None => self.probability(features) >= 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticEnsemble {
    pub detector_order: Vec<String>,
    pub merge_linke: bool,
    pub models: Vec<ClassModel>,
}

/// One training row: each base detector's labels, then the gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub detector_labels: Vec<LabelSet>,
    pub gold: LabelSet,
}

/// Error classes that get a model.
pub fn ensemble_classes(merge_linke: bool) -> Vec<ErrorClass> {
    ErrorClass::evaluated(merge_linke).into_iter().filter(|c| c.is_error()).collect()
}

/// One binary feature per detector: 1 when it predicts `class`.
pub fn class_features(detector_labels: &[LabelSet], class: ErrorClass, merge_linke: bool) -> Vec<f64> {
    detector_labels
        .iter()
        .map(|l| if normalize_labels(l, merge_linke).contains(class) { 1.0 } else { 0.0 })
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Indices after upsampling the minority label to the majority count: the
/// minority rows are repeated whole as often as fits, and the remainder is
/// a seeded sample without replacement, so every distinct row survives.
pub fn upsample(labels: &[bool], seed: u64) -> Vec<usize> {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    let (minority, majority) = if pos.len() < neg.len() { (pos, neg) } else { (neg, pos) };
    let mut out = majority.clone();
    if minority.is_empty() {
        return out;
    }
    let reps = majority.len() / minority.len();
    let rest = majority.len() % minority.len();
    for _ in 0..reps {
        out.extend(&minority);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extra: Vec<usize> = sample(&mut rng, minority.len(), rest).into_iter().map(|i| minority[i]).collect();
    extra.sort_unstable();
    out.extend(extra);
    out.sort_unstable();
    out
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Penalized maximum likelihood by Newton's method. Returns (weights, bias).
fn fit_binary(x: &[Vec<f64>], y: &[bool], config: &LogisticConfig) -> (Vec<f64>, f64) {
    let d = x.first().map_or(0, Vec::len);
    // theta = [bias, w_1..w_d]
    let mut theta = vec![0.0; d + 1];
    for _ in 0..config.max_iter {
        let mut grad = vec![0.0; d + 1];
        let mut hess = vec![vec![0.0; d + 1]; d + 1];
        for (xi, &yi) in x.iter().zip(y) {
            let z = theta[0] + (0..d).map(|k| theta[k + 1] * xi[k]).sum::<f64>();
            let p = sigmoid(z);
            let r = p - if yi { 1.0 } else { 0.0 };
            let w = (p * (1.0 - p)).max(1e-12);
            let row: Vec<f64> = std::iter::once(1.0).chain(xi.iter().copied()).collect();
            for a in 0..=d {
                grad[a] += r * row[a];
                for b in 0..=d {
                    hess[a][b] += w * row[a] * row[b];
                }
            }
        }
        for k in 1..=d {
            grad[k] += config.l2 * theta[k];
            hess[k][k] += config.l2;
        }
        hess[0][0] += 1e-9;
        let Some(step) = solve(hess, grad) else { break };
        let mut change = 0.0f64;
        for k in 0..=d {
            theta[k] -= step[k];
            change = change.max(step[k].abs());
        }
        if change < config.tolerance {
            break;
        }
    }
    (theta[1..].to_vec(), theta[0])
}

/// Trains one model per error class on upsampled data.
pub fn logistic_fit(
    train: &[TrainingRow],
    detector_order: &[String],
    seed: u64,
    config: &LogisticConfig,
    merge_linke: bool,
) -> Result<LogisticEnsemble, EnsembleError> {
    if train.is_empty() {
        return Err(EnsembleError::EmptyTraining);
    }
    let d = detector_order.len();
    for row in train {
        if row.detector_labels.len() != d {
            return Err(EnsembleError::FeatureLength { expected: d, got: row.detector_labels.len() });
        }
    }
    let mut models = Vec::new();
    for (ci, class) in ensemble_classes(merge_linke).into_iter().enumerate() {
        let x: Vec<Vec<f64>> = train.iter().map(|r| class_features(&r.detector_labels, class, merge_linke)).collect();
        let y: Vec<bool> = train.iter().map(|r| normalize_labels(&r.gold, merge_linke).contains(class)).collect();
        let positives = y.iter().filter(|&&v| v).count();
        let negatives = y.len() - positives;
        let constant_features = x.iter().all(|r| r == &x[0]);
        let base_rate_bias = ((positives as f64 + 0.5) / (negatives as f64 + 0.5)).ln();
        if positives == 0 || negatives == 0 || constant_features {
            models.push(ClassModel {
                class,
                weights: vec![0.0; d],
                bias: base_rate_bias,
                constant: Some(positives > negatives),
            });
            continue;
        }
        let idx = upsample(&y, seed.wrapping_add(ci as u64));
        let xs: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
        let ys: Vec<bool> = idx.iter().map(|&i| y[i]).collect();
        let (weights, bias) = fit_binary(&xs, &ys, config);
        models.push(ClassModel { class, weights, bias, constant: None });
    }
    Ok(LogisticEnsemble { detector_order: detector_order.to_vec(), merge_linke, models })
}

impl LogisticEnsemble {
    /// Union of the positive classes given each detector's labels.
    pub fn predict(&self, detector_labels: &[LabelSet]) -> Result<PredictionSet, EnsembleError> {
        if detector_labels.len() != self.detector_order.len() {
            return Err(EnsembleError::FeatureLength { expected: self.detector_order.len(), got: detector_labels.len() });
        }
        let features: BTreeMap<ErrorClass, Vec<f64>> = self
            .models
            .iter()
            .map(|m| (m.class, class_features(detector_labels, m.class, self.merge_linke)))
            .collect();
        logistic_predict(self, &features)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, EnsembleError> {
        let m: LogisticEnsemble = serde_json::from_str(s).map_err(|e| EnsembleError::ModelFile(e.to_string()))?;
        if let Some(bad) = m.models.iter().find(|c| c.weights.len() != m.detector_order.len()) {
            return Err(EnsembleError::ModelFile(format!("{} model has {} weights", bad.class, bad.weights.len())));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fsutil::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, EnsembleError> {
        let s = std::fs::read_to_string(path).map_err(|e| EnsembleError::ModelFile(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}

/// Per-class prediction from explicit feature vectors.
pub fn logistic_predict(
    model: &LogisticEnsemble,
    features_per_class: &BTreeMap<ErrorClass, Vec<f64>>,
) -> Result<PredictionSet, EnsembleError> {
    let mut positive = Vec::new();
    for m in &model.models {
        let x = features_per_class.get(&m.class).map(Vec::as_slice).unwrap_or(&[]);
        if x.len() != m.weights.len() {
            return Err(EnsembleError::FeatureLength { expected: m.weights.len(), got: x.len() });
        }
        if m.predict(x) {
            positive.push(m.class);
        }
    }
    Ok(PredictionSet::from_detected(positive))
}
