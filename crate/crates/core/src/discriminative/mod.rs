//! Noise-aware logistic regression over windowed n-gram features.
//!
//! Features are lowercased token 1-3 grams from three windows around the
//! entity pair (between the spans, left of the earlier span, right of the
//! later span) plus entity-tag n-grams over the between window. Windows are
//! padded with boundary markers so adjacent spans still produce features.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregator::sigmoid;
use crate::corpus::{Example, Label};
use crate::error::{Error, Result};
use crate::seed;

/// Tokens of context kept on each outer side of the entity pair.
pub const CONTEXT: usize = 3;
pub const MAX_NGRAM: usize = 3;

pub const ENTITY_OPEN: &str = "<e1>";
pub const ENTITY_CLOSE: &str = "<e2>";
pub const SENT_START: &str = "<s>";
pub const SENT_END: &str = "</s>";

/// Binary features, identified by namespaced strings.
pub type FeatureVector = BTreeSet<String>;

fn ngrams(prefix: &str, seq: &[String], out: &mut FeatureVector) {
    for n in 1..=MAX_NGRAM {
        for w in seq.windows(n) {
            out.insert(format!("{prefix}:{}", w.join(" ")));
        }
    }
}

pub fn extract_features(example: &Example) -> FeatureVector {
    let lower = |range: std::ops::Range<usize>| -> Vec<String> {
        example.tokens[range].iter().map(|t| t.to_lowercase()).collect()
    };
    let (first, second) = example.ordered_spans();
    let n = example.tokens.len();
    let mut out = FeatureVector::new();

    let mut between = vec![ENTITY_OPEN.to_string()];
    between.extend(lower(first.end..second.start));
    between.push(ENTITY_CLOSE.to_string());
    ngrams("between", &between, &mut out);

    let left_start = first.start.saturating_sub(CONTEXT);
    let mut left = Vec::new();
    if left_start == 0 {
        left.push(SENT_START.to_string());
    }
    left.extend(lower(left_start..first.start));
    left.push(ENTITY_OPEN.to_string());
    ngrams("left_x", &left, &mut out);

    let right_end = (second.end + CONTEXT).min(n);
    let mut right = vec![ENTITY_CLOSE.to_string()];
    right.extend(lower(second.end..right_end));
    if right_end == n {
        right.push(SENT_END.to_string());
    }
    ngrams("right_y", &right, &mut out);

    let tags: Vec<String> = example.entity_tags[first.end..second.start]
        .iter()
        .map(|t| t.name().to_string())
        .collect();
    ngrams("tags", &tags, &mut out);

    for f in &example.extra_features {
        out.insert(format!("dep:{f}"));
    }
    out
}

pub fn extract_all(examples: &[Example]) -> Vec<FeatureVector> {
    examples.par_iter().map(extract_features).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: BTreeMap<String, f64>,
    pub bias: f64,
    pub threshold: f64,
}

impl LinearModel {
    pub fn zero() -> Self {
        LinearModel {
            weights: BTreeMap::new(),
            bias: 0.0,
            threshold: 0.5,
        }
    }

    pub fn score(&self, features: &FeatureVector) -> f64 {
        self.bias
            + features
                .iter()
                .filter_map(|f| self.weights.get(f))
                .sum::<f64>()
    }
}

/// Probability of the positive class.
pub fn predict(model: &LinearModel, features: &FeatureVector) -> f64 {
    sigmoid(model.score(features))
}

pub fn predict_all(model: &LinearModel, examples: &[Example]) -> Vec<f64> {
    examples
        .par_iter()
        .map(|e| predict(model, &extract_features(e)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Penalty on the squared weight norm (bias excluded), added to the mean
    /// per-example loss.
    pub l2: f64,
    pub seed: u64,
    /// Keep each example whose label leans negative with this probability.
    pub subsample: Option<f64>,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 4.0,
            epochs: 200,
            l2: 1e-4,
            seed: 0,
            subsample: None,
            threshold: 0.5,
        }
    }
}

/// Sparse design matrix over a sorted feature vocabulary.
struct Design {
    vocab: Vec<String>,
    rows: Vec<Vec<usize>>,
}

impl Design {
    fn new(features: &[FeatureVector]) -> Self {
        let vocab: Vec<String> = features
            .iter()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
        let rows = features
            .iter()
            .map(|fv| fv.iter().map(|f| index[f.as_str()]).collect())
            .collect();
        Design { vocab, rows }
    }
}

/// log(1 + e^-m), stable for large |m|.
fn log_loss(margin: f64) -> f64 {
    if margin > 0.0 {
        (-margin).exp().ln_1p()
    } else {
        -margin + margin.exp().ln_1p()
    }
}

/// Expected logistic loss under soft labels: mean over examples of
/// c_j * (p_j * loss(+1, s_j) + (1 - p_j) * loss(-1, s_j)), plus L2.
pub fn noise_aware_objective(
    weights: &[f64],
    bias: f64,
    rows: &[Vec<usize>],
    targets: &[f64],
    example_weights: &[f64],
    l2: f64,
) -> f64 {
    let total: f64 = rows
        .iter()
        .zip(targets)
        .zip(example_weights)
        .map(|((r, &p), &c)| {
            let s = bias + r.iter().map(|&k| weights[k]).sum::<f64>();
            c * (p * log_loss(s) + (1.0 - p) * log_loss(-s))
        })
        .sum();
    total / rows.len() as f64 + l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`noise_aware_objective`]: (weights, bias).
pub fn noise_aware_gradient(
    weights: &[f64],
    bias: f64,
    rows: &[Vec<usize>],
    targets: &[f64],
    example_weights: &[f64],
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = rows.len() as f64;
    let mut g: Vec<f64> = weights.iter().map(|w| 2.0 * l2 * w).collect();
    let mut gb = 0.0;
    for ((r, &p), &c) in rows.iter().zip(targets).zip(example_weights) {
        let s = bias + r.iter().map(|&k| weights[k]).sum::<f64>();
        let d = c * (sigmoid(s) - p) / n;
        gb += d;
        for &k in r {
            g[k] += d;
        }
    }
    (g, gb)
}

/// Result of training, with the objective after each epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct Trained {
    pub model: LinearModel,
    pub history: Vec<f64>,
}

pub fn train_noise_aware(
    features: &[FeatureVector],
    marginals: &[f64],
    config: &TrainConfig,
) -> Result<Trained> {
    if features.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if features.len() != marginals.len() {
        return Err(Error::invalid(format!(
            "{} feature vectors but {} labels",
            features.len(),
            marginals.len()
        )));
    }
    if marginals.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("training labels must lie in [0, 1]"));
    }
    if !(config.lr > 0.0) || config.epochs == 0 {
        return Err(Error::invalid("training lr and epochs must be positive"));
    }
    let mut example_weights = vec![1.0; features.len()];
    if let Some(rate) = config.subsample {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::invalid("subsample rate must lie in [0, 1]"));
        }
        let mut rng = seed::rng(config.seed);
        for (c, &p) in example_weights.iter_mut().zip(marginals) {
            let keep = rng.gen::<f64>() < rate;
            if p < 0.5 && !keep {
                *c = 0.0;
            }
        }
    }
    let design = Design::new(features);
    let mut w = vec![0.0; design.vocab.len()];
    let mut b = 0.0;
    let obj = |w: &[f64], b: f64| {
        noise_aware_objective(w, b, &design.rows, marginals, &example_weights, config.l2)
    };
    let mut current = obj(&w, b);
    let mut lr = config.lr;
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let (g, gb) = noise_aware_gradient(&w, b, &design.rows, marginals, &example_weights, config.l2);
        let mut step = lr;
        for _ in 0..40 {
            let nw: Vec<f64> = w.iter().zip(&g).map(|(x, d)| x - step * d).collect();
            let nb = b - step * gb;
            let next = obj(&nw, nb);
            if next <= current {
                w = nw;
                b = nb;
                current = next;
                break;
            }
            step /= 2.0;
        }
        lr = (step * 2.0).min(config.lr);
        history.push(current);
    }
    let weights = design
        .vocab
        .into_iter()
        .zip(w)
        .filter(|(_, v)| *v != 0.0)
        .collect();
    Ok(Trained {
        model: LinearModel {
            weights,
            bias: b,
            threshold: config.threshold,
        },
        history,
    })
}

/// Positive-class precision, recall and F1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

/// Scores probabilities against gold labels; an example is predicted
/// positive when its probability exceeds `threshold`.
pub fn evaluate(probs: &[f64], examples: &[Example], threshold: f64) -> Result<Metrics> {
    if examples.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty set"));
    }
    if probs.len() != examples.len() {
        return Err(Error::invalid("prediction count differs from example count"));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, e) in probs.iter().zip(examples) {
        let gold = e
            .gold_label
            .ok_or_else(|| Error::invalid(format!("example {} has no gold label", e.id)))?;
        match (*p > threshold, gold == Label::Positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_))
}

pub fn evaluate_model(model: &LinearModel, examples: &[Example]) -> Result<Metrics> {
    evaluate(&predict_all(model, examples), examples, model.threshold)
}

#[cfg(test)]
mod tests;
