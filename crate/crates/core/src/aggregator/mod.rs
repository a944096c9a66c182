//! Generative label model over the votes of several labeling functions.
//!
//! Each LF `i` has a propensity weight `w_lab[i]` (fires at all) and an
//! accuracy weight `w_acc[i]` (agrees with the latent label). The joint model
//! factorizes over columns, and within a column over LFs given the latent
//! label, so the marginal likelihood and its gradient have closed forms.
//! A Gibbs sampler over the same factor graph is provided as well.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AliasSet, Example};
use crate::error::{Error, Result};
use crate::grammar::LogicalForm;
use crate::lf_exec::ExampleSet;
use crate::seed;

/// LF votes on a pool: `rows[i][j]` is LF `i` on example `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    pub lf_ids: Vec<String>,
    pub example_ids: Vec<String>,
    pub rows: Vec<Vec<i8>>,
}

/// One line of the label matrix file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub lf_id: String,
    pub votes: Vec<i8>,
}

impl LabelMatrix {
    /// Wraps raw rows; every row must have the same length.
    pub fn from_rows(rows: Vec<Vec<i8>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("label matrix rows have different lengths"));
        }
        if rows.iter().flatten().any(|v| !(-1..=1).contains(v)) {
            return Err(Error::invalid("label matrix entries must be -1, 0 or +1"));
        }
        Ok(LabelMatrix {
            lf_ids: (0..rows.len()).map(|i| format!("lf{i}")).collect(),
            example_ids: (0..n).map(|j| format!("ex{j}")).collect(),
            rows,
        })
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.example_ids.len()
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.rows[i][j]
    }

    pub fn column(&self, j: usize) -> Vec<i8> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Keeps only the columns listed in `cols`, in that order.
    pub fn select_columns(&self, cols: &[usize]) -> LabelMatrix {
        LabelMatrix {
            lf_ids: self.lf_ids.clone(),
            example_ids: cols.iter().map(|&j| self.example_ids[j].clone()).collect(),
            rows: self.rows.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect(),
        }
    }

    pub fn to_records(&self) -> Vec<LabelRow> {
        self.lf_ids
            .iter()
            .zip(&self.rows)
            .map(|(id, votes)| LabelRow {
                lf_id: id.clone(),
                votes: votes.clone(),
            })
            .collect()
    }

    pub fn from_records(records: Vec<LabelRow>, example_ids: Vec<String>) -> Result<Self> {
        if records.iter().any(|r| r.votes.len() != example_ids.len()) {
            return Err(Error::invalid("label row length differs from the example count"));
        }
        let mut m = LabelMatrix::from_rows(records.iter().map(|r| r.votes.clone()).collect())?;
        m.lf_ids = records.into_iter().map(|r| r.lf_id).collect();
        m.example_ids = example_ids;
        Ok(m)
    }
}

/// Executes every LF on every pool example.
pub fn build_label_matrix(
    lfs: &[(String, LogicalForm)],
    pool: &[Example],
    aliases: &AliasSet,
) -> Result<LabelMatrix> {
    if lfs.is_empty() {
        return Err(Error::invalid("no labeling functions to apply"));
    }
    if pool.is_empty() {
        return Err(Error::invalid("empty pool: nothing to label"));
    }
    let set = ExampleSet::new(pool, aliases);
    let forms: Vec<LogicalForm> = lfs.iter().map(|(_, lf)| lf.clone()).collect();
    Ok(LabelMatrix {
        lf_ids: lfs.iter().map(|(id, _)| id.clone()).collect(),
        example_ids: pool.iter().map(|e| e.id.clone()).collect(),
        rows: set.label_rows(&forms),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerativeWeights {
    pub w_lab: Vec<f64>,
    pub w_acc: Vec<f64>,
}

impl GenerativeWeights {
    pub fn zeros(m: usize) -> Self {
        GenerativeWeights {
            w_lab: vec![0.0; m],
            w_acc: vec![0.0; m],
        }
    }

    pub fn m(&self) -> usize {
        self.w_lab.len()
    }

    fn is_finite(&self) -> bool {
        self.w_lab.iter().chain(&self.w_acc).all(|w| w.is_finite())
    }

    /// Squared distance from (0, `acc_center`), the center of the L2 penalty.
    fn penalty(&self, acc_center: f64) -> f64 {
        self.w_lab.iter().map(|w| w * w).sum::<f64>()
            + self.w_acc.iter().map(|w| (w - acc_center).powi(2)).sum::<f64>()
    }

    fn axpy(&self, step: f64, g: &GenerativeWeights) -> GenerativeWeights {
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + step * y).collect();
        GenerativeWeights {
            w_lab: add(&self.w_lab, &g.w_lab),
            w_acc: add(&self.w_acc, &g.w_acc),
        }
    }
}

/// Per-example probability of the positive class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Marginals(pub Vec<f64>);

impl std::ops::Deref for Marginals {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^l + e^(l+a)): one LF's factor summed over its three outputs.
fn lf_log_partition(l: f64, a: f64) -> f64 {
    log_sum_exp(&[0.0, l, l + a])
}

fn check_dims(w: &GenerativeWeights, lm: &LabelMatrix) -> Result<()> {
    if w.w_lab.len() != lm.m() || w.w_acc.len() != lm.m() {
        return Err(Error::invalid(format!(
            "weights cover {} LFs but the label matrix has {}",
            w.w_lab.len(),
            lm.m()
        )));
    }
    if !w.is_finite() {
        return Err(Error::invalid("generative weights must be finite"));
    }
    Ok(())
}

/// Unnormalized log score of column `j` under latent label `y`.
fn column_score(w: &GenerativeWeights, lm: &LabelMatrix, j: usize, y: i8) -> f64 {
    (0..lm.m())
        .map(|i| {
            let v = lm.get(i, j);
            let mut s = 0.0;
            if v != 0 {
                s += w.w_lab[i];
            }
            if v == y {
                s += w.w_acc[i];
            }
            s
        })
        .sum()
}

/// Logit of the positive class for column `j`; propensity terms cancel.
fn column_logit(w: &GenerativeWeights, lm: &LabelMatrix, j: usize) -> f64 {
    (0..lm.m()).map(|i| w.w_acc[i] * f64::from(lm.get(i, j))).sum()
}

/// log sum over Y of p_w(Λ, Y).
pub fn log_marginal_likelihood(w: &GenerativeWeights, lm: &LabelMatrix) -> Result<f64> {
    check_dims(w, lm)?;
    Ok(lml_unchecked(w, lm, 0..lm.n()))
}

fn lml_unchecked(w: &GenerativeWeights, lm: &LabelMatrix, cols: impl Iterator<Item = usize>) -> f64 {
    let per_column_z = std::f64::consts::LN_2
        + (0..lm.m())
            .map(|i| lf_log_partition(w.w_lab[i], w.w_acc[i]))
            .sum::<f64>();
    let mut total = 0.0;
    for j in cols {
        total += log_sum_exp(&[column_score(w, lm, j, 1), column_score(w, lm, j, -1)]) - per_column_z;
    }
    total
}

/// Gradient of the log marginal likelihood with respect to both weight
/// vectors, summed over `cols`.
fn lml_gradient(w: &GenerativeWeights, lm: &LabelMatrix, cols: &[usize]) -> GenerativeWeights {
    let m = lm.m();
    let mut g = GenerativeWeights::zeros(m);
    for &j in cols {
        let p = sigmoid(column_logit(w, lm, j));
        for i in 0..m {
            match lm.get(i, j) {
                0 => {}
                v => {
                    g.w_lab[i] += 1.0;
                    g.w_acc[i] += if v > 0 { p } else { 1.0 - p };
                }
            }
        }
    }
    let n = cols.len() as f64;
    for i in 0..m {
        let (l, a) = (w.w_lab[i], w.w_acc[i]);
        let lz = lf_log_partition(l, a);
        let fire = (log_sum_exp(&[l, l + a]) - lz).exp();
        let agree = (l + a - lz).exp();
        g.w_lab[i] -= n * fire;
        g.w_acc[i] -= n * agree;
    }
    g
}

/// Exact gradient of [`log_marginal_likelihood`].
pub fn lml_grad(w: &GenerativeWeights, lm: &LabelMatrix) -> Result<GenerativeWeights> {
    check_dims(w, lm)?;
    Ok(lml_gradient(w, lm, &(0..lm.n()).collect::<Vec<_>>()))
}

/// p_w(y_j = +1 | Λ) for every column.
pub fn exact_marginals(w: &GenerativeWeights, lm: &LabelMatrix) -> Result<Marginals> {
    check_dims(w, lm)?;
    Ok(Marginals((0..lm.n()).map(|j| sigmoid(column_logit(w, lm, j))).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    Exact,
    Gibbs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsConfig {
    /// Persistent chains for the free phase.
    pub chains: usize,
    /// Sweeps per chain per epoch.
    pub sweeps: usize,
    /// Sweeps discarded before the first epoch.
    pub burn_in: usize,
    /// Draws of each latent label per epoch in the clamped phase.
    pub clamped_samples: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            chains: 200,
            sweeps: 5,
            burn_in: 50,
            clamped_samples: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregatorConfig {
    pub mode: GradientMode,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// L2 penalty strength. Propensity weights are pulled toward 0 and
    /// accuracy weights toward `init_acc`.
    pub l2: f64,
    /// Minibatch size for stochastic steps; full batch when absent.
    pub batch_size: Option<usize>,
    /// Starting accuracy weight for every LF and center of the accuracy
    /// penalty. Positive values encode that LFs beat random guessing, which
    /// fixes the sign of LFs that only ever vote one way.
    pub init_acc: f64,
    pub gibbs: GibbsConfig,
    /// Samples and burn-in for Gibbs marginals (gibbs mode only).
    pub samples: usize,
    pub burn_in: usize,
}

impl Default for AggregatorConfig {
    fn default() -> Self {
        AggregatorConfig {
            mode: GradientMode::Exact,
            lr: 1.0,
            epochs: 300,
            seed: 0,
            l2: 0.0,
            batch_size: None,
            init_acc: 1.0,
            gibbs: GibbsConfig::default(),
            samples: 20_000,
            burn_in: 1_000,
        }
    }
}

/// Result of fitting the generative model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub weights: GenerativeWeights,
    /// Final training objective: negative log marginal likelihood per
    /// column plus the L2 penalty, evaluated exactly.
    pub objective: f64,
    /// Objective after each epoch (exact mode only).
    pub history: Vec<f64>,
}

/// Negative log marginal likelihood per column plus the L2 penalty of
/// `config`.
pub fn objective(w: &GenerativeWeights, lm: &LabelMatrix, config: &AggregatorConfig) -> Result<f64> {
    check_dims(w, lm)?;
    Ok(batch_objective(w, lm, &(0..lm.n()).collect::<Vec<_>>(), config))
}

fn batch_objective(w: &GenerativeWeights, lm: &LabelMatrix, cols: &[usize], config: &AggregatorConfig) -> f64 {
    -lml_unchecked(w, lm, cols.iter().copied()) / cols.len() as f64 + config.l2 * w.penalty(config.init_acc)
}

/// Descent direction (negative gradient of the objective) for `cols`.
fn descent(w: &GenerativeWeights, lm: &LabelMatrix, cols: &[usize], config: &AggregatorConfig) -> GenerativeWeights {
    let mut g = lml_gradient(w, lm, cols);
    let n = cols.len() as f64;
    for (gv, wv) in g.w_lab.iter_mut().zip(&w.w_lab) {
        *gv = *gv / n - 2.0 * config.l2 * wv;
    }
    for (gv, wv) in g.w_acc.iter_mut().zip(&w.w_acc) {
        *gv = *gv / n - 2.0 * config.l2 * (wv - config.init_acc);
    }
    g
}

/// Fits the weights by minimizing the negative log marginal likelihood.
pub fn fit_generative(lm: &LabelMatrix, config: &AggregatorConfig) -> Result<Fit> {
    if lm.m() == 0 || lm.n() == 0 {
        return Err(Error::invalid("label matrix must have at least one LF and one example"));
    }
    if !(config.lr > 0.0) || config.epochs == 0 {
        return Err(Error::invalid("aggregator lr and epochs must be positive"));
    }
    if config.batch_size == Some(0) {
        return Err(Error::invalid("aggregator batch_size must be positive"));
    }
    let mut w = GenerativeWeights::zeros(lm.m());
    w.w_acc.fill(config.init_acc);
    let (weights, history) = match config.mode {
        GradientMode::Exact => fit_exact(lm, config, w),
        GradientMode::Gibbs => (fit_gibbs(lm, config, w), Vec::new()),
    };
    let objective = objective(&weights, lm, config)?;
    Ok(Fit {
        weights,
        objective,
        history,
    })
}

/// Full-batch steps may grow up to this multiple of the configured rate.
const MAX_STEP_GROWTH: f64 = 1024.0;

fn fit_exact(
    lm: &LabelMatrix,
    config: &AggregatorConfig,
    mut w: GenerativeWeights,
) -> (GenerativeWeights, Vec<f64>) {
    let all: Vec<usize> = (0..lm.n()).collect();
    let mut rng = seed::rng(config.seed);
    let mut lr = config.lr;
    let mut history = Vec::with_capacity(config.epochs);
    let mut order = all.clone();
    for _ in 0..config.epochs {
        let batches: Vec<&[usize]> = match config.batch_size {
            None => vec![&all],
            Some(b) => {
                order.shuffle(&mut rng);
                order.chunks(b).collect()
            }
        };
        for cols in batches {
            let current = batch_objective(&w, lm, cols, config);
            let dir = descent(&w, lm, cols, config);
            let mut step = lr;
            let mut accepted = false;
            for _ in 0..40 {
                let next = w.axpy(step, &dir);
                if batch_objective(&next, lm, cols, config) <= current {
                    w = next;
                    accepted = true;
                    break;
                }
                step /= 2.0;
            }
            if config.batch_size.is_none() {
                // Carry the accepted step forward and let it grow, so flat
                // stretches near the sign-symmetric saddle are crossed quickly.
                lr = if accepted { (step * 2.0).min(config.lr * MAX_STEP_GROWTH) } else { step };
            }
        }
        history.push(batch_objective(&w, lm, &all, config));
    }
    (w, history)
}

/// Draws from the free model: chain state is (votes, latent label).
struct FreeChain {
    votes: Vec<i8>,
    y: i8,
}

fn sample_label(logit: f64, rng: &mut ChaCha8Rng) -> i8 {
    if rng.gen::<f64>() < sigmoid(logit) {
        1
    } else {
        -1
    }
}

impl FreeChain {
    fn sweep(&mut self, w: &GenerativeWeights, rng: &mut ChaCha8Rng) {
        let logit: f64 = self
            .votes
            .iter()
            .zip(&w.w_acc)
            .map(|(&v, a)| a * f64::from(v))
            .sum();
        self.y = sample_label(logit, rng);
        for (i, v) in self.votes.iter_mut().enumerate() {
            let (l, a) = (w.w_lab[i], w.w_acc[i]);
            let lz = lf_log_partition(l, a);
            let p_agree = (l + a - lz).exp();
            let p_disagree = (l - lz).exp();
            let u: f64 = rng.gen();
            *v = if u < p_agree {
                self.y
            } else if u < p_agree + p_disagree {
                -self.y
            } else {
                0
            };
        }
    }
}

fn fit_gibbs(lm: &LabelMatrix, config: &AggregatorConfig, mut w: GenerativeWeights) -> GenerativeWeights {
    let m = lm.m();
    let n = lm.n();
    let gc = &config.gibbs;
    let mut rng = seed::rng(config.seed);
    let mut chains: Vec<FreeChain> = (0..gc.chains.max(1))
        .map(|_| FreeChain {
            votes: vec![0; m],
            y: 1,
        })
        .collect();
    for _ in 0..gc.burn_in {
        for c in &mut chains {
            c.sweep(&w, &mut rng);
        }
    }
    let fired: Vec<f64> = (0..m)
        .map(|i| lm.rows[i].iter().filter(|&&v| v != 0).count() as f64 / n as f64)
        .collect();
    let mut sum = GenerativeWeights::zeros(m);
    let mut averaged = 0usize;
    let start_avg = config.epochs / 2;
    let draws = gc.clamped_samples.max(1);
    for epoch in 0..config.epochs {
        // Clamped phase: sample every latent label given its column.
        let mut agree = vec![0.0; m];
        for j in 0..n {
            let logit = column_logit(&w, lm, j);
            for _ in 0..draws {
                let y = sample_label(logit, &mut rng);
                for (i, a) in agree.iter_mut().enumerate() {
                    if lm.get(i, j) == y {
                        *a += 1.0;
                    }
                }
            }
        }
        // Free phase: persistent chains over (votes, label).
        let mut free_fire = vec![0.0; m];
        let mut free_agree = vec![0.0; m];
        let sweeps = gc.sweeps.max(1);
        for c in &mut chains {
            for _ in 0..sweeps {
                c.sweep(&w, &mut rng);
                for i in 0..m {
                    if c.votes[i] != 0 {
                        free_fire[i] += 1.0;
                    }
                    if c.votes[i] == c.y {
                        free_agree[i] += 1.0;
                    }
                }
            }
        }
        let total = (chains.len() * sweeps) as f64;
        let mut dir = GenerativeWeights::zeros(m);
        for i in 0..m {
            dir.w_lab[i] = fired[i] - free_fire[i] / total - 2.0 * config.l2 * w.w_lab[i];
            dir.w_acc[i] = agree[i] / (n * draws) as f64
                - free_agree[i] / total
                - 2.0 * config.l2 * (w.w_acc[i] - config.init_acc);
        }
        w = w.axpy(config.lr, &dir);
        if epoch >= start_avg {
            sum = sum.axpy(1.0, &w);
            averaged += 1;
        }
    }
    let scale = 1.0 / averaged.max(1) as f64;
    GenerativeWeights {
        w_lab: sum.w_lab.iter().map(|v| v * scale).collect(),
        w_acc: sum.w_acc.iter().map(|v| v * scale).collect(),
    }
}

/// Monte-Carlo estimate of [`exact_marginals`] from a Gibbs chain over the
/// latent labels with the votes clamped.
pub fn gibbs_marginals(
    w: &GenerativeWeights,
    lm: &LabelMatrix,
    samples: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Marginals> {
    check_dims(w, lm)?;
    if samples == 0 {
        return Err(Error::invalid("gibbs samples must be at least 1"));
    }
    let mut rng = seed::rng(seed);
    let logits: Vec<f64> = (0..lm.n()).map(|j| column_logit(w, lm, j)).collect();
    let mut state: Vec<i8> = vec![1; lm.n()];
    let mut positive = vec![0usize; lm.n()];
    for t in 0..burn_in + samples {
        for (j, y) in state.iter_mut().enumerate() {
            *y = sample_label(logits[j], &mut rng);
        }
        if t >= burn_in {
            for (count, &y) in positive.iter_mut().zip(&state) {
                *count += usize::from(y > 0);
            }
        }
    }
    Ok(Marginals(
        positive.into_iter().map(|c| c as f64 / samples as f64).collect(),
    ))
}

/// 1 if more positive than negative votes, 0 if fewer, 0.5 on ties.
pub fn majority_vote(lm: &LabelMatrix) -> Marginals {
    Marginals(
        (0..lm.n())
            .map(|j| {
                let sum: i32 = lm.rows.iter().map(|r| i32::from(r[j])).sum();
                match sum.signum() {
                    1 => 1.0,
                    -1 => 0.0,
                    _ => 0.5,
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests;
