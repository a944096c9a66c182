//! The filter bank: drops candidate LFs that contradict their own example,
//! that label the whole pool the same way, that duplicate another LF's
//! behaviour, or that are less specific than a sibling from the same
//! explanation.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::corpus::{AliasSet, Example, Explanation, Label};
use crate::grammar::LogicalForm;
use crate::lf_exec::{coverage, execute, EvalContext, ExampleSet};
use crate::parser::ParsedLf;
use crate::seed;

/// Pools larger than this are subsampled for signature comparison.
pub const MAX_SIGNATURE_EXAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub explanation_id: String,
    pub lf: LogicalForm,
    pub skipped: usize,
    pub size: usize,
}

/// Wraps parser output for one explanation; ids are `<explanation>#<k>`.
pub fn candidates_from_parses(explanation_id: &str, parses: &[ParsedLf]) -> Vec<Candidate> {
    parses
        .iter()
        .enumerate()
        .map(|(k, p)| Candidate {
            id: format!("{explanation_id}#{k}"),
            explanation_id: explanation_id.to_string(),
            lf: p.lf.clone(),
            skipped: p.skipped,
            size: p.size,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "of", rename_all = "snake_case")]
pub enum Verdict {
    Kept,
    SemanticFail,
    Constant,
    RedundantDuplicateOf(String),
    DominatedBy(String),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Kept => "kept",
            Verdict::SemanticFail => "semantic_fail",
            Verdict::Constant => "constant",
            Verdict::RedundantDuplicateOf(_) => "duplicate",
            Verdict::DominatedBy(_) => "dominated",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub id: String,
    pub explanation_id: String,
    pub lf: LogicalForm,
    #[serde(flatten)]
    pub verdict: Verdict,
    /// Pool coverage; absent for candidates that failed the semantic filter.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub candidates_in: usize,
    pub discarded_semantic: usize,
    pub discarded_pragmatic: usize,
    pub survivors: usize,
    pub discarded_constant: usize,
    pub discarded_duplicate: usize,
    pub discarded_dominated: usize,
    /// Pool examples the signatures were computed on.
    pub signature_examples: usize,
    pub pool_size: usize,
    pub subsampled: bool,
    pub verdicts: Vec<VerdictEntry>,
}

impl FilterReport {
    pub fn reconciles(&self) -> bool {
        self.candidates_in == self.discarded_semantic + self.discarded_pragmatic + self.survivors
            && self.discarded_pragmatic
                == self.discarded_constant + self.discarded_duplicate + self.discarded_dominated
            && self.verdicts.len() == self.candidates_in
    }

    /// Text table with one row of counts.
    pub fn table(&self) -> String {
        let headers = [
            "Pre-filters LFs",
            "Discarded (semantic)",
            "Discarded (pragmatic)",
            "Post-filters LFs",
        ];
        let values = [
            self.candidates_in,
            self.discarded_semantic,
            self.discarded_pragmatic,
            self.survivors,
        ];
        let mut out = String::new();
        let widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
        for (h, w) in headers.iter().zip(&widths) {
            let _ = write!(out, "| {h:<w$} ");
        }
        out.push_str("|\n");
        for w in &widths {
            let _ = write!(out, "|{}", "-".repeat(w + 2));
        }
        out.push_str("|\n");
        for (v, w) in values.iter().zip(&widths) {
            let _ = write!(out, "| {v:>w$} ");
        }
        out.push_str("|\n");
        out
    }
}

/// Indices of candidates whose output on the explanation's own example
/// equals its label. Abstaining counts as disagreement.
pub fn semantic_filter(candidates: &[LogicalForm], ctx: &EvalContext, label: Label) -> Vec<bool> {
    candidates.iter().map(|lf| execute(lf, ctx) == label.sign()).collect()
}

/// Whether each signature is constant (including empty ones).
pub fn constant_filter(signatures: &[Vec<i8>]) -> Vec<bool> {
    signatures
        .iter()
        .map(|s| s.windows(2).all(|w| w[0] == w[1]))
        .collect()
}

/// For each index in `alive`, the index of its group representative if it
/// is a duplicate. Representatives are the smallest derivation, then the
/// smallest normal form.
pub fn duplicate_filter(
    signatures: &[Vec<i8>],
    sizes: &[usize],
    lfs: &[LogicalForm],
    alive: &[usize],
) -> HashMap<usize, usize> {
    let mut groups: BTreeMap<&[i8], Vec<usize>> = BTreeMap::new();
    for &i in alive {
        groups.entry(&signatures[i]).or_default().push(i);
    }
    let mut dup_of = HashMap::new();
    for members in groups.values() {
        let rep = *members
            .iter()
            .min_by(|&&a, &&b| (sizes[a], &lfs[a], a).cmp(&(sizes[b], &lfs[b], b)))
            .expect("non-empty group");
        for &m in members {
            if m != rep {
                dup_of.insert(m, rep);
            }
        }
    }
    dup_of
}

/// Per group, the winner is the lowest-coverage member, then fewest skipped
/// tokens, then smallest derivation, then smallest normal form. Returns the
/// winner for every loser.
pub fn most_specific(
    groups: &[Vec<usize>],
    coverages: &[f64],
    skipped: &[usize],
    sizes: &[usize],
    lfs: &[LogicalForm],
) -> HashMap<usize, usize> {
    let mut dominated = HashMap::new();
    for members in groups.iter().filter(|g| !g.is_empty()) {
        let best = *members
            .iter()
            .min_by(|&&a, &&b| {
                coverages[a]
                    .total_cmp(&coverages[b])
                    .then((skipped[a], sizes[a], &lfs[a], a).cmp(&(skipped[b], sizes[b], &lfs[b], b)))
            })
            .expect("non-empty group");
        for &m in members {
            if m != best {
                dominated.insert(m, best);
            }
        }
    }
    dominated
}

/// Pool examples used for signatures: all of them, or a seeded subsample.
pub fn signature_pool(pool: &[Example], max: usize, seed: u64) -> (Vec<Example>, bool) {
    if pool.len() <= max {
        return (pool.to_vec(), false);
    }
    let mut rng = seed::rng(seed);
    let mut idx = sample(&mut rng, pool.len(), max).into_vec();
    idx.sort_unstable();
    (idx.into_iter().map(|i| pool[i].clone()).collect(), true)
}

#[derive(Clone, Debug)]
pub struct FilterOptions {
    pub max_signature_examples: usize,
    pub seed: u64,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            max_signature_examples: MAX_SIGNATURE_EXAMPLES,
            seed: 0,
        }
    }
}

/// Applies semantic, constant, duplicate and most-specific filtering in
/// that order. Returns survivors in candidate order.
pub fn run_filter_bank(
    candidates: &[Candidate],
    labeled: &[(Example, Explanation)],
    pool: &[Example],
    aliases: &AliasSet,
    options: &FilterOptions,
) -> (Vec<Candidate>, FilterReport) {
    let n = candidates.len();
    let by_explanation: HashMap<&str, &(Example, Explanation)> =
        labeled.iter().map(|pair| (pair.1.id.as_str(), pair)).collect();
    let lfs: Vec<LogicalForm> = candidates.iter().map(|c| c.lf.clone()).collect();
    let sizes: Vec<usize> = candidates.iter().map(|c| c.size).collect();
    let skipped: Vec<usize> = candidates.iter().map(|c| c.skipped).collect();

    let mut verdicts: Vec<Option<Verdict>> = vec![None; n];
    for (i, c) in candidates.iter().enumerate() {
        let ok = by_explanation.get(c.explanation_id.as_str()).is_some_and(|(ex, exp)| {
            let ctx = EvalContext::new(ex, aliases);
            execute(&c.lf, &ctx) == exp.label.sign()
        });
        if !ok {
            verdicts[i] = Some(Verdict::SemanticFail);
        }
    }
    let passed: Vec<usize> = (0..n).filter(|&i| verdicts[i].is_none()).collect();

    let (sig_pool, subsampled) = signature_pool(pool, options.max_signature_examples, options.seed);
    let set = ExampleSet::new(&sig_pool, aliases);
    let passed_lfs: Vec<LogicalForm> = passed.iter().map(|&i| lfs[i].clone()).collect();
    let rows = set.label_rows(&passed_lfs);
    let mut signatures: Vec<Vec<i8>> = vec![Vec::new(); n];
    let mut coverages = vec![0.0; n];
    for (&i, row) in passed.iter().zip(rows) {
        coverages[i] = coverage(&row);
        signatures[i] = row;
    }

    let constant = constant_filter(&signatures);
    for &i in &passed {
        if constant[i] {
            verdicts[i] = Some(Verdict::Constant);
        }
    }
    let alive: Vec<usize> = passed.iter().copied().filter(|&i| verdicts[i].is_none()).collect();
    for (m, rep) in duplicate_filter(&signatures, &sizes, &lfs, &alive) {
        verdicts[m] = Some(Verdict::RedundantDuplicateOf(candidates[rep].id.clone()));
    }

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for i in (0..n).filter(|&i| verdicts[i].is_none()) {
        groups.entry(candidates[i].explanation_id.as_str()).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    for (m, best) in most_specific(&groups, &coverages, &skipped, &sizes, &lfs) {
        verdicts[m] = Some(Verdict::DominatedBy(candidates[best].id.clone()));
    }

    let mut report = FilterReport {
        candidates_in: n,
        pool_size: pool.len(),
        signature_examples: sig_pool.len(),
        subsampled,
        ..FilterReport::default()
    };
    let mut survivors = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let verdict = verdicts[i].clone().unwrap_or(Verdict::Kept);
        match verdict {
            Verdict::Kept => {
                report.survivors += 1;
                survivors.push(c.clone());
            }
            Verdict::SemanticFail => report.discarded_semantic += 1,
            Verdict::Constant => report.discarded_constant += 1,
            Verdict::RedundantDuplicateOf(_) => report.discarded_duplicate += 1,
            Verdict::DominatedBy(_) => report.discarded_dominated += 1,
        }
        report.verdicts.push(VerdictEntry {
            id: c.id.clone(),
            explanation_id: c.explanation_id.clone(),
            lf: c.lf.clone(),
            coverage: (verdict != Verdict::SemanticFail).then_some(coverages[i]),
            verdict,
        });
    }
    report.discarded_pragmatic =
        report.discarded_constant + report.discarded_duplicate + report.discarded_dominated;
    (survivors, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lf(s: &str) -> LogicalForm {
        s.parse().unwrap()
    }

    #[test]
    fn constant_signatures() {
        let sigs = vec![vec![1; 100], vec![0, 0], vec![1, 0], vec![-1], vec![]];
        assert_eq!(constant_filter(&sigs), vec![true, true, false, true, true]);
    }

    #[test]
    fn duplicates_keep_smallest_derivation() {
        let sigs = vec![vec![1, 0], vec![1, 0], vec![0, 1]];
        let lfs = vec![lf("(lf +1 true)"), lf("(lf +1 false)"), lf("(lf +1 true)")];
        let dup = duplicate_filter(&sigs, &[5, 3, 1], &lfs, &[0, 1, 2]);
        assert_eq!(dup, HashMap::from([(0, 1)]));
        assert!(duplicate_filter(&sigs, &[1, 1, 1], &lfs, &[0, 2]).is_empty());
    }

    #[test]
    fn most_specific_breaks_ties() {
        let lfs = vec![lf("(lf +1 true)"), lf("(lf +1 false)"), lf("(lf +1 true)")];
        let dom = most_specific(&[vec![0, 1, 2]], &[0.9, 0.3, 0.3], &[0, 1, 0], &[1, 1, 1], &lfs);
        assert_eq!(dom, HashMap::from([(0, 2), (1, 2)]));
        assert!(most_specific(&[vec![1]], &[0.9, 0.3, 0.3], &[0; 3], &[1; 3], &lfs).is_empty());
    }

    #[test]
    fn empty_bank() {
        let (kept, report) = run_filter_bank(&[], &[], &[], &AliasSet::new(), &FilterOptions::default());
        assert!(kept.is_empty());
        assert_eq!(report.candidates_in, 0);
        assert!(report.reconciles());
        assert!(report.table().contains("Post-filters LFs"));
    }

    #[test]
    fn subsample_is_seeded_and_sorted() {
        let ex = |i: usize| Example {
            id: format!("p{i}"),
            tokens: vec!["a".into(), "b".into()],
            entity_tags: vec![crate::corpus::EntityTag::None; 2],
            span_x: crate::corpus::TokenSpan::new(0, 1),
            span_y: crate::corpus::TokenSpan::new(1, 2),
            gold_label: None,
            extra_features: Vec::new(),
        };
        let pool: Vec<Example> = (0..50).map(ex).collect();
        let (a, sub) = signature_pool(&pool, 10, 3);
        let (b, _) = signature_pool(&pool, 10, 3);
        assert!(sub);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        let (all, sub) = signature_pool(&pool, 100, 3);
        assert!(!sub);
        assert_eq!(all.len(), 50);
    }
}
