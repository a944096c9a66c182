//! Annotation session state: the loaded pool, accepted explanations and the
//! LFs they produce.

use std::collections::{BTreeSet, HashMap};

use babble::corpus::{append_jsonl, Example, Explanation, Label};
use babble::filterbank::{candidates_from_parses, run_filter_bank, Candidate, FilterOptions, Verdict};
use babble::grammar::Grammar;
use babble::lf_exec::{coverage, execute, EvalContext, ExampleSet};
use babble::parser::parse_text;
use babble::pipeline::{Inputs, PipelineConfig};
use serde::{Deserialize, Serialize};

/// Request body for preview and commit.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Draft {
    pub example_id: String,
    pub label: Label,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateView {
    pub id: String,
    pub lf: String,
    pub rendering: String,
    pub skipped: usize,
    pub size: usize,
    /// Filter verdict against the accepted explanations and the pool.
    pub verdict: String,
    /// The candidate that caused a duplicate or dominated verdict.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub of: Option<String>,
    /// Vote on the explanation's own example, for comparison with `label`.
    pub vote_on_example: i8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    /// Fraction of covered pool examples where some accepted LF votes the
    /// other way.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conflict_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preview {
    pub revision: u64,
    pub explanation: Explanation,
    pub candidates: Vec<CandidateView>,
    /// Candidates that survive the filter bank run on this explanation
    /// alone. Commit requires at least one.
    pub survivors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Committed {
    pub revision: u64,
    pub explanation: Explanation,
    pub preview: Preview,
}

#[derive(Debug)]
pub enum SessionError {
    UnknownExample(String),
    EmptyText,
    Rejected(Box<Preview>),
    Pipeline(babble::Error),
}

impl From<babble::Error> for SessionError {
    fn from(e: babble::Error) -> Self {
        SessionError::Pipeline(e)
    }
}

pub struct Session {
    config: PipelineConfig,
    grammar: Grammar,
    inputs: Inputs,
    index: HashMap<String, usize>,
    accepted: Vec<Candidate>,
    /// Pool votes of the LFs that survive the filter bank on the accepted set.
    accepted_rows: Vec<Vec<i8>>,
    revision: u64,
}

impl Session {
    /// Loads the configured files. A missing explanations file is created
    /// empty, since the session appends to it.
    pub fn open(config: PipelineConfig) -> babble::Result<Self> {
        if !config.explanations.exists() {
            babble::corpus::write_jsonl::<Explanation>(&config.explanations, &[])?;
        }
        let inputs = Inputs::load(&config)?;
        let grammar = config.grammar(&inputs.aliases)?;
        let index = inputs.pool.iter().enumerate().map(|(i, e)| (e.id.clone(), i)).collect();
        let mut session = Session {
            config,
            grammar,
            inputs,
            index,
            accepted: Vec::new(),
            accepted_rows: Vec::new(),
            revision: 0,
        };
        for (_, exp) in &session.inputs.labeled {
            let parses = parse_text(&session.grammar, &exp.text, exp.label).unwrap_or_default();
            session.accepted.extend(candidates_from_parses(&exp.id, &parses));
        }
        session.refresh_rows();
        Ok(session)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn bump(&mut self) -> u64 {
        self.revision += 1;
        self.revision
    }

    pub fn pool(&self) -> &[Example] {
        &self.inputs.pool
    }

    pub fn example(&self, id: &str) -> Option<&Example> {
        self.index.get(id).map(|&i| &self.inputs.pool[i])
    }

    pub fn explanations(&self) -> Vec<Explanation> {
        self.inputs.explanations()
    }

    /// Parsed candidates of every accepted explanation, in order.
    pub fn accepted_candidates(&self) -> &[Candidate] {
        &self.accepted
    }

    pub fn labeled(&self) -> &[(Example, Explanation)] {
        &self.inputs.labeled
    }

    pub fn filter_options(&self) -> FilterOptions {
        FilterOptions {
            max_signature_examples: self.config.filter.max_signature_examples,
            seed: self.config.filter_seed(),
        }
    }

    fn refresh_rows(&mut self) {
        if self.accepted.is_empty() {
            self.accepted_rows.clear();
            return;
        }
        let (survivors, _) = self.filter(&self.accepted, &self.inputs.labeled);
        let lfs: Vec<_> = survivors.iter().map(|c| c.lf.clone()).collect();
        self.accepted_rows = ExampleSet::new(&self.inputs.pool, &self.inputs.aliases).label_rows(&lfs);
    }

    fn filter(&self, candidates: &[Candidate], labeled: &[(Example, Explanation)]) -> (Vec<Candidate>, Vec<Verdict>) {
        if !self.config.filter.enabled {
            return (candidates.to_vec(), vec![Verdict::Kept; candidates.len()]);
        }
        let (survivors, report) =
            run_filter_bank(candidates, labeled, &self.inputs.pool, &self.inputs.aliases, &self.filter_options());
        (survivors, report.verdicts.into_iter().map(|v| v.verdict).collect())
    }

    fn next_id(&self) -> String {
        let taken: BTreeSet<&str> = self.inputs.labeled.iter().map(|(_, e)| e.id.as_str()).collect();
        (self.inputs.labeled.len() + 1..)
            .map(|k| format!("x{k}"))
            .find(|id| !taken.contains(id.as_str()))
            .expect("unbounded range")
    }

    /// Parses and filters a draft without changing the session.
    pub fn preview(&self, draft: &Draft) -> Result<Preview, SessionError> {
        let example = self
            .example(&draft.example_id)
            .ok_or_else(|| SessionError::UnknownExample(draft.example_id.clone()))?;
        if draft.text.trim().is_empty() {
            return Err(SessionError::EmptyText);
        }
        let explanation = Explanation {
            id: self.next_id(),
            example_id: draft.example_id.clone(),
            label: draft.label,
            text: draft.text.clone(),
        };
        let (parses, diagnostic) = match parse_text(&self.grammar, &draft.text, draft.label) {
            Ok(p) if p.is_empty() => (p, Some("no parse".to_string())),
            Ok(p) => (p, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        let fresh = candidates_from_parses(&explanation.id, &parses);
        let pair = (example.clone(), explanation.clone());

        let (alone, _) = self.filter(&fresh, std::slice::from_ref(&pair));
        let mut all = self.accepted.clone();
        all.extend(fresh.iter().cloned());
        let mut labeled = self.inputs.labeled.clone();
        labeled.push(pair);
        let (_, verdicts) = self.filter(&all, &labeled);

        let set = ExampleSet::new(&self.inputs.pool, &self.inputs.aliases);
        let ctx = EvalContext::new(example, &self.inputs.aliases);
        let candidates = fresh
            .iter()
            .zip(&verdicts[self.accepted.len()..])
            .map(|(c, verdict)| {
                let of = match verdict {
                    Verdict::RedundantDuplicateOf(id) | Verdict::DominatedBy(id) => Some(id.clone()),
                    _ => None,
                };
                let stats = (*verdict == Verdict::Kept).then(|| {
                    let row = set.labels(&c.lf);
                    (coverage(&row), self.conflict_rate(&row))
                });
                CandidateView {
                    id: c.id.clone(),
                    lf: c.lf.to_sexpr(),
                    rendering: c.lf.render(),
                    skipped: c.skipped,
                    size: c.size,
                    verdict: verdict.name().to_string(),
                    of,
                    vote_on_example: execute(&c.lf, &ctx),
                    coverage: stats.map(|s| s.0),
                    conflict_rate: stats.map(|s| s.1),
                }
            })
            .collect();
        Ok(Preview {
            revision: self.revision,
            explanation,
            candidates,
            survivors: alone.len(),
            diagnostic,
        })
    }

    fn conflict_rate(&self, row: &[i8]) -> f64 {
        let mut covered = 0usize;
        let mut conflicts = 0usize;
        for (j, &v) in row.iter().enumerate() {
            if v == 0 {
                continue;
            }
            covered += 1;
            if self.accepted_rows.iter().any(|r| r[j] == -v) {
                conflicts += 1;
            }
        }
        if covered == 0 {
            0.0
        } else {
            conflicts as f64 / covered as f64
        }
    }

    /// Appends the draft to the explanations file when at least one of its
    /// candidates survives the filter bank on its own.
    pub fn commit(&mut self, draft: &Draft) -> Result<Committed, SessionError> {
        let preview = self.preview(draft)?;
        if preview.survivors == 0 {
            return Err(SessionError::Rejected(Box::new(preview)));
        }
        let explanation = preview.explanation.clone();
        append_jsonl(&self.config.explanations, &explanation)?;
        let example = self.example(&explanation.example_id).expect("checked by preview").clone();
        let parses = parse_text(&self.grammar, &explanation.text, explanation.label).unwrap_or_default();
        self.accepted.extend(candidates_from_parses(&explanation.id, &parses));
        self.inputs.labeled.push((example, explanation.clone()));
        self.refresh_rows();
        let revision = self.bump();
        Ok(Committed {
            revision,
            explanation,
            preview,
        })
    }
}
