//! Bottom-up chart parsing of explanations into logical forms.
//!
//! Cells are filled shortest span first. Within a cell, lexical and
//! compositional rules run over strictly smaller sub-spans, then unary rules
//! are closed to a fixpoint, then the cell is cut down to the beam width.
//! Entries are deduplicated by `(symbol, semantics)`, keeping the derivation
//! that skipped the fewest tokens and then used the fewest rules.

mod tokenize;

use std::collections::HashMap;
use std::sync::Arc;

use ordered_float::OrderedFloat;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Explanation, Label};
use crate::error::Result;
use crate::grammar::{Expr, Grammar, Item, LogicalForm, Sem, SymbolId};

pub use tokenize::{tokenize_explanation, Token};

/// How a chart entry was built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub rule: usize,
    pub start: usize,
    pub end: usize,
    /// Token span covered by each right-hand-side item.
    pub items: Vec<(usize, usize)>,
    /// One child per symbol item, in order.
    pub children: Vec<Arc<Derivation>>,
}

#[derive(Clone, Debug)]
pub struct ChartEntry {
    pub symbol: SymbolId,
    pub sem: Sem,
    pub skipped: usize,
    pub size: usize,
    pub derivation: Arc<Derivation>,
}

impl ChartEntry {
    fn rank(&self) -> (usize, usize) {
        (self.skipped, self.size)
    }
}

#[derive(Default)]
struct Cell {
    entries: Vec<ChartEntry>,
    index: HashMap<(SymbolId, Sem), usize>,
    by_symbol: HashMap<SymbolId, Vec<usize>>,
}

impl Cell {
    /// Adds or improves an entry; returns whether the cell changed.
    fn offer(&mut self, entry: ChartEntry) -> Option<usize> {
        let key = (entry.symbol, entry.sem.clone());
        match self.index.get(&key) {
            Some(&i) => {
                if entry.rank() < self.entries[i].rank() {
                    self.entries[i] = entry;
                    Some(i)
                } else {
                    None
                }
            }
            None => {
                let i = self.entries.len();
                self.by_symbol.entry(entry.symbol).or_default().push(i);
                self.entries.push(entry);
                self.index.insert(key, i);
                Some(i)
            }
        }
    }

    fn prune(&mut self, beam: usize) {
        if self.entries.len() <= beam {
            return;
        }
        self.entries.sort_by(|a, b| {
            (a.skipped, a.size, a.symbol, &a.sem).cmp(&(b.skipped, b.size, b.symbol, &b.sem))
        });
        self.entries.truncate(beam);
        self.index.clear();
        self.by_symbol.clear();
        for (i, e) in self.entries.iter().enumerate() {
            self.index.insert((e.symbol, e.sem.clone()), i);
            self.by_symbol.entry(e.symbol).or_default().push(i);
        }
    }

    fn with_symbol(&self, s: SymbolId) -> &[usize] {
        self.by_symbol.get(&s).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Value passed to a builder by a terminal item, if it matches `token`.
fn terminal_value(grammar: &Grammar, item: &Item, token: &Token) -> Option<Option<Sem>> {
    match (item, token) {
        (Item::Lit(w), Token::Word(t)) if w == t => Some(None),
        (Item::Quoted, Token::Quoted(q)) => Some(Some(Sem::Text(q.clone()))),
        (Item::Digits, Token::Word(t)) => number(t).map(|e| Some(Sem::Expr(e))),
        (Item::Word, Token::Word(t)) if !grammar.is_keyword(t) && number(t).is_none() => {
            Some(Some(Sem::Text(t.clone())))
        }
        _ => None,
    }
}

fn number(t: &str) -> Option<Expr> {
    if !t.starts_with(|c: char| c.is_ascii_digit()) {
        return None;
    }
    if let Ok(i) = t.parse::<i64>() {
        return Some(Expr::Int(i));
    }
    t.parse::<f64>().ok().map(|x| Expr::Float(OrderedFloat(x)))
}

struct Chart<'g> {
    grammar: &'g Grammar,
    tokens: &'g [Token],
    n: usize,
    cells: Vec<Cell>,
    /// Non-start, non-unary rules keyed by their leading literal.
    by_first_literal: HashMap<&'g str, Vec<usize>>,
    /// Non-start, non-unary rules whose first item is not a literal.
    other_rules: Vec<usize>,
    /// Unary rules keyed by their child symbol.
    unary: HashMap<SymbolId, Vec<usize>>,
    start_rules: Vec<usize>,
}

struct Match {
    sems: Vec<Sem>,
    items: Vec<(usize, usize)>,
    children: Vec<Arc<Derivation>>,
    skipped: usize,
    size: usize,
}

impl<'g> Chart<'g> {
    fn new(grammar: &'g Grammar, tokens: &'g [Token]) -> Self {
        let n = tokens.len();
        let mut by_first_literal: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut other_rules = Vec::new();
        let mut unary: HashMap<SymbolId, Vec<usize>> = HashMap::new();
        let mut start_rules = Vec::new();
        for (i, r) in grammar.rules().iter().enumerate() {
            if r.lhs == grammar.start() {
                start_rules.push(i);
            } else if let [Item::Sym(child)] = r.rhs.as_slice() {
                unary.entry(*child).or_default().push(i);
            } else if let Item::Lit(w) = &r.rhs[0] {
                by_first_literal.entry(w.as_str()).or_default().push(i);
            } else {
                other_rules.push(i);
            }
        }
        let mut cells = Vec::with_capacity((n + 1) * (n + 1));
        cells.resize_with((n + 1) * (n + 1), Cell::default);
        Chart {
            grammar,
            tokens,
            n,
            cells,
            by_first_literal,
            other_rules,
            unary,
            start_rules,
        }
    }

    fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * (self.n + 1) + j]
    }

    fn cell_mut(&mut self, i: usize, j: usize) -> &mut Cell {
        let n = self.n;
        &mut self.cells[i * (n + 1) + j]
    }

    /// All ways of matching `rule` over exactly `[i, j)`.
    fn matches(&self, rule: usize, i: usize, j: usize, edge: bool) -> Vec<Match> {
        let mut out = Vec::new();
        let mut acc = Match {
            sems: Vec::new(),
            items: Vec::new(),
            children: Vec::new(),
            skipped: 0,
            size: 1,
        };
        self.extend(rule, 0, i, (i, j), 0, edge, &mut acc, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn extend(
        &self,
        rule: usize,
        k: usize,
        pos: usize,
        span: (usize, usize),
        gaps: usize,
        edge: bool,
        acc: &mut Match,
        out: &mut Vec<Match>,
    ) {
        let rhs = &self.grammar.rules()[rule].rhs;
        let max_skip = self.grammar.max_skip;
        let end = span.1;
        if k == rhs.len() {
            let trailing = end - pos;
            if trailing == 0 || (edge && gaps + trailing <= max_skip) {
                out.push(Match {
                    sems: acc.sems.clone(),
                    items: acc.items.clone(),
                    children: acc.children.clone(),
                    skipped: acc.skipped + gaps + trailing,
                    size: acc.size,
                });
            }
            return;
        }
        let remaining = rhs.len() - k - 1;
        let max_gap = if k == 0 && !edge {
            0
        } else {
            max_skip.saturating_sub(gaps)
        };
        for g in 0..=max_gap {
            let p = pos + g;
            if p + remaining >= end {
                break;
            }
            match &rhs[k] {
                Item::Sym(s) => {
                    for q in p + 1..=end - remaining {
                        if (p, q) == span && !edge {
                            continue;
                        }
                        let cell = self.cell(p, q);
                        for &e in cell.with_symbol(*s) {
                            let entry = &cell.entries[e];
                            acc.sems.push(entry.sem.clone());
                            acc.items.push((p, q));
                            acc.children.push(entry.derivation.clone());
                            acc.skipped += entry.skipped;
                            acc.size += entry.size;
                            self.extend(rule, k + 1, q, span, gaps + g, edge, acc, out);
                            acc.sems.pop();
                            acc.items.pop();
                            acc.children.pop();
                            acc.skipped -= entry.skipped;
                            acc.size -= entry.size;
                        }
                    }
                }
                item => {
                    if let Some(value) = terminal_value(self.grammar, item, &self.tokens[p]) {
                        let pushed = value.is_some();
                        if let Some(v) = value {
                            acc.sems.push(v);
                        }
                        acc.items.push((p, p + 1));
                        self.extend(rule, k + 1, p + 1, span, gaps + g, edge, acc, out);
                        acc.items.pop();
                        if pushed {
                            acc.sems.pop();
                        }
                    }
                }
            }
        }
    }

    fn build(&self, rule: usize, span: (usize, usize), m: Match) -> Option<ChartEntry> {
        let r = &self.grammar.rules()[rule];
        let sem = r.build(&m.sems)?;
        Some(ChartEntry {
            symbol: r.lhs,
            sem,
            skipped: m.skipped,
            size: m.size,
            derivation: Arc::new(Derivation {
                rule,
                start: span.0,
                end: span.1,
                items: m.items,
                children: m.children,
            }),
        })
    }

    fn fill(&mut self, i: usize, j: usize) {
        let mut fresh = Vec::new();
        let first = self.tokens[i].word().and_then(|w| self.by_first_literal.get(w));
        let candidates = first.into_iter().flatten().chain(self.other_rules.iter());
        for &rule in candidates {
            for m in self.matches(rule, i, j, false) {
                if let Some(entry) = self.build(rule, (i, j), m) {
                    fresh.push(entry);
                }
            }
        }
        let mut work = Vec::new();
        for entry in fresh {
            if let Some(idx) = self.cell_mut(i, j).offer(entry) {
                work.push(idx);
            }
        }
        // Unary closure. The default grammar's unary rules form a DAG; the
        // bound guards against cyclic user grammars.
        let mut budget = 100_000usize;
        while let Some(idx) = work.pop() {
            let entry = self.cell(i, j).entries[idx].clone();
            let Some(rules) = self.unary.get(&entry.symbol) else { continue };
            for &rule in rules.clone().iter() {
                let r = &self.grammar.rules()[rule];
                let Some(sem) = r.build(std::slice::from_ref(&entry.sem)) else { continue };
                let parent = ChartEntry {
                    symbol: r.lhs,
                    sem,
                    skipped: entry.skipped,
                    size: entry.size + 1,
                    derivation: Arc::new(Derivation {
                        rule,
                        start: i,
                        end: j,
                        items: vec![(i, j)],
                        children: vec![entry.derivation.clone()],
                    }),
                };
                if let Some(p) = self.cell_mut(i, j).offer(parent) {
                    work.push(p);
                }
                budget = budget.saturating_sub(1);
            }
            if budget == 0 {
                break;
            }
        }
        let beam = self.grammar.beam;
        self.cell_mut(i, j).prune(beam);
    }

    fn run(mut self) -> Vec<ChartEntry> {
        let n = self.n;
        if n == 0 {
            return Vec::new();
        }
        for len in 1..=n {
            for i in 0..=n - len {
                self.fill(i, i + len);
            }
        }
        let mut root = Cell::default();
        for &rule in &self.start_rules {
            for m in self.matches(rule, 0, n, true) {
                if let Some(entry) = self.build(rule, (0, n), m) {
                    root.offer(entry);
                }
            }
        }
        root.entries
    }
}

/// Parses a token sequence and returns every start-symbol entry, one per
/// distinct semantic value, ordered by (skipped, size, semantics).
pub fn parse_tokens(grammar: &Grammar, tokens: &[Token]) -> Vec<ChartEntry> {
    let mut entries = Chart::new(grammar, tokens).run();
    entries.sort_by(|a, b| (a.skipped, a.size, &a.sem).cmp(&(b.skipped, b.size, &b.sem)));
    entries
}

/// A candidate logical form read off a parse.
#[derive(Clone, Debug)]
pub struct ParsedLf {
    pub lf: LogicalForm,
    pub skipped: usize,
    pub size: usize,
    pub derivation: Arc<Derivation>,
}

/// Turns a start-symbol value into a logical form. Statements without an
/// explicit polarity take `default`.
pub fn sem_to_lf(sem: &Sem, default: Label) -> Option<LogicalForm> {
    match sem {
        Sem::Lf(polarity, cond) => Some(LogicalForm::new(polarity.unwrap_or(default), cond.clone())),
        Sem::Expr(cond) => Some(LogicalForm::new(default, cond.clone())),
        _ => None,
    }
}

/// Parses explanation text into distinct, well-typed, normalized logical forms.
pub fn parse_text(grammar: &Grammar, text: &str, label: Label) -> Result<Vec<ParsedLf>> {
    let tokens = tokenize_explanation(text)?;
    Ok(lfs_from_entries(parse_tokens(grammar, &tokens), label))
}

fn lfs_from_entries(entries: Vec<ChartEntry>, label: Label) -> Vec<ParsedLf> {
    let mut best: HashMap<LogicalForm, ParsedLf> = HashMap::new();
    for e in entries {
        let Some(lf) = sem_to_lf(&e.sem, label) else { continue };
        if lf.type_check().is_err() {
            continue;
        }
        let lf = lf.normalize();
        let cand = ParsedLf {
            lf: lf.clone(),
            skipped: e.skipped,
            size: e.size,
            derivation: e.derivation,
        };
        match best.get(&lf) {
            Some(prev) if (prev.skipped, prev.size) <= (cand.skipped, cand.size) => {}
            _ => {
                best.insert(lf, cand);
            }
        }
    }
    let mut out: Vec<ParsedLf> = best.into_values().collect();
    out.sort_by(|a, b| (a.skipped, a.size, &a.lf).cmp(&(b.skipped, b.size, &b.lf)));
    out
}

pub fn parse(grammar: &Grammar, explanation: &Explanation) -> Result<Vec<ParsedLf>> {
    parse_text(grammar, &explanation.text, explanation.label)
}

/// Outcome of parsing one explanation inside a batch.
#[derive(Clone, Debug, Serialize)]
pub struct ParseOutcome {
    pub explanation_id: String,
    #[serde(skip)]
    pub lfs: Vec<ParsedLf>,
    pub candidates: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Parses many explanations in parallel; output order follows input order.
pub fn parse_all(grammar: &Grammar, explanations: &[Explanation]) -> Vec<ParseOutcome> {
    explanations
        .par_iter()
        .map(|e| match parse(grammar, e) {
            Ok(lfs) => ParseOutcome {
                explanation_id: e.id.clone(),
                candidates: lfs.len(),
                lfs,
                error: None,
            },
            Err(err) => ParseOutcome {
                explanation_id: e.id.clone(),
                lfs: Vec::new(),
                candidates: 0,
                error: Some(err.to_string()),
            },
        })
        .collect()
}

/// Re-applies the rules of `derivation` to `tokens` and returns the value it
/// yields, or `None` if the derivation does not fit the tokens or the
/// grammar's skipping limits.
pub fn replay(grammar: &Grammar, tokens: &[Token], derivation: &Derivation) -> Option<Sem> {
    replay_at(grammar, tokens, derivation, true).map(|(sem, _)| sem)
}

fn replay_at(
    grammar: &Grammar,
    tokens: &[Token],
    d: &Derivation,
    root: bool,
) -> Option<(Sem, usize)> {
    let rule = grammar.rules().get(d.rule)?;
    if d.items.len() != rule.rhs.len() || d.end > tokens.len() || d.start >= d.end {
        return None;
    }
    let edge = root && rule.lhs == grammar.start();
    if !root && rule.lhs == grammar.start() {
        return None;
    }
    let mut pos = d.start;
    let mut gaps = 0;
    let mut skipped = 0;
    let mut sems = Vec::new();
    let mut children = d.children.iter();
    for (k, (item, &(s, e))) in rule.rhs.iter().zip(&d.items).enumerate() {
        if s < pos || e <= s || e > d.end {
            return None;
        }
        if s > pos && k == 0 && !edge {
            return None;
        }
        gaps += s - pos;
        match item {
            Item::Sym(sym) => {
                let child = children.next()?;
                if (child.start, child.end) != (s, e) || grammar.rules().get(child.rule)?.lhs != *sym {
                    return None;
                }
                let (sem, sk) = replay_at(grammar, tokens, child, false)?;
                skipped += sk;
                sems.push(sem);
            }
            terminal => {
                if e != s + 1 {
                    return None;
                }
                if let Some(v) = terminal_value(grammar, terminal, &tokens[s])? {
                    sems.push(v);
                }
            }
        }
        pos = e;
    }
    if children.next().is_some() {
        return None;
    }
    if pos < d.end {
        if !edge {
            return None;
        }
        gaps += d.end - pos;
    }
    if gaps > grammar.max_skip {
        return None;
    }
    Some((rule.build(&sems)?, skipped + gaps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AliasSet, ArgNames};
    use crate::grammar::{build_default_grammar, build_grammar};

    fn lfs(text: &str) -> Vec<String> {
        let g = build_default_grammar(&AliasSet::new()).unwrap();
        parse_text(&g, text, Label::Positive)
            .unwrap()
            .into_iter()
            .map(|p| p.lf.to_string())
            .collect()
    }

    fn has(text: &str, want: &str) {
        let got = lfs(text);
        assert!(
            got.iter().any(|s| s == want),
            "{text:?} did not yield {want}; got:\n{}",
            got.join("\n")
        );
    }

    #[test]
    fn right_before_yields_both_readings() {
        let text = "Label true because the word 'his wife' is right before person 2";
        has(text, r#"(lf +1 (contains (left arg_y 2) "his wife"))"#);
        has(text, r#"(lf +1 (contains (right arg_y) "his wife"))"#);
    }

    #[test]
    fn position_and_distance() {
        has("Label true because X is before Y", "(lf +1 (contains (left arg_y) arg_x))");
        has(
            "Label true because X is two words before Y",
            "(lf +1 (and (contains (left arg_y) arg_x) (eq (word_distance arg_x arg_y) 2)))",
        );
        has(
            "Label true because X is within five words of Y",
            "(lf +1 (contains (within arg_y 5) arg_x))",
        );
    }

    #[test]
    fn counts_and_tags() {
        has(
            "Label true because there is one word between X and Y",
            "(lf +1 (eq (count (between arg_x arg_y)) 1))",
        );
        has(
            "Label false because there are three numbers in the sentence",
            "(lf -1 (eq (count (filter (fn number) sentence)) 3))",
        );
        has(
            "Label true because a person is between X and Y",
            "(lf +1 (person (between arg_x arg_y)))",
        );
    }

    #[test]
    fn aliases_and_lists() {
        let mut aliases = AliasSet::new();
        aliases.insert("spouse", ["wife", "husband"]).unwrap();
        let g = build_default_grammar(&aliases).unwrap();
        let got: Vec<String> = parse_text(&g, "Label true because a spouse word is in the sentence", Label::Positive)
            .unwrap()
            .into_iter()
            .map(|p| p.lf.to_string())
            .collect();
        assert!(got.contains(
            &r#"(lf +1 (ge (count (intersection (alias "spouse") sentence)) 1))"#.to_string()
        ));
        has(
            "Label false because the words 'a', 'b', and 'c' do not occur in the sentence",
            r#"(lf -1 (none (list (contains sentence "a") (contains sentence "b") (contains sentence "c"))))"#,
        );
    }

    #[test]
    fn domain_argument_names() {
        let g = build_grammar(&AliasSet::new(), &ArgNames::new(&["chemical"], &["disease"])).unwrap();
        let got: Vec<String> = parse_text(
            &g,
            "Label true because the disease is immediately after the chemical",
            Label::Positive,
        )
        .unwrap()
        .into_iter()
        .map(|p| p.lf.to_string())
        .collect();
        assert!(got.contains(
            &"(lf +1 (and (contains (right arg_x) arg_y) (eq (word_distance arg_x arg_y) 0)))"
                .to_string()
        ), "{got:?}");
    }

    #[test]
    fn derivations_replay_to_their_forms() {
        let g = build_default_grammar(&AliasSet::new()).unwrap();
        let text = "Label true because 'wed' is between X and Y and X is capitalized";
        let tokens = tokenize_explanation(text).unwrap();
        let parsed = parse_text(&g, text, Label::Positive).unwrap();
        assert!(!parsed.is_empty());
        for p in parsed {
            let sem = replay(&g, &tokens, &p.derivation).expect("replays");
            let lf = sem_to_lf(&sem, Label::Positive).unwrap().normalize();
            assert_eq!(lf, p.lf);
        }
    }

    #[test]
    fn unbalanced_quotes_are_errors() {
        let g = build_default_grammar(&AliasSet::new()).unwrap();
        assert!(parse_text(&g, "Label true because 'wed is before Y", Label::Positive).is_err());
    }

    #[test]
    fn empty_input_has_no_parses() {
        assert!(lfs("").is_empty());
    }
}
