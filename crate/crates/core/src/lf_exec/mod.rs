//! Executing logical forms against examples.
//!
//! Regions (`left`, `right`, `between`, `within`) evaluate to token spans of
//! the example. A string literal used where a position is needed resolves to
//! its occurrence nearest the other argument; a string that does not occur
//! yields [`Value::Missing`], which makes every comparison false.

mod perturb;

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AliasSet, EntityTag, Example, Label, TokenSpan};
use crate::error::{Error, Result};
use crate::grammar::{Expr, LogicalForm, Op, Unit};

pub use perturb::perturb;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Span(usize, usize),
    List(Vec<Value>),
    Func(Op, Vec<Value>),
    Unit(Unit),
    Missing,
}

impl Value {
    fn truthy(&self) -> bool {
        matches!(self, Value::Bool(true))
    }

    fn num(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Span(s, e) => write!(f, "span[{s}, {e})"),
            Value::List(xs) => {
                f.write_str("[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str("]")
            }
            Value::Func(op, _) => write!(f, "<fn {}>", op.name()),
            Value::Unit(u) => f.write_str(u.name()),
            Value::Missing => f.write_str("missing"),
        }
    }
}

/// An example plus the derived data predicates need.
pub struct EvalContext<'a> {
    pub example: &'a Example,
    pub aliases: &'a AliasSet,
    pub x_text: String,
    pub y_text: String,
    lower: Vec<String>,
    /// Character offsets of each token in the space-joined sentence.
    char_start: Vec<usize>,
    char_end: Vec<usize>,
}

impl<'a> EvalContext<'a> {
    pub fn new(example: &'a Example, aliases: &'a AliasSet) -> Self {
        let mut char_start = Vec::with_capacity(example.tokens.len());
        let mut char_end = Vec::with_capacity(example.tokens.len());
        let mut at = 0;
        for t in &example.tokens {
            char_start.push(at);
            at += t.chars().count();
            char_end.push(at);
            at += 1;
        }
        let join = |s: TokenSpan| example.tokens[s.start..s.end].join(" ");
        EvalContext {
            x_text: join(example.span_x),
            y_text: join(example.span_y),
            lower: example.tokens.iter().map(|t| t.to_lowercase()).collect(),
            example,
            aliases,
            char_start,
            char_end,
        }
    }

    fn n(&self) -> usize {
        self.example.tokens.len()
    }

    fn text(&self, v: &Value) -> Option<String> {
        match v {
            Value::Str(s) => Some(s.clone()),
            Value::Span(s, e) => Some(self.example.tokens[*s..*e].join(" ")),
            _ => None,
        }
    }

    /// Lowercased tokens of a text value.
    fn words(&self, v: &Value) -> Option<Vec<String>> {
        match v {
            Value::Str(s) => Some(s.split_whitespace().map(str::to_lowercase).collect()),
            Value::Span(s, e) => Some(self.lower[*s..*e].to_vec()),
            _ => None,
        }
    }

    fn occurrences(&self, words: &[String]) -> Vec<(usize, usize)> {
        if words.is_empty() || words.len() > self.n() {
            return Vec::new();
        }
        (0..=self.n() - words.len())
            .filter(|&i| self.lower[i..i + words.len()] == *words)
            .map(|i| (i, i + words.len()))
            .collect()
    }

    /// Token position of a text value; strings pick the occurrence closest
    /// to `near`.
    fn locate(&self, v: &Value, near: Option<(usize, usize)>) -> Option<(usize, usize)> {
        match v {
            Value::Span(s, e) => Some((*s, *e)),
            Value::Str(_) => {
                let occ = self.occurrences(&self.words(v)?);
                match near {
                    Some(anchor) => occ.into_iter().min_by_key(|o| (gap(*o, anchor), o.0)),
                    None => occ.into_iter().next(),
                }
            }
            _ => None,
        }
    }

    fn locate_pair(&self, a: &Value, b: &Value) -> Option<((usize, usize), (usize, usize))> {
        let a_span = self.locate(a, None).filter(|_| matches!(a, Value::Span(..)));
        let b_span = self.locate(b, None).filter(|_| matches!(b, Value::Span(..)));
        let pa = match a_span {
            Some(p) => p,
            None => self.locate(a, b_span)?,
        };
        let pb = match b_span {
            Some(p) => p,
            None => self.locate(b, Some(pa))?,
        };
        Some((pa, pb))
    }

    /// Characters strictly between two non-overlapping spans.
    fn char_gap(&self, a: (usize, usize), b: (usize, usize)) -> usize {
        let (first, second) = if a.0 <= b.0 { (a, b) } else { (b, a) };
        if first.1 > second.0 || first.1 == first.0 || second.1 == second.0 {
            return 0;
        }
        self.char_start[second.0] - self.char_end[first.1 - 1]
    }

    fn elements(&self, v: &Value) -> Option<Vec<Value>> {
        match v {
            Value::Span(s, e) => Some((*s..*e).map(|i| Value::Span(i, i + 1)).collect()),
            Value::List(xs) => Some(xs.clone()),
            _ => None,
        }
    }

    fn has_tag(&self, v: &Value, tag: EntityTag) -> bool {
        let span = match v {
            Value::Span(s, e) => Some((*s, *e)),
            Value::Str(_) => self.locate(v, None),
            _ => None,
        };
        match span {
            Some((s, e)) => self.example.entity_tags[s..e].contains(&tag),
            None => false,
        }
    }

    /// Whether `item` occurs in `container`.
    fn contains(&self, container: &Value, item: &Value) -> bool {
        match (container, item) {
            (_, Value::List(items)) => {
                !items.is_empty() && items.iter().all(|i| self.contains(container, i))
            }
            (Value::List(xs), _) => xs.iter().any(|x| self.same_text(x, item)),
            (Value::Span(cs, ce), Value::Span(s, e)) => s < e && cs <= s && e <= ce,
            (Value::Span(..) | Value::Str(_), Value::Str(_) | Value::Span(..)) => {
                let (Some(hay), Some(needle)) = (self.words(container), self.words(item)) else {
                    return false;
                };
                !needle.is_empty()
                    && needle.len() <= hay.len()
                    && hay.windows(needle.len()).any(|w| w == needle.as_slice())
            }
            _ => false,
        }
    }

    fn same_text(&self, a: &Value, b: &Value) -> bool {
        match (self.text(a), self.text(b)) {
            (Some(x), Some(y)) => x.to_lowercase() == y.to_lowercase(),
            _ => false,
        }
    }

    fn window(&self, op: Op, args: &[Value]) -> Value {
        let Some((s, e)) = self.locate(&args[0], None) else {
            return Value::Missing;
        };
        let k = match args.get(1) {
            Some(Value::Int(k)) => Some((*k).max(0) as usize),
            Some(_) => return Value::Missing,
            None => None,
        };
        let unit = match args.get(2) {
            Some(Value::Unit(u)) => *u,
            _ => Unit::Words,
        };
        let n = self.n();
        let left_from = |k: usize| match unit {
            Unit::Words => s.saturating_sub(k),
            Unit::Chars => (0..s)
                .find(|&t| self.char_gap((t, t + 1), (s, e)) <= k)
                .unwrap_or(s),
        };
        let right_to = |k: usize| match unit {
            Unit::Words => (e + k).min(n),
            Unit::Chars => (e..n)
                .rev()
                .find(|&t| self.char_gap((s, e), (t, t + 1)) <= k)
                .map_or(e, |t| t + 1),
        };
        match (op, k) {
            (Op::Left, None) => Value::Span(0, s),
            (Op::Left, Some(k)) => Value::Span(left_from(k), s),
            (Op::Right, None) => Value::Span(e, n),
            (Op::Right, Some(k)) => Value::Span(e, right_to(k)),
            (Op::Within, Some(k)) => Value::Span(left_from(k), right_to(k)),
            _ => Value::Missing,
        }
    }

    fn case(&self, op: Op, v: &Value) -> bool {
        let Some(text) = self.text(v) else { return false };
        let alpha: Vec<char> = text.chars().filter(|c| c.is_alphabetic()).collect();
        match op {
            Op::Capital => text.chars().next().is_some_and(char::is_uppercase),
            Op::Lower => !alpha.is_empty() && alpha.iter().all(|c| c.is_lowercase()),
            _ => !alpha.is_empty() && alpha.iter().all(|c| c.is_uppercase()),
        }
    }

    /// Applies `op` to evaluated arguments.
    pub fn apply(&self, op: Op, args: Vec<Value>) -> Value {
        use Op::*;
        let b = Value::Bool;
        match op {
            And => b(args.iter().all(Value::truthy)),
            Or => b(args.iter().any(Value::truthy)),
            Not => b(!args[0].truthy()),
            Any | All | None => match &args[0] {
                Value::List(xs) => {
                    let hits = xs.iter().filter(|x| x.truthy()).count();
                    b(match op {
                        Any => hits > 0,
                        All => hits == xs.len(),
                        _ => hits == 0,
                    })
                }
                _ => b(false),
            },
            Eq | Ne | Lt | Le | Gt | Ge => {
                if let (Some(x), Some(y)) = (args[0].num(), args[1].num()) {
                    return b(match op {
                        Eq => x == y,
                        Ne => x != y,
                        Lt => x < y,
                        Le => x <= y,
                        Gt => x > y,
                        _ => x >= y,
                    });
                }
                match (op, self.text(&args[0]), self.text(&args[1])) {
                    (Eq, Some(x), Some(y)) => b(x.to_lowercase() == y.to_lowercase()),
                    (Ne, Some(x), Some(y)) => b(x.to_lowercase() != y.to_lowercase()),
                    _ => b(false),
                }
            }
            Lower | Upper | Capital | AllCaps => b(self.case(op, &args[0])),
            StartsWith | EndsWith | Substring => {
                let (Some(hay), Some(needle)) = (self.text(&args[0]), self.text(&args[1])) else {
                    return b(false);
                };
                let (hay, needle) = (hay.to_lowercase(), needle.to_lowercase());
                b(!needle.is_empty()
                    && match op {
                        StartsWith => hay.starts_with(&needle),
                        EndsWith => hay.ends_with(&needle),
                        _ => hay.contains(&needle),
                    })
            }
            Person => b(self.has_tag(&args[0], EntityTag::Person)),
            Location => b(self.has_tag(&args[0], EntityTag::Location)),
            Date => b(self.has_tag(&args[0], EntityTag::Date)),
            Number => b(self.has_tag(&args[0], EntityTag::Number)),
            Organization => b(self.has_tag(&args[0], EntityTag::Organization)),
            List | Tuple => Value::List(args),
            Set => {
                let mut out: Vec<Value> = Vec::new();
                for a in args {
                    if !out.contains(&a) {
                        out.push(a);
                    }
                }
                Value::List(out)
            }
            Count => match &args[0] {
                Value::Span(s, e) => Value::Int((e - s) as i64),
                Value::List(xs) => Value::Int(xs.len() as i64),
                _ => Value::Missing,
            },
            Contains => b(self.contains(&args[0], &args[1])),
            Intersection => {
                let Some(xs) = self.elements(&args[0]).or_else(|| match &args[0] {
                    Value::Str(_) => Some(vec![args[0].clone()]),
                    _ => Option::None,
                }) else {
                    return Value::Missing;
                };
                Value::List(xs.into_iter().filter(|x| self.contains(&args[1], x)).collect())
            }
            Map | Filter => {
                let Value::Func(f, bound) = &args[0] else { return Value::Missing };
                let Some(xs) = self.elements(&args[1]) else { return Value::Missing };
                let call = |x: &Value| {
                    let mut a = vec![x.clone()];
                    a.extend(bound.iter().cloned());
                    self.apply(*f, a)
                };
                if op == Map {
                    Value::List(xs.iter().map(call).collect())
                } else {
                    Value::List(xs.into_iter().filter(|x| call(x).truthy()).collect())
                }
            }
            WordDistance | CharDistance => {
                let Some((a, c)) = self.locate_pair(&args[0], &args[1]) else {
                    return Value::Missing;
                };
                Value::Int(if op == WordDistance { gap(a, c) } else { self.char_gap(a, c) } as i64)
            }
            Left | Right | Within => self.window(op, &args),
            Between => {
                let Some((a, c)) = self.locate_pair(&args[0], &args[1]) else {
                    return Value::Missing;
                };
                let (first, second) = if a.0 <= c.0 { (a, c) } else { (c, a) };
                if first.1 <= second.0 {
                    Value::Span(first.1, second.0)
                } else {
                    Value::Span(first.1, first.1)
                }
            }
        }
    }

    pub fn eval(&self, e: &Expr) -> Value {
        self.eval_traced(e, &mut None)
    }

    fn eval_traced(&self, e: &Expr, trace: &mut Option<Vec<TraceStep>>) -> Value {
        let v = match e {
            Expr::Bool(x) => Value::Bool(*x),
            Expr::Int(i) => Value::Int(*i),
            Expr::Float(x) => Value::Float(x.0),
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::ArgX => Value::Span(self.example.span_x.start, self.example.span_x.end),
            Expr::ArgY => Value::Span(self.example.span_y.start, self.example.span_y.end),
            Expr::Sentence => Value::Span(0, self.n()),
            Expr::Unit(u) => Value::Unit(*u),
            Expr::Alias(name) => Value::List(
                self.aliases
                    .get(name)
                    .map(|ws| ws.iter().map(|w| Value::Str(w.clone())).collect())
                    .unwrap_or_default(),
            ),
            Expr::Func(op, bound) => {
                Value::Func(*op, bound.iter().map(|b| self.eval_traced(b, trace)).collect())
            }
            Expr::Call(op, args) => {
                let vals = args.iter().map(|a| self.eval_traced(a, trace)).collect();
                self.apply(*op, vals)
            }
        };
        if let Some(steps) = trace {
            if matches!(e, Expr::Call(..)) {
                steps.push(TraceStep {
                    node: e.to_string(),
                    value: self.describe(&v),
                });
            }
        }
        v
    }

    fn describe(&self, v: &Value) -> String {
        match v {
            Value::Span(s, e) => format!("{v} {:?}", self.example.tokens[*s..*e].join(" ")),
            _ => v.to_string(),
        }
    }
}

/// Tokens strictly between two spans; 0 when adjacent or overlapping.
fn gap(a: (usize, usize), b: (usize, usize)) -> usize {
    if a.1 <= b.0 {
        b.0 - a.1
    } else if b.1 <= a.0 {
        a.0 - b.1
    } else {
        0
    }
}

/// One evaluated node of a condition, innermost first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub node: String,
    pub value: String,
}

/// Runs `lf` on one example: its polarity if the condition holds, else 0.
pub fn execute(lf: &LogicalForm, ctx: &EvalContext) -> i8 {
    if ctx.eval(&lf.condition).truthy() {
        lf.polarity.sign()
    } else {
        0
    }
}

/// Type-checks before running; for hand-written forms.
pub fn execute_checked(lf: &LogicalForm, example: &Example, aliases: &AliasSet) -> Result<i8> {
    lf.type_check()?;
    Ok(execute(lf, &EvalContext::new(example, aliases)))
}

pub fn trace(lf: &LogicalForm, ctx: &EvalContext) -> (i8, Vec<TraceStep>) {
    let mut steps = Some(Vec::new());
    let v = ctx.eval_traced(&lf.condition, &mut steps);
    let label = if v.truthy() { lf.polarity.sign() } else { 0 };
    (label, steps.unwrap_or_default())
}

/// Label vector of an LF over a fixed example ordering.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub lf_id: String,
    pub labels: Vec<i8>,
}

impl Signature {
    pub fn coverage(&self) -> f64 {
        coverage(&self.labels)
    }
}

/// Fraction of non-abstaining entries; 0 for an empty vector.
pub fn coverage(labels: &[i8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().filter(|&&l| l != 0).count() as f64 / labels.len() as f64
}

/// Prepared contexts for repeated execution over the same examples.
pub struct ExampleSet<'a> {
    contexts: Vec<EvalContext<'a>>,
}

impl<'a> ExampleSet<'a> {
    pub fn new(examples: &'a [Example], aliases: &'a AliasSet) -> Self {
        ExampleSet {
            contexts: examples.iter().map(|e| EvalContext::new(e, aliases)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn labels(&self, lf: &LogicalForm) -> Vec<i8> {
        self.contexts.iter().map(|c| execute(lf, c)).collect()
    }

    /// Labels for many LFs, computed in parallel; row `i` belongs to `lfs[i]`.
    pub fn label_rows(&self, lfs: &[LogicalForm]) -> Vec<Vec<i8>> {
        lfs.par_iter().map(|lf| self.labels(lf)).collect()
    }
}

pub fn signature(lf_id: &str, lf: &LogicalForm, examples: &[Example], aliases: &AliasSet) -> Signature {
    Signature {
        lf_id: lf_id.to_string(),
        labels: ExampleSet::new(examples, aliases).labels(lf),
    }
}

/// Checks that `lf` can be executed; used at trust boundaries.
pub fn check(lf: &LogicalForm) -> Result<()> {
    lf.type_check()
        .map_err(|e| Error::Type(format!("{lf}: {e}")))
}

/// String literals appearing anywhere in `lfs`, sorted.
pub fn string_literals<'a>(lfs: impl IntoIterator<Item = &'a LogicalForm>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for lf in lfs {
        lf.condition.walk(&mut |e| {
            if let Expr::Str(s) = e {
                out.insert(s.clone());
            }
        });
    }
    out
}

/// True iff the example's gold label matches what `lf` says about it.
pub fn agrees(lf: &LogicalForm, ctx: &EvalContext, label: Label) -> bool {
    execute(lf, ctx) == label.sign()
}
