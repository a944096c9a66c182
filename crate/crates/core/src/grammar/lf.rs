//! Logical forms: the executable trees the parser produces.
//!
//! A [`LogicalForm`] is a label polarity plus a boolean condition. Conditions
//! are [`Expr`] trees over a closed operator set. The canonical interchange
//! form is the s-expression printed by `Display`, e.g.
//!
//! ```text
//! (lf +1 (contains (between arg_x arg_y) "wed"))
//! ```

use std::fmt;
use std::str::FromStr;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    // logic
    And,
    Or,
    Not,
    Any,
    All,
    None,
    // comparison
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    // case
    Lower,
    Upper,
    Capital,
    AllCaps,
    // string tests
    StartsWith,
    EndsWith,
    Substring,
    // entity tags
    Person,
    Location,
    Date,
    Number,
    Organization,
    // collections
    List,
    Set,
    Tuple,
    Count,
    Contains,
    Intersection,
    Map,
    Filter,
    // distance
    WordDistance,
    CharDistance,
    // position
    Left,
    Right,
    Between,
    Within,
}

/// Operators that can be swapped for one another without changing the
/// shape of the tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Connective,
    Quantifier,
    Negation,
    Comparison,
    Case,
    StringTest,
    EntityTag,
    Collection,
    Count,
    Membership,
    Intersection,
    Functional,
    Distance,
    Side,
    Between,
    Within,
}

impl Op {
    pub const ALL: [Op; 38] = [
        Op::And,
        Op::Or,
        Op::Not,
        Op::Any,
        Op::All,
        Op::None,
        Op::Eq,
        Op::Ne,
        Op::Lt,
        Op::Le,
        Op::Gt,
        Op::Ge,
        Op::Lower,
        Op::Upper,
        Op::Capital,
        Op::AllCaps,
        Op::StartsWith,
        Op::EndsWith,
        Op::Substring,
        Op::Person,
        Op::Location,
        Op::Date,
        Op::Number,
        Op::Organization,
        Op::List,
        Op::Set,
        Op::Tuple,
        Op::Count,
        Op::Contains,
        Op::Intersection,
        Op::Map,
        Op::Filter,
        Op::WordDistance,
        Op::CharDistance,
        Op::Left,
        Op::Right,
        Op::Between,
        Op::Within,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::And => "and",
            Op::Or => "or",
            Op::Not => "not",
            Op::Any => "any",
            Op::All => "all",
            Op::None => "none",
            Op::Eq => "eq",
            Op::Ne => "ne",
            Op::Lt => "lt",
            Op::Le => "le",
            Op::Gt => "gt",
            Op::Ge => "ge",
            Op::Lower => "lower",
            Op::Upper => "upper",
            Op::Capital => "capital",
            Op::AllCaps => "all_caps",
            Op::StartsWith => "starts_with",
            Op::EndsWith => "ends_with",
            Op::Substring => "substring",
            Op::Person => "person",
            Op::Location => "location",
            Op::Date => "date",
            Op::Number => "number",
            Op::Organization => "organization",
            Op::List => "list",
            Op::Set => "set",
            Op::Tuple => "tuple",
            Op::Count => "count",
            Op::Contains => "contains",
            Op::Intersection => "intersection",
            Op::Map => "map",
            Op::Filter => "filter",
            Op::WordDistance => "word_distance",
            Op::CharDistance => "character_distance",
            Op::Left => "left",
            Op::Right => "right",
            Op::Between => "between",
            Op::Within => "within",
        }
    }

    pub fn from_name(name: &str) -> Option<Op> {
        Op::ALL.iter().copied().find(|op| op.name() == name)
    }

    pub fn family(self) -> Family {
        use Op::*;
        match self {
            And | Or => Family::Connective,
            Any | All | None => Family::Quantifier,
            Not => Family::Negation,
            Eq | Ne | Lt | Le | Gt | Ge => Family::Comparison,
            Lower | Upper | Capital | AllCaps => Family::Case,
            StartsWith | EndsWith | Substring => Family::StringTest,
            Person | Location | Date | Number | Organization => Family::EntityTag,
            List | Set | Tuple => Family::Collection,
            Count => Family::Count,
            Contains => Family::Membership,
            Intersection => Family::Intersection,
            Map | Filter => Family::Functional,
            WordDistance | CharDistance => Family::Distance,
            Left | Right => Family::Side,
            Between => Family::Between,
            Within => Family::Within,
        }
    }

    pub fn siblings(self) -> impl Iterator<Item = Op> {
        let family = self.family();
        Op::ALL
            .into_iter()
            .filter(move |op| *op != self && op.family() == family)
    }

    /// Argument order does not affect the result.
    pub fn is_symmetric(self) -> bool {
        matches!(
            self,
            Op::And | Op::Or | Op::Eq | Op::Ne | Op::WordDistance | Op::CharDistance | Op::Between
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Unit {
    Words,
    Chars,
}

impl Unit {
    pub fn name(self) -> &'static str {
        match self {
            Unit::Words => "words",
            Unit::Chars => "chars",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Bool(bool),
    Int(i64),
    Float(OrderedFloat<f64>),
    Str(String),
    ArgX,
    ArgY,
    Sentence,
    Unit(Unit),
    Alias(String),
    /// A predicate with its leading argument left open; applied element-wise
    /// by `map` and `filter`.
    Func(Op, Vec<Expr>),
    Call(Op, Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Bool,
    Int,
    Float,
    Str,
    Span,
    Unit,
    List(Box<Type>),
    Func(Box<Type>),
}

impl Type {
    fn is_text(&self) -> bool {
        matches!(self, Type::Str | Type::Span)
    }

    fn is_num(&self) -> bool {
        matches!(self, Type::Int | Type::Float)
    }

    fn is_collection(&self) -> bool {
        matches!(self, Type::Span | Type::List(_))
    }

    fn is_text_list(&self) -> bool {
        matches!(self, Type::List(e) if e.is_text())
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Bool => f.write_str("bool"),
            Type::Int => f.write_str("int"),
            Type::Float => f.write_str("float"),
            Type::Str => f.write_str("string"),
            Type::Span => f.write_str("span"),
            Type::Unit => f.write_str("unit"),
            Type::List(e) => write!(f, "list<{e}>"),
            Type::Func(r) => write!(f, "fn -> {r}"),
        }
    }
}

impl Expr {
    pub fn call(op: Op, args: Vec<Expr>) -> Expr {
        Expr::Call(op, args)
    }

    pub fn str(s: impl Into<String>) -> Expr {
        Expr::Str(s.into())
    }

    pub fn children(&self) -> &[Expr] {
        match self {
            Expr::Call(_, args) | Expr::Func(_, args) => args,
            _ => &[],
        }
    }

    pub fn children_mut(&mut self) -> &mut [Expr] {
        match self {
            Expr::Call(_, args) | Expr::Func(_, args) => args,
            _ => &mut [],
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(Expr::node_count).sum::<usize>()
    }

    /// Pre-order walk over every node.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn ops(&self) -> Vec<Op> {
        let mut ops = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Call(op, _) | Expr::Func(op, _) = e {
                ops.push(*op);
            }
        });
        ops
    }

    pub fn mentions(&self, op: Op) -> bool {
        self.ops().contains(&op)
    }

    pub fn uses_alias(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Alias(_)));
        found
    }

    pub fn type_of(&self) -> Result<Type> {
        type_of(self)
    }
}

fn type_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Type(msg.into()))
}

fn arity(op: Op, args: &[Expr], min: usize, max: usize) -> Result<()> {
    if args.len() < min || args.len() > max {
        return type_err(format!(
            "`{}` takes {min}..={max} arguments, got {}",
            op.name(),
            args.len()
        ));
    }
    Ok(())
}

fn list_elem(items: &[Type]) -> Result<Type> {
    let first = items[0].clone();
    if items.iter().all(|t| *t == first) {
        return Ok(first);
    }
    if items.iter().all(Type::is_text) {
        return Ok(Type::Str);
    }
    type_err("heterogeneous list")
}

fn collection_elem(t: &Type) -> Type {
    match t {
        Type::List(e) => (**e).clone(),
        _ => Type::Span,
    }
}

/// Type of `op` applied to already-typed arguments.
fn op_type(op: Op, args: &[Expr], types: &[Type]) -> Result<Type> {
    use Op::*;
    let want = |ok: bool, what: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            type_err(format!(
                "`{}` expects {what}, got ({})",
                op.name(),
                types.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
            ))
        }
    };
    match op {
        And | Or => {
            arity(op, args, 2, usize::MAX)?;
            want(types.iter().all(|t| *t == Type::Bool), "booleans")?;
            Ok(Type::Bool)
        }
        Not => {
            arity(op, args, 1, 1)?;
            want(types[0] == Type::Bool, "a boolean")?;
            Ok(Type::Bool)
        }
        Any | All | None => {
            arity(op, args, 1, 1)?;
            want(types[0] == Type::List(Box::new(Type::Bool)), "a list of booleans")?;
            Ok(Type::Bool)
        }
        Eq | Ne => {
            arity(op, args, 2, 2)?;
            want(
                (types[0].is_num() && types[1].is_num())
                    || (types[0].is_text() && types[1].is_text()),
                "two numbers or two strings",
            )?;
            Ok(Type::Bool)
        }
        Lt | Le | Gt | Ge => {
            arity(op, args, 2, 2)?;
            want(types[0].is_num() && types[1].is_num(), "two numbers")?;
            Ok(Type::Bool)
        }
        Lower | Upper | Capital | AllCaps | Person | Location | Date | Number | Organization => {
            arity(op, args, 1, 1)?;
            want(types[0].is_text(), "a string")?;
            Ok(Type::Bool)
        }
        StartsWith | EndsWith | Substring => {
            arity(op, args, 2, 2)?;
            want(types[0].is_text() && types[1].is_text(), "two strings")?;
            Ok(Type::Bool)
        }
        List | Set | Tuple => {
            arity(op, args, 1, usize::MAX)?;
            want(
                types.iter().all(|t| !matches!(t, Type::List(_) | Type::Func(_) | Type::Unit)),
                "scalar items",
            )?;
            Ok(Type::List(Box::new(list_elem(types)?)))
        }
        Count => {
            arity(op, args, 1, 1)?;
            want(types[0].is_collection(), "a span or list")?;
            Ok(Type::Int)
        }
        Contains => {
            arity(op, args, 2, 2)?;
            want(
                (types[0].is_text() || types[0].is_text_list())
                    && (types[1].is_text() || types[1].is_text_list()),
                "a container and a string",
            )?;
            Ok(Type::Bool)
        }
        Intersection => {
            arity(op, args, 2, 2)?;
            want(
                (types[0] == Type::Span || types[0].is_text_list())
                    && (types[1].is_text() || types[1].is_text_list()),
                "two collections",
            )?;
            Ok(Type::List(Box::new(collection_elem(&types[0]))))
        }
        Map | Filter => {
            arity(op, args, 2, 2)?;
            let ret = match &types[0] {
                Type::Func(r) => (**r).clone(),
                _ => return type_err(format!("`{}` expects a function first", op.name())),
            };
            want(
                types[1] == Type::Span || types[1].is_text_list(),
                "a function and a span or list of strings",
            )?;
            if op == Map {
                Ok(Type::List(Box::new(ret)))
            } else {
                want(ret == Type::Bool, "a predicate")?;
                Ok(Type::List(Box::new(collection_elem(&types[1]))))
            }
        }
        WordDistance | CharDistance => {
            arity(op, args, 2, 2)?;
            want(types[0].is_text() && types[1].is_text(), "two strings")?;
            Ok(Type::Int)
        }
        Left | Right | Within => {
            let min = if op == Within { 2 } else { 1 };
            arity(op, args, min, 3)?;
            want(types[0].is_text(), "a string first")?;
            if types.len() > 1 {
                want(types[1] == Type::Int, "an integer window")?;
            }
            if types.len() > 2 {
                want(types[2] == Type::Unit, "a unit")?;
            }
            Ok(Type::Span)
        }
        Between => {
            arity(op, args, 2, 2)?;
            want(types[0].is_text() && types[1].is_text(), "two strings")?;
            Ok(Type::Span)
        }
    }
}

fn type_of(expr: &Expr) -> Result<Type> {
    match expr {
        Expr::Bool(_) => Ok(Type::Bool),
        Expr::Int(_) => Ok(Type::Int),
        Expr::Float(_) => Ok(Type::Float),
        Expr::Str(_) => Ok(Type::Str),
        Expr::ArgX | Expr::ArgY | Expr::Sentence => Ok(Type::Span),
        Expr::Unit(_) => Ok(Type::Unit),
        Expr::Alias(_) => Ok(Type::List(Box::new(Type::Str))),
        Expr::Call(op, args) => {
            let types = args.iter().map(type_of).collect::<Result<Vec<_>>>()?;
            op_type(*op, args, &types)
        }
        Expr::Func(op, bound) => {
            let mut types = vec![Type::Span];
            for b in bound {
                types.push(type_of(b)?);
            }
            let mut args = vec![Expr::ArgX];
            args.extend(bound.iter().cloned());
            let ret = op_type(*op, &args, &types)?;
            Ok(Type::Func(Box::new(ret)))
        }
    }
}

fn is_literal(e: &Expr) -> bool {
    matches!(e, Expr::Bool(_) | Expr::Int(_) | Expr::Float(_) | Expr::Str(_))
}

/// Orders operands by printed form, literals last, so that canonical forms
/// read naturally: `(eq (count arg_x) 2)`.
fn sort_canonical(args: &mut [Expr]) {
    args.sort_by_cached_key(|e| (is_literal(e), e.to_string()));
}

/// Canonical form: symmetric operators get sorted children, nested
/// conjunctions and disjunctions are flattened, double negation is removed.
pub fn normalize_expr(expr: &Expr) -> Expr {
    match expr {
        Expr::Call(op, args) => {
            let mut args: Vec<Expr> = args.iter().map(normalize_expr).collect();
            match op {
                Op::Not => {
                    if let Expr::Call(Op::Not, inner) = &args[0] {
                        return inner[0].clone();
                    }
                    Expr::Call(Op::Not, args)
                }
                Op::And | Op::Or => {
                    let mut flat = Vec::with_capacity(args.len());
                    for a in args {
                        match a {
                            Expr::Call(inner, children) if inner == *op => flat.extend(children),
                            other => flat.push(other),
                        }
                    }
                    sort_canonical(&mut flat);
                    flat.dedup();
                    if flat.len() == 1 {
                        flat.pop().expect("one element")
                    } else {
                        Expr::Call(*op, flat)
                    }
                }
                Op::Any | Op::All | Op::None => {
                    if let Expr::Call(Op::List | Op::Set, items) = &mut args[0] {
                        sort_canonical(items);
                    }
                    Expr::Call(*op, args)
                }
                Op::Set => {
                    sort_canonical(&mut args);
                    args.dedup();
                    Expr::Call(Op::Set, args)
                }
                Op::Left | Op::Right | Op::Within => {
                    // words is the default unit
                    if args.len() == 3 && args[2] == Expr::Unit(Unit::Words) {
                        args.pop();
                    }
                    Expr::Call(*op, args)
                }
                op if op.is_symmetric() => {
                    sort_canonical(&mut args);
                    Expr::Call(*op, args)
                }
                op => Expr::Call(*op, args),
            }
        }
        Expr::Func(op, bound) => Expr::Func(*op, bound.iter().map(normalize_expr).collect()),
        leaf => leaf.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LogicalForm {
    pub polarity: Label,
    pub condition: Expr,
}

impl LogicalForm {
    pub fn new(polarity: Label, condition: Expr) -> Self {
        LogicalForm {
            polarity,
            condition,
        }
    }

    pub fn normalize(&self) -> LogicalForm {
        LogicalForm {
            polarity: self.polarity,
            condition: normalize_expr(&self.condition),
        }
    }

    pub fn type_check(&self) -> Result<()> {
        match self.condition.type_of()? {
            Type::Bool => Ok(()),
            other => type_err(format!("condition has type {other}, expected bool")),
        }
    }

    pub fn node_count(&self) -> usize {
        self.condition.node_count()
    }

    pub fn to_sexpr(&self) -> String {
        self.to_string()
    }

    /// Readable rendering for people, e.g.
    /// `label true if contains(between(X, Y), "wed")`.
    pub fn render(&self) -> String {
        format!("label {} if {}", self.polarity, render_expr(&self.condition))
    }
}

pub fn render_expr(expr: &Expr) -> String {
    match expr {
        Expr::ArgX => "X".into(),
        Expr::ArgY => "Y".into(),
        Expr::Sentence => "the sentence".into(),
        Expr::Alias(name) => format!("<{name} words>"),
        Expr::Call(Op::And, args) => args
            .iter()
            .map(render_expr)
            .map(|s| format!("({s})"))
            .collect::<Vec<_>>()
            .join(" and "),
        Expr::Call(Op::Or, args) => args
            .iter()
            .map(render_expr)
            .map(|s| format!("({s})"))
            .collect::<Vec<_>>()
            .join(" or "),
        Expr::Call(Op::Not, args) => format!("not {}", render_expr(&args[0])),
        Expr::Call(op @ (Op::Eq | Op::Ne | Op::Lt | Op::Le | Op::Gt | Op::Ge), args) => {
            let sym = match op {
                Op::Eq => "=",
                Op::Ne => "≠",
                Op::Lt => "<",
                Op::Le => "≤",
                Op::Gt => ">",
                _ => "≥",
            };
            format!("{} {sym} {}", render_expr(&args[0]), render_expr(&args[1]))
        }
        Expr::Call(op, args) => format!(
            "{}({})",
            op.name(),
            args.iter().map(render_expr).collect::<Vec<_>>().join(", ")
        ),
        Expr::Func(op, bound) => {
            let mut parts = vec!["_".to_string()];
            parts.extend(bound.iter().map(render_expr));
            format!("{}({})", op.name(), parts.join(", "))
        }
        leaf => leaf.to_string(),
    }
}

fn write_str_literal(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    // JSON string escaping doubles as the s-expression string syntax.
    let quoted = serde_json::to_string(s).map_err(|_| fmt::Error)?;
    f.write_str(&quoted)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Float(x) => write!(f, "{:?}", x.0),
            Expr::Str(s) => write_str_literal(f, s),
            Expr::ArgX => f.write_str("arg_x"),
            Expr::ArgY => f.write_str("arg_y"),
            Expr::Sentence => f.write_str("sentence"),
            Expr::Unit(u) => f.write_str(u.name()),
            Expr::Alias(name) => {
                f.write_str("(alias ")?;
                write_str_literal(f, name)?;
                f.write_str(")")
            }
            Expr::Func(op, args) | Expr::Call(op, args) => {
                f.write_str("(")?;
                if matches!(self, Expr::Func(..)) {
                    f.write_str("fn ")?;
                }
                f.write_str(op.name())?;
                for a in args {
                    write!(f, " {a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for LogicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.polarity.is_positive() { "+1" } else { "-1" };
        write!(f, "(lf {sign} {})", self.condition)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String, usize),
    Str(String),
    List(Vec<Sexp>, usize),
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            offset,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Sexp> {
        self.skip_ws();
        let start = self.pos;
        let Some(c) = self.src[self.pos..].chars().next() else {
            return self.err(start, "unexpected end of input");
        };
        match c {
            '(' => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.src[self.pos..].chars().next() {
                        Some(')') => {
                            self.pos += 1;
                            return Ok(Sexp::List(items, start));
                        }
                        None => return self.err(start, "unclosed `(`"),
                        _ => items.push(self.read()?),
                    }
                }
            }
            ')' => self.err(start, "unexpected `)`"),
            '"' => {
                let bytes = self.src.as_bytes();
                let mut i = self.pos + 1;
                while i < bytes.len() {
                    match bytes[i] {
                        b'\\' => i += 2,
                        b'"' => break,
                        _ => i += 1,
                    }
                }
                if i >= bytes.len() {
                    return self.err(start, "unterminated string");
                }
                let lit = &self.src[self.pos..=i];
                self.pos = i + 1;
                let s: String = serde_json::from_str(lit)
                    .map_err(|e| Error::Syntax {
                        offset: start,
                        message: e.to_string(),
                    })?;
                Ok(Sexp::Str(s))
            }
            _ => {
                let rest = &self.src[self.pos..];
                let len = rest
                    .find(|c: char| c.is_whitespace() || c == '(' || c == ')' || c == '"')
                    .unwrap_or(rest.len());
                self.pos += len;
                Ok(Sexp::Atom(rest[..len].to_string(), start))
            }
        }
    }
}

fn expr_from_sexp(s: &Sexp) -> Result<Expr> {
    let syntax = |offset: usize, message: String| Error::Syntax { offset, message };
    match s {
        Sexp::Str(s) => Ok(Expr::Str(s.clone())),
        Sexp::Atom(a, at) => match a.as_str() {
            "true" => Ok(Expr::Bool(true)),
            "false" => Ok(Expr::Bool(false)),
            "arg_x" => Ok(Expr::ArgX),
            "arg_y" => Ok(Expr::ArgY),
            "sentence" => Ok(Expr::Sentence),
            "words" => Ok(Expr::Unit(Unit::Words)),
            "chars" => Ok(Expr::Unit(Unit::Chars)),
            _ => {
                if let Ok(i) = a.parse::<i64>() {
                    Ok(Expr::Int(i))
                } else if let Ok(x) = a.parse::<f64>() {
                    Ok(Expr::Float(OrderedFloat(x)))
                } else {
                    Err(syntax(*at, format!("unknown atom `{a}`")))
                }
            }
        },
        Sexp::List(items, at) => {
            let Some(Sexp::Atom(head, head_at)) = items.first() else {
                return Err(syntax(*at, "expected an operator".into()));
            };
            match head.as_str() {
                "alias" => match items.get(1) {
                    Some(Sexp::Str(name)) if items.len() == 2 => Ok(Expr::Alias(name.clone())),
                    _ => Err(syntax(*at, "alias takes one string".into())),
                },
                "fn" => {
                    let Some(Sexp::Atom(name, name_at)) = items.get(1) else {
                        return Err(syntax(*at, "fn needs an operator".into()));
                    };
                    let op = Op::from_name(name)
                        .ok_or_else(|| syntax(*name_at, format!("unknown operator `{name}`")))?;
                    let args = items[2..].iter().map(expr_from_sexp).collect::<Result<_>>()?;
                    Ok(Expr::Func(op, args))
                }
                name => {
                    let op = Op::from_name(name)
                        .ok_or_else(|| syntax(*head_at, format!("unknown operator `{name}`")))?;
                    let args = items[1..].iter().map(expr_from_sexp).collect::<Result<_>>()?;
                    Ok(Expr::Call(op, args))
                }
            }
        }
    }
}

fn read_one(src: &str) -> Result<Sexp> {
    let mut r = Reader { src, pos: 0 };
    let s = r.read()?;
    r.skip_ws();
    if r.pos != src.len() {
        return r.err(r.pos, "trailing input");
    }
    Ok(s)
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        expr_from_sexp(&read_one(s)?)
    }
}

impl FromStr for LogicalForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let sexp = read_one(s)?;
        let Sexp::List(items, at) = &sexp else {
            return Err(Error::Syntax {
                offset: 0,
                message: "expected (lf <polarity> <condition>)".into(),
            });
        };
        match items.as_slice() {
            [Sexp::Atom(head, _), Sexp::Atom(sign, sign_at), cond] if head == "lf" => {
                let polarity = match sign.as_str() {
                    "+1" | "1" => Label::Positive,
                    "-1" => Label::Negative,
                    _ => {
                        return Err(Error::Syntax {
                            offset: *sign_at,
                            message: format!("bad polarity `{sign}`"),
                        })
                    }
                };
                let lf = LogicalForm::new(polarity, expr_from_sexp(cond)?);
                lf.type_check()?;
                Ok(lf)
            }
            _ => Err(Error::Syntax {
                offset: *at,
                message: "expected (lf <polarity> <condition>)".into(),
            }),
        }
    }
}

impl Serialize for LogicalForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LogicalForm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Expr::*;

    fn c(op: Op, args: Vec<Expr>) -> Expr {
        Expr::Call(op, args)
    }

    fn contains_between(s: &str) -> Expr {
        c(Op::Contains, vec![c(Op::Between, vec![ArgX, ArgY]), Expr::str(s)])
    }

    #[test]
    fn prints_and_parses_sexpr() {
        let lf = LogicalForm::new(Label::Positive, contains_between("his \"wife\""));
        let text = lf.to_string();
        assert_eq!(
            text,
            r#"(lf +1 (contains (between arg_x arg_y) "his \"wife\""))"#
        );
        assert_eq!(text.parse::<LogicalForm>().unwrap(), lf);
    }

    #[test]
    fn parses_functions_aliases_and_units() {
        let src = r#"(lf -1 (and (ge (count (filter (fn capital) (left arg_x 3 words))) 2) (ge (count (intersection (alias "spouse") sentence)) 1)))"#;
        let lf: LogicalForm = src.parse().unwrap();
        assert_eq!(lf.to_string(), src);
        assert!(lf.condition.mentions(Op::Filter));
        assert!(lf.condition.uses_alias());
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match "(lf +1 (and true".parse::<LogicalForm>() {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("{other:?}"),
        }
        assert!("(lf +1 (bogus true))".parse::<LogicalForm>().is_err());
    }

    #[test]
    fn type_checking() {
        assert!(LogicalForm::new(Label::Positive, Bool(true)).type_check().is_ok());
        assert!(LogicalForm::new(Label::Positive, ArgX).type_check().is_err());
        let bad = c(Op::Lt, vec![Expr::str("a"), Int(2)]);
        assert!(bad.type_of().is_err());
        let dist = c(Op::Eq, vec![c(Op::WordDistance, vec![ArgX, ArgY]), Int(2)]);
        assert_eq!(dist.type_of().unwrap(), Type::Bool);
        let any = c(Op::Any, vec![c(Op::List, vec![Bool(true), dist.clone()])]);
        assert_eq!(any.type_of().unwrap(), Type::Bool);
        let map = c(
            Op::Map,
            vec![Expr::Func(Op::StartsWith, vec![ArgX]), ArgY],
        );
        assert_eq!(map.type_of().unwrap(), Type::List(Box::new(Type::Bool)));
        assert!(c(Op::Filter, vec![Expr::Func(Op::Count, vec![]), ArgY]).type_of().is_err());
    }

    #[test]
    fn normalize_commutes_and_cancels() {
        let a = contains_between("a");
        let b = contains_between("b");
        let ab = normalize_expr(&c(Op::And, vec![a.clone(), b.clone()]));
        let ba = normalize_expr(&c(Op::And, vec![b.clone(), a.clone()]));
        assert_eq!(ab, ba);
        let nn = c(Op::Not, vec![c(Op::Not, vec![a.clone()])]);
        assert_eq!(normalize_expr(&nn), a);
        let nested = c(Op::And, vec![a.clone(), c(Op::And, vec![b.clone(), a.clone()])]);
        assert_eq!(normalize_expr(&nested), ab);
    }
}
