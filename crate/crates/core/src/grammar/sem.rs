//! Intermediate semantic values built while parsing.

use crate::corpus::Label;

use super::lf::{Expr, Op, Unit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Conj {
    Single,
    And,
    Or,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn op(self) -> Op {
        match self {
            Side::Left => Op::Left,
            Side::Right => Op::Right,
        }
    }
}

/// A positional phrase such as "between X and Y" or "two words before Y".
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    /// Inside a region.
    In(Expr),
    /// Directly next to an anchor on one side.
    Next(Side, Expr),
    /// A fixed distance from an anchor, optionally on a given side.
    Distance(Option<Side>, Expr, Unit, Expr),
}

/// What a relational sentence talks about.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subject {
    /// Strings or spans, joined by a conjunction.
    Texts(Conj, Vec<Expr>),
    /// "a spouse word"
    Alias(String),
    /// "a person"
    Tag(Op),
    /// "a word containing 'x'"
    WordFn(Expr),
    /// "(X, Y)"
    Group(Op, Vec<Expr>),
}

/// The things counted in "there are two ___ between X and Y".
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Counter {
    Words,
    Chars,
    Matching(Expr),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sem {
    Expr(Expr),
    /// A complete labeling statement; `None` takes the explanation's label.
    Lf(Option<Label>, Expr),
    Label(Label),
    /// Raw token text from a `$QUOTED` or `$WORD` item.
    Text(String),
    Op(Op),
    /// A comparator with its right-hand side, e.g. "more than 2".
    Cmp(Op, Expr),
    Unit(Unit),
    /// A copula or verb; `true` when negated.
    Verb(bool),
    Items(Conj, Vec<Expr>),
    Rel(Rel),
    Subject(Subject),
    Counter(Counter),
    Side(Side),
    Marker,
}

impl Sem {
    pub fn expr(&self) -> Option<&Expr> {
        match self {
            Sem::Expr(e) => Some(e),
            _ => None,
        }
    }

    pub fn into_expr(self) -> Option<Expr> {
        match self {
            Sem::Expr(e) => Some(e),
            _ => None,
        }
    }
}
