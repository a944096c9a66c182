//! Grammar rules, semantic values and the logical-form AST.
//!
//! A rule `LHS -> item…` rewrites a sequence of items into one symbol. Items
//! are literal tokens, symbols, or one of three token classes (`$QUOTED`,
//! `$DIGITS`, `$WORD`). Symbol items pass their semantic value to the
//! rule's builder, token classes pass the token text; literals pass nothing.
//!
//! Token skipping: a rule application may leave up to `max_skip` tokens
//! unmatched in the gaps between its items. Only applications of the start
//! symbol may also skip tokens before the first and after the last item.

mod default;
pub mod lf;
mod sem;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

pub use default::{build_default_grammar, build_grammar};
pub use lf::{normalize_expr, Expr, LogicalForm, Op, Type, Unit};
pub use sem::{Conj, Rel, Sem, Side, Subject};

use crate::corpus::{AliasSet, ArgNames};

pub const DEFAULT_MAX_SKIP: usize = 2;
pub const DEFAULT_BEAM: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId(pub u16);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Item {
    Lit(String),
    Sym(SymbolId),
    /// A quoted string token.
    Quoted,
    /// An integer or decimal token.
    Digits,
    /// Any unquoted, non-numeric token that is not a grammar keyword.
    Word,
}

impl Item {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Item::Sym(_))
    }

    pub fn passes_value(&self) -> bool {
        !matches!(self, Item::Lit(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    Lexical,
    Unary,
    Compositional,
}

pub type Builder = Arc<dyn Fn(&[Sem]) -> Option<Sem> + Send + Sync>;

#[derive(Clone)]
pub struct Rule {
    pub lhs: SymbolId,
    pub rhs: Vec<Item>,
    pub builder: Builder,
    /// Operators this rule's builder may introduce; used for coverage scans.
    pub emits: Vec<Op>,
}

impl Rule {
    pub fn kind(&self) -> RuleKind {
        if self.rhs.iter().all(Item::is_terminal) {
            RuleKind::Lexical
        } else if self.rhs.len() == 1 {
            RuleKind::Unary
        } else {
            RuleKind::Compositional
        }
    }

    pub fn build(&self, children: &[Sem]) -> Option<Sem> {
        (self.builder)(children)
    }
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Rule")
            .field("lhs", &self.lhs)
            .field("rhs", &self.rhs)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub struct Grammar {
    symbols: Vec<String>,
    rules: Vec<Rule>,
    start: SymbolId,
    keywords: HashSet<String>,
    pub aliases: AliasSet,
    pub arg_names: ArgNames,
    pub max_skip: usize,
    pub beam: usize,
}

impl Grammar {
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn start(&self) -> SymbolId {
        self.start
    }

    pub fn symbol(&self, name: &str) -> Option<SymbolId> {
        self.symbols
            .iter()
            .position(|s| s == name)
            .map(|i| SymbolId(i as u16))
    }

    pub fn symbol_name(&self, id: SymbolId) -> &str {
        &self.symbols[id.0 as usize]
    }

    pub fn symbol_count(&self) -> usize {
        self.symbols.len()
    }

    /// Whether `token` appears as a literal in some rule.
    pub fn is_keyword(&self, token: &str) -> bool {
        self.keywords.contains(token)
    }

    pub fn with_caps(mut self, max_skip: usize, beam: usize) -> Self {
        self.max_skip = max_skip;
        self.beam = beam.max(1);
        self
    }

    /// One rule per line, `LHS -> rhs…`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            out.push_str(self.symbol_name(r.lhs));
            out.push_str(" ->");
            for item in &r.rhs {
                out.push(' ');
                match item {
                    Item::Lit(w) => out.push_str(w),
                    Item::Sym(s) => {
                        out.push('$');
                        out.push_str(self.symbol_name(*s));
                    }
                    Item::Quoted => out.push_str("$QUOTED"),
                    Item::Digits => out.push_str("$DIGITS"),
                    Item::Word => out.push_str("$WORD"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Symbols reachable from the start symbol through rule right-hand sides.
    pub fn reachable_symbols(&self) -> BTreeSet<SymbolId> {
        let mut seen = BTreeSet::from([self.start]);
        let mut stack = vec![self.start];
        while let Some(s) = stack.pop() {
            for r in self.rules.iter().filter(|r| r.lhs == s) {
                for item in &r.rhs {
                    if let Item::Sym(c) = item {
                        if seen.insert(*c) {
                            stack.push(*c);
                        }
                    }
                }
            }
        }
        seen
    }

    /// Operators emitted by rules whose left-hand side is reachable.
    pub fn reachable_ops(&self) -> BTreeSet<Op> {
        let reachable = self.reachable_symbols();
        self.rules
            .iter()
            .filter(|r| reachable.contains(&r.lhs))
            .flat_map(|r| r.emits.iter().copied())
            .collect()
    }
}

/// Incrementally assembles a [`Grammar`].
///
/// Right-hand sides are written as space-separated items: `$NAME` for a
/// symbol, `$QUOTED`, `$DIGITS` or `$WORD` for token classes, anything else
/// is a literal token.
pub struct GrammarBuilder {
    symbols: Vec<String>,
    index: HashMap<String, SymbolId>,
    rules: Vec<Rule>,
    start: SymbolId,
}

impl GrammarBuilder {
    pub fn new(start: &str) -> Self {
        let mut b = GrammarBuilder {
            symbols: Vec::new(),
            index: HashMap::new(),
            rules: Vec::new(),
            start: SymbolId(0),
        };
        b.start = b.intern(start);
        b
    }

    pub fn intern(&mut self, name: &str) -> SymbolId {
        if let Some(id) = self.index.get(name) {
            return *id;
        }
        let id = SymbolId(self.symbols.len() as u16);
        self.symbols.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    fn items(&mut self, rhs: &str) -> Vec<Item> {
        rhs.split_whitespace()
            .map(|tok| match tok {
                "$QUOTED" => Item::Quoted,
                "$DIGITS" => Item::Digits,
                "$WORD" => Item::Word,
                t if t.len() > 1 && t.starts_with('$') => Item::Sym(self.intern(&t[1..])),
                t => Item::Lit(t.to_lowercase()),
            })
            .collect()
    }

    pub fn rule<F>(&mut self, lhs: &str, rhs: &str, emits: &[Op], builder: F) -> &mut Self
    where
        F: Fn(&[Sem]) -> Option<Sem> + Send + Sync + 'static,
    {
        let lhs = self.intern(lhs);
        let rhs = self.items(rhs);
        assert!(!rhs.is_empty(), "empty right-hand side");
        self.rules.push(Rule {
            lhs,
            rhs,
            builder: Arc::new(builder),
            emits: emits.to_vec(),
        });
        self
    }

    /// Every literal token used so far.
    pub fn literals(&self) -> BTreeSet<String> {
        self.rules
            .iter()
            .flat_map(|r| r.rhs.iter())
            .filter_map(|i| match i {
                Item::Lit(w) => Some(w.clone()),
                _ => None,
            })
            .collect()
    }

    /// Lexical rule producing a constant value.
    pub fn constant(&mut self, lhs: &str, rhs: &str, value: Sem) -> &mut Self {
        self.rule(lhs, rhs, &[], move |_| Some(value.clone()))
    }

    pub fn build(self, aliases: AliasSet, arg_names: ArgNames) -> Grammar {
        let keywords = self
            .rules
            .iter()
            .flat_map(|r| r.rhs.iter())
            .filter_map(|i| match i {
                Item::Lit(w) => Some(w.clone()),
                _ => None,
            })
            .collect();
        Grammar {
            symbols: self.symbols,
            rules: self.rules,
            start: self.start,
            keywords,
            aliases,
            arg_names,
            max_skip: DEFAULT_MAX_SKIP,
            beam: DEFAULT_BEAM,
        }
    }
}
