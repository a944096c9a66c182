use std::collections::{BTreeSet, HashSet};

use crate::grammar::{Expr, Grammar, LogicalForm, Unit};

fn node_at<'a>(e: &'a Expr, path: &[usize]) -> &'a Expr {
    path.iter().fold(e, |node, &i| &node.children()[i])
}

fn replace_at(e: &Expr, path: &[usize], with: &Expr) -> Expr {
    match path.split_first() {
        None => with.clone(),
        Some((&i, rest)) => {
            let mut out = e.clone();
            out.children_mut()[i] = replace_at(&e.children()[i], rest, with);
            out
        }
    }
}

fn paths(e: &Expr, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    out.push(prefix.clone());
    for i in 0..e.children().len() {
        prefix.push(i);
        paths(&e.children()[i], prefix, out);
        prefix.pop();
    }
}

/// Single-node replacements for `node`, in a fixed order.
fn alternatives(node: &Expr, grammar: &Grammar, literals: &BTreeSet<String>) -> Vec<Expr> {
    match node {
        Expr::Call(op, args) => op.siblings().map(|o| Expr::Call(o, args.clone())).collect(),
        Expr::Func(op, args) => op.siblings().map(|o| Expr::Func(o, args.clone())).collect(),
        Expr::Int(n) => {
            let mut v = vec![Expr::Int(n + 1)];
            if *n > 0 {
                v.insert(0, Expr::Int(n - 1));
            }
            v
        }
        Expr::Bool(b) => vec![Expr::Bool(!b)],
        Expr::Str(s) => literals
            .iter()
            .filter(|l| *l != s)
            .map(|l| Expr::Str(l.clone()))
            .collect(),
        Expr::ArgX => vec![Expr::ArgY],
        Expr::ArgY => vec![Expr::ArgX],
        Expr::Unit(Unit::Words) => vec![Expr::Unit(Unit::Chars)],
        Expr::Unit(Unit::Chars) => vec![Expr::Unit(Unit::Words)],
        Expr::Alias(name) => grammar
            .aliases
            .names()
            .filter(|n| *n != name)
            .map(|n| Expr::Alias(n.to_string()))
            .collect(),
        Expr::Float(_) | Expr::Sentence => Vec::new(),
    }
}

/// Up to `budget` well-typed forms that differ from `lf` in exactly one
/// node: an operator swapped within its family, an integer moved by one, a
/// boolean flipped, a string replaced by another literal from `literals` or
/// from `lf` itself, the two arguments exchanged, a unit or alias swapped.
/// Edits that normalize back to `lf` are skipped. Enumeration is pre-order,
/// so the result is deterministic.
pub fn perturb(
    lf: &LogicalForm,
    grammar: &Grammar,
    budget: usize,
    literals: &BTreeSet<String>,
) -> Vec<LogicalForm> {
    let mut pool = literals.clone();
    pool.extend(super::string_literals([lf]));
    let original = lf.normalize();
    let mut seen = HashSet::from([original.clone()]);
    let mut out = Vec::new();
    let mut all = Vec::new();
    paths(&lf.condition, &mut Vec::new(), &mut all);
    for path in all {
        let node = node_at(&lf.condition, &path);
        for alt in alternatives(node, grammar, &pool) {
            if out.len() >= budget {
                return out;
            }
            let cand = LogicalForm::new(lf.polarity, replace_at(&lf.condition, &path, &alt));
            if cand.type_check().is_err() || !seen.insert(cand.normalize()) {
                continue;
            }
            out.push(cand);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AliasSet;
    use crate::grammar::build_default_grammar;

    fn grammar() -> Grammar {
        build_default_grammar(&AliasSet::new()).unwrap()
    }

    /// Number of positions where two trees of equal shape differ.
    fn node_diff(a: &Expr, b: &Expr) -> usize {
        let here = match (a, b) {
            (Expr::Call(x, xs), Expr::Call(y, ys)) | (Expr::Func(x, xs), Expr::Func(y, ys)) => {
                if xs.len() != ys.len() {
                    return usize::MAX / 2;
                }
                usize::from(x != y)
            }
            _ if a.children().is_empty() && b.children().is_empty() => usize::from(a != b),
            _ => return usize::MAX / 2,
        };
        here + a
            .children()
            .iter()
            .zip(b.children())
            .map(|(x, y)| node_diff(x, y))
            .sum::<usize>()
    }

    #[test]
    fn boolean_literal_only_flips() {
        let lf: LogicalForm = "(lf +1 true)".parse().unwrap();
        let got = perturb(&lf, &grammar(), 10, &BTreeSet::new());
        assert_eq!(got, vec!["(lf +1 false)".parse().unwrap()]);
    }

    #[test]
    fn integer_neighbours() {
        let lf: LogicalForm = "(lf +1 (eq (word_distance arg_x arg_y) 2))".parse().unwrap();
        let got: Vec<String> = perturb(&lf, &grammar(), 100, &BTreeSet::new())
            .iter()
            .map(|l| l.to_string())
            .collect();
        assert!(got.contains(&"(lf +1 (eq (word_distance arg_x arg_y) 1))".to_string()));
        assert!(got.contains(&"(lf +1 (eq (word_distance arg_x arg_y) 3))".to_string()));
        // arg_x <-> arg_y under a symmetric operator normalizes back
        assert!(!got.iter().any(|s| s.contains("arg_y arg_y") && s.contains("word_distance arg_x")));
    }

    #[test]
    fn every_result_differs_in_one_node() {
        let lf: LogicalForm =
            r#"(lf -1 (and (contains (left arg_y 3) "wife") (lt (count (between arg_x arg_y)) 4)))"#
                .parse()
                .unwrap();
        let pool = BTreeSet::from(["husband".to_string()]);
        let got = perturb(&lf, &grammar(), 1000, &pool);
        assert!(!got.is_empty());
        for p in &got {
            assert_eq!(node_diff(&lf.condition, &p.condition), 1, "{p}");
            assert!(p.type_check().is_ok());
            assert_ne!(p.normalize(), lf.normalize());
        }
        assert!(perturb(&lf, &grammar(), 3, &pool).len() <= 3);
    }
}
