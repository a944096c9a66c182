mod common;

use babble::corpus::{AliasSet, Label};
use babble::parser::parse_text;
use common::*;

#[test]
fn every_predicate_example_yields_its_operator() {
    let g = grammar_for("x", "y", &spouse_aliases());
    let missing: Vec<_> = PREDICATE_EXAMPLES
        .iter()
        .filter(|(op, text)| !yields_op(&g, text, op))
        .collect();
    assert!(missing.is_empty(), "missing: {missing:#?}");
}

#[test]
fn sample_explanations_parse() {
    let aliases = AliasSet::new();
    let mut parsed = 0;
    for (x, y, text) in SAMPLE_EXPLANATIONS {
        let g = grammar_for(x, y, &aliases);
        let n = parse_count(&g, text).unwrap_or(0);
        eprintln!("{n:4}  {text}");
        parsed += usize::from(n > 0);
    }
    assert!(parsed >= 10, "only {parsed} of 12 parsed");
}

#[test]
fn stray_trailing_quote_is_a_tokenizer_error() {
    let g = grammar_for("chemical", "disease", &AliasSet::new());
    let (_, _, text) = SAMPLE_EXPLANATIONS[6];
    assert!(parse_text(&g, text, Label::Positive).is_err());
}
