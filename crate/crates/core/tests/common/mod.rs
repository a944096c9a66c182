#![allow(dead_code)]

use babble::corpus::{AliasSet, ArgNames, Label};
use babble::grammar::{build_grammar, Grammar, Op};
use babble::parser::parse_text;

/// Minimal predicate examples, one per operator, with the operator name each
/// must produce somewhere in at least one candidate.
pub const PREDICATE_EXAMPLES: &[(&str, &str)] = &[
    ("and", "X is true and Y is true"),
    ("or", "X is true or Y is true"),
    ("not", "X is not true"),
    ("any", "Any of X or Y or Z is true"),
    ("all", "All of X and Y and Z are true"),
    ("none", "None of X or Y or Z is true"),
    ("eq", "X is equal to Y"),
    ("ne", "X is not Y"),
    ("lt", "X is smaller than Y"),
    ("le", "X is no more than Y"),
    ("gt", "X is larger than Y"),
    ("ge", "X is at least Y"),
    ("lower", "X is lowercase"),
    ("upper", "X is upper case"),
    ("capital", "X is capitalized"),
    ("all_caps", "X is in all caps"),
    ("starts_with", "X starts with \"cardio\""),
    ("ends_with", "X ends with \"itis\""),
    ("substring", "X contains \"-induced\""),
    ("person", "A person is between X and Y"),
    ("location", "A place is within two words of X"),
    ("date", "A date is between X and Y"),
    ("number", "There are three numbers in the sentence"),
    ("organization", "An organization is right after X"),
    ("list", "(X, Y) is in Z"),
    ("set", "X, Y, and Z are true"),
    ("count", "There is one word between X and Y"),
    ("contains", "X is in Y"),
    ("intersection", "At least two of X are in Y"),
    ("map", "X is at the start of a word in Y"),
    ("filter", "There are three capitalized words to the left of X"),
    ("alias", "A spouse word is in the sentence"),
    ("word_distance", "X is two words before Y"),
    ("character_distance", "X is twenty characters after Y"),
    ("left", "X is before Y"),
    ("right", "X is after Y"),
    ("between", "X is between Y and Z"),
    ("within", "X is within five words of Y"),
];

/// Sample explanations with the argument names their task used.
pub const SAMPLE_EXPLANATIONS: &[(&str, &str, &str)] = &[
    ("x", "y", "Label true because \"and\" occurs between X and Y and \"marriage\" occurs one word after person1."),
    ("x", "y", "Label true because person Y is preceded by `beau'."),
    ("x", "y", "Label false because the words \"married\", \"spouse\", \"husband\", and \"wife\" do not occur in the sentence."),
    ("x", "y", "Label false because there are more than 2 people in the sentence and \"actor\" or \"actress\" is left of person1 or person2."),
    ("chemical", "disease", "Label true because the disease is immediately after the chemical and 'induc' or 'assoc' is in the chemical name."),
    ("chemical", "disease", "Label true because a word containing 'develop' appears somewhere before the chemical, and the word 'following' is between the disease and the chemical."),
    ("chemical", "disease", "Label true because \"induced by\", \"caused by\", or \"due to\" appears between the chemical and the disease.\""),
    ("chemical", "disease", "Label false because \"none\", \"not\", or \"no\" is within 30 characters to the left of the disease."),
    ("protein", "kinase", "Label true because \"Ser\" or \"Tyr\" are within 10 characters of the protein."),
    ("protein", "kinase", "Label true because the words \"by\" or \"with\" are between the protein and kinase and the words \"no\", \"not\" or \"none\" are not in between the protein and kinase and the total number of words between them is smaller than 10."),
    ("protein", "kinase", "Label false because the sentence contains \"mRNA\", \"DNA\", or \"RNA\"."),
    ("protein", "kinase", "Label false because there are two \",\" between the protein and the kinase with less than 30 characters between them."),
];

pub fn spouse_aliases() -> AliasSet {
    let mut a = AliasSet::new();
    a.insert("spouse", ["wife", "husband", "spouse"]).unwrap();
    a
}

pub fn grammar_for(x: &str, y: &str, aliases: &AliasSet) -> Grammar {
    build_grammar(aliases, &ArgNames::new(&[x], &[y])).unwrap()
}

/// Whether `text` (prefixed with a label clause) yields a candidate using `op`.
pub fn yields_op(grammar: &Grammar, text: &str, op: &str) -> bool {
    let full = format!("Label true because {text}");
    let Ok(parses) = parse_text(grammar, &full, Label::Positive) else {
        return false;
    };
    match op {
        "alias" => parses.iter().any(|p| p.lf.condition.uses_alias()),
        name => {
            let op = Op::from_name(name).expect("known operator");
            parses.iter().any(|p| p.lf.condition.mentions(op))
        }
    }
}

pub fn parse_count(grammar: &Grammar, text: &str) -> Option<usize> {
    parse_text(grammar, text, Label::Positive).ok().map(|p| p.len())
}
