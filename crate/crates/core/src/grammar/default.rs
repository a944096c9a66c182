//! The built-in English grammar for labeling explanations.

use super::lf::{Expr, Op, Unit};
use super::sem::{Conj, Counter, Rel, Sem, Side, Subject};
use super::{Grammar, GrammarBuilder};
use crate::corpus::{AliasSet, ArgNames, Label};
use crate::error::{Error, Result};

const X_NAMES: &[&str] = &[
    "x",
    "person x",
    "person 1",
    "person1",
    "person one",
    "first person",
    "entity x",
    "entity 1",
    "first entity",
];

const Y_NAMES: &[&str] = &[
    "y",
    "person y",
    "person 2",
    "person2",
    "person two",
    "second person",
    "entity y",
    "entity 2",
    "second entity",
];

const NUMBER_WORDS: &[(&str, i64)] = &[
    ("zero", 0),
    ("one", 1),
    ("two", 2),
    ("three", 3),
    ("four", 4),
    ("five", 5),
    ("six", 6),
    ("seven", 7),
    ("eight", 8),
    ("nine", 9),
    ("ten", 10),
    ("eleven", 11),
    ("twelve", 12),
    ("thirteen", 13),
    ("fourteen", 14),
    ("fifteen", 15),
    ("sixteen", 16),
    ("seventeen", 17),
    ("eighteen", 18),
    ("nineteen", 19),
    ("twenty", 20),
    ("thirty", 30),
    ("forty", 40),
    ("fifty", 50),
];

fn c(op: Op, args: Vec<Expr>) -> Expr {
    Expr::Call(op, args)
}

fn is_span(e: &Expr) -> bool {
    matches!(
        e,
        Expr::ArgX
            | Expr::ArgY
            | Expr::Sentence
            | Expr::Call(Op::Left | Op::Right | Op::Between | Op::Within, _)
    )
}

fn is_text(e: &Expr) -> bool {
    is_span(e) || matches!(e, Expr::Str(_))
}

fn word_count(s: &str) -> i64 {
    s.split_whitespace().count().max(1) as i64
}

fn window(side: Side, anchor: Expr, n: Expr, unit: Unit) -> Expr {
    match unit {
        Unit::Words => c(side.op(), vec![anchor, n]),
        Unit::Chars => c(side.op(), vec![anchor, n, Expr::Unit(unit)]),
    }
}

fn distance(unit: Unit) -> Op {
    match unit {
        Unit::Words => Op::WordDistance,
        Unit::Chars => Op::CharDistance,
    }
}

/// A value counts as true when the span is non-empty or the string occurs.
fn truth(e: &Expr) -> Option<Expr> {
    if let Expr::Str(_) = e {
        Some(c(Op::Contains, vec![Expr::Sentence, e.clone()]))
    } else if is_span(e) {
        Some(c(Op::Gt, vec![c(Op::Count, vec![e.clone()]), Expr::Int(0)]))
    } else {
        None
    }
}

/// Where `item` sits relative to something.
fn place(item: &Expr, rel: &Rel) -> Option<Expr> {
    if !is_text(item) {
        return None;
    }
    Some(match rel {
        Rel::In(region) => c(Op::Contains, vec![region.clone(), item.clone()]),
        Rel::Next(side, anchor) => match item {
            Expr::Str(s) => c(
                Op::Contains,
                vec![
                    window(*side, anchor.clone(), Expr::Int(word_count(s)), Unit::Words),
                    item.clone(),
                ],
            ),
            _ => c(
                Op::And,
                vec![
                    c(Op::Contains, vec![c(side.op(), vec![anchor.clone()]), item.clone()]),
                    c(
                        Op::Eq,
                        vec![
                            c(Op::WordDistance, vec![item.clone(), anchor.clone()]),
                            Expr::Int(0),
                        ],
                    ),
                ],
            ),
        },
        Rel::Distance(side, n, unit, anchor) => {
            let eq = c(
                Op::Eq,
                vec![c(distance(*unit), vec![item.clone(), anchor.clone()]), n.clone()],
            );
            match side {
                Some(side) => c(
                    Op::And,
                    vec![
                        c(Op::Contains, vec![c(side.op(), vec![anchor.clone()]), item.clone()]),
                        eq,
                    ],
                ),
                None => eq,
            }
        }
    })
}

fn combine(conj: Conj, negated: bool, mut atoms: Vec<Expr>) -> Expr {
    if atoms.len() == 1 {
        let a = atoms.pop().expect("one atom");
        return if negated { c(Op::Not, vec![a]) } else { a };
    }
    let list = c(Op::List, atoms);
    match (conj, negated) {
        (_, true) => c(Op::None, vec![list]),
        (Conj::And, false) => c(Op::All, vec![list]),
        _ => c(Op::Any, vec![list]),
    }
}

/// The region a single-token subject ("a person", "a spouse word") must fall in.
fn target_region(rel: &Rel) -> Option<Expr> {
    match rel {
        Rel::In(r) => Some(r.clone()),
        Rel::Next(side, anchor) => Some(window(*side, anchor.clone(), Expr::Int(1), Unit::Words)),
        Rel::Distance(..) => None,
    }
}

fn at_least_one(count: Expr, negated: bool) -> Expr {
    if negated {
        c(Op::Eq, vec![count, Expr::Int(0)])
    } else {
        c(Op::Ge, vec![count, Expr::Int(1)])
    }
}

fn relate(subject: &Subject, negated: bool, rel: &Rel) -> Option<Expr> {
    match subject {
        Subject::Texts(conj, items) => {
            let atoms = items.iter().map(|i| place(i, rel)).collect::<Option<Vec<_>>>()?;
            Some(combine(*conj, negated, atoms))
        }
        Subject::Alias(name) => {
            let region = target_region(rel)?;
            let hits = c(
                Op::Count,
                vec![c(Op::Intersection, vec![Expr::Alias(name.clone()), region])],
            );
            Some(at_least_one(hits, negated))
        }
        Subject::Tag(op) => {
            let e = c(*op, vec![target_region(rel)?]);
            Some(if negated { c(Op::Not, vec![e]) } else { e })
        }
        Subject::WordFn(f) => {
            let hits = c(Op::Count, vec![c(Op::Filter, vec![f.clone(), target_region(rel)?])]);
            Some(at_least_one(hits, negated))
        }
        Subject::Group(op, items) => {
            let Rel::In(region) = rel else { return None };
            let e = c(Op::Contains, vec![region.clone(), c(*op, items.clone())]);
            Some(if negated { c(Op::Not, vec![e]) } else { e })
        }
    }
}

/// Reading of "'a' is in R" as a substring test over R's text.
fn relate_substring(subject: &Subject, negated: bool, rel: &Rel) -> Option<Expr> {
    let (Subject::Texts(conj, items), Rel::In(region)) = (subject, rel) else {
        return None;
    };
    if !items.iter().all(|i| matches!(i, Expr::Str(_))) {
        return None;
    }
    let atoms = items
        .iter()
        .map(|i| c(Op::Substring, vec![region.clone(), i.clone()]))
        .collect();
    Some(combine(*conj, negated, atoms))
}

/// How many of `counter` fall in `rel`.
fn counted(counter: &Counter, rel: &Rel) -> Option<Expr> {
    let Rel::In(region) = rel else { return None };
    match counter {
        Counter::Words => Some(c(Op::Count, vec![region.clone()])),
        Counter::Chars => match region {
            Expr::Call(Op::Between, ends) => Some(c(Op::CharDistance, ends.clone())),
            _ => None,
        },
        Counter::Matching(f) => Some(c(
            Op::Count,
            vec![c(Op::Filter, vec![f.clone(), region.clone()])],
        )),
    }
}

fn expr(s: &Sem) -> Option<Expr> {
    s.expr().cloned()
}

fn text(s: &Sem) -> Option<Expr> {
    s.expr().filter(|e| is_text(e)).cloned()
}

fn span(s: &Sem) -> Option<Expr> {
    s.expr().filter(|e| is_span(e)).cloned()
}

fn items(s: &Sem) -> Option<(Conj, &[Expr])> {
    match s {
        Sem::Items(conj, xs) => Some((*conj, xs)),
        _ => None,
    }
}

fn verb(s: &Sem) -> Option<bool> {
    match s {
        Sem::Verb(neg) => Some(*neg),
        _ => None,
    }
}

fn rel(s: &Sem) -> Option<&Rel> {
    match s {
        Sem::Rel(r) => Some(r),
        _ => None,
    }
}

fn subject(s: &Sem) -> Option<&Subject> {
    match s {
        Sem::Subject(x) => Some(x),
        _ => None,
    }
}

fn op(s: &Sem) -> Option<Op> {
    match s {
        Sem::Op(o) => Some(*o),
        _ => None,
    }
}

fn side(s: &Sem) -> Option<Side> {
    match s {
        Sem::Side(x) => Some(*x),
        _ => None,
    }
}

fn unit(s: &Sem) -> Option<Unit> {
    match s {
        Sem::Unit(u) => Some(*u),
        _ => None,
    }
}

fn cmp(s: &Sem) -> Option<(Op, Expr)> {
    match s {
        Sem::Cmp(o, n) => Some((*o, n.clone())),
        _ => None,
    }
}

fn counter(s: &Sem) -> Option<&Counter> {
    match s {
        Sem::Counter(x) => Some(x),
        _ => None,
    }
}

fn int(s: &Sem) -> Option<Expr> {
    s.expr().filter(|e| matches!(e, Expr::Int(_))).cloned()
}

fn boolean(e: Expr) -> Option<Sem> {
    Some(Sem::Expr(e))
}

fn not(e: Expr) -> Expr {
    c(Op::Not, vec![e])
}

/// Joins `head` onto a list built so far, keeping one conjunction per list.
fn join_items(conj: Option<Conj>, head: Expr, rest: &Sem) -> Option<Sem> {
    let (rest_conj, xs) = items(rest)?;
    let conj = match (conj, rest_conj) {
        (None, Conj::Single) => Conj::Or,
        (None, other) => other,
        (Some(c), Conj::Single) => c,
        (Some(c), other) if c == other => c,
        _ => return None,
    };
    let mut all = vec![head];
    all.extend(xs.iter().cloned());
    Some(Sem::Items(conj, all))
}

fn add_list_rules(g: &mut GrammarBuilder, list: &str, elem: &str, check: fn(&Sem) -> Option<Expr>) {
    g.rule(list, &format!("${elem}"), &[], move |s| {
        Some(Sem::Items(Conj::Single, vec![check(&s[0])?]))
    });
    let joins: [(&str, Option<Conj>); 5] = [
        (",", None),
        ("or", Some(Conj::Or)),
        (", or", Some(Conj::Or)),
        ("and", Some(Conj::And)),
        (", and", Some(Conj::And)),
    ];
    for (sep, conj) in joins {
        g.rule(list, &format!("${elem} {sep} ${list}"), &[], move |s| {
            join_items(conj, check(&s[0])?, &s[1])
        });
    }
}

/// The default grammar with the generic argument names only.
pub fn build_default_grammar(aliases: &AliasSet) -> Result<Grammar> {
    build_grammar(aliases, &ArgNames::default())
}

/// The default grammar, extended with domain names for the two arguments
/// (e.g. "chemical" and "disease") and with the given alias lists.
pub fn build_grammar(aliases: &AliasSet, arg_names: &ArgNames) -> Result<Grammar> {
    let mut g = GrammarBuilder::new("START");

    // --- statements
    for head in ["label $POL because", "label $POL since", "label $POL if", "label it $POL because"] {
        g.rule("START", &format!("{head} $BOOL"), &[], |s| {
            let Sem::Label(l) = s[0] else { return None };
            Some(Sem::Lf(Some(l), expr(&s[1])?))
        });
    }
    g.rule("START", "$POL because $BOOL", &[], |s| {
        let Sem::Label(l) = s[0] else { return None };
        Some(Sem::Lf(Some(l), expr(&s[1])?))
    });
    g.rule("START", "$BOOL", &[], |s| Some(Sem::Lf(None, expr(&s[0])?)));
    for w in ["true", "positive", "yes", "correct"] {
        g.constant("POL", w, Sem::Label(Label::Positive));
    }
    for w in ["false", "negative", "no", "incorrect"] {
        g.constant("POL", w, Sem::Label(Label::Negative));
    }

    // --- literals
    g.rule("STR", "$QUOTED", &[], |s| match &s[0] {
        Sem::Text(t) if !t.trim().is_empty() => Some(Sem::Expr(Expr::Str(t.clone()))),
        _ => None,
    });
    g.rule("INT", "$DIGITS", &[], |s| int(&s[0]).map(Sem::Expr));
    for (w, n) in NUMBER_WORDS {
        g.constant("INT", w, Sem::Expr(Expr::Int(*n)));
    }
    g.rule("NUM", "$INT", &[], |s| int(&s[0]).map(Sem::Expr));
    g.rule("NUM", "$DIGITS", &[], |s| {
        s[0].expr().filter(|e| matches!(e, Expr::Float(_))).cloned().map(Sem::Expr)
    });
    for w in ["word", "words", "token", "tokens"] {
        g.constant("UNIT", w, Sem::Unit(Unit::Words));
    }
    for w in ["character", "characters", "char", "chars", "letter", "letters"] {
        g.constant("UNIT", w, Sem::Unit(Unit::Chars));
    }
    g.constant("BOOL", "true", Sem::Expr(Expr::Bool(true)));
    g.constant("BOOL", "false", Sem::Expr(Expr::Bool(false)));

    // --- spans
    let mut arg_rules = |names: Vec<String>, e: Expr| {
        for n in names {
            g.constant("SPAN", &n, Sem::Expr(e.clone()));
        }
    };
    let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    arg_rules(own(X_NAMES), Expr::ArgX);
    arg_rules(arg_names.x.clone(), Expr::ArgX);
    arg_rules(own(Y_NAMES), Expr::ArgY);
    arg_rules(arg_names.y.clone(), Expr::ArgY);
    for w in ["sentence", "text", "whole sentence", "entire sentence"] {
        g.constant("SPAN", w, Sem::Expr(Expr::Sentence));
    }
    g.rule("SPAN", "the $SPAN", &[], |s| span(&s[0]).map(Sem::Expr));
    for noun in ["words", "the words", "tokens", "the tokens", "the text"] {
        g.rule("SPAN", &format!("{noun} $REL"), &[Op::Left, Op::Right], |s| {
            Some(Sem::Expr(target_region(rel(&s[0])?)?))
        });
    }
    g.rule("TEXT", "$SPAN", &[], |s| span(&s[0]).map(Sem::Expr));
    g.rule("TEXT", "$STR", &[], |s| expr(&s[0]).map(Sem::Expr));
    g.rule("ENDP", "$TEXT", &[], |s| text(&s[0]).map(Sem::Expr));
    g.rule("ENDP", "$WORD", &[], |s| match &s[0] {
        Sem::Text(w) => Some(Sem::Expr(Expr::Str(w.clone()))),
        _ => None,
    });

    // --- lists
    add_list_rules(&mut g, "STRS", "STR", |s| s.expr().filter(|e| matches!(e, Expr::Str(_))).cloned());
    add_list_rules(&mut g, "TLIST", "ENDP", text);

    // --- relations
    let sides: [(&str, Side); 16] = [
        ("before", Side::Left),
        ("to the left of", Side::Left),
        ("left of", Side::Left),
        ("on the left of", Side::Left),
        ("on the left side of", Side::Left),
        ("preceding", Side::Left),
        ("prior to", Side::Left),
        ("ahead of", Side::Left),
        ("in front of", Side::Left),
        ("after", Side::Right),
        ("to the right of", Side::Right),
        ("right of", Side::Right),
        ("on the right of", Side::Right),
        ("on the right side of", Side::Right),
        ("following", Side::Right),
        ("behind", Side::Right),
    ];
    for (phrase, sd) in sides {
        g.constant("SIDEP", phrase, Sem::Side(sd));
    }
    for w in ["immediately", "right", "directly", "just"] {
        g.constant("ADV", w, Sem::Marker);
    }
    let region = |e: Expr| Some(Sem::Rel(Rel::In(e)));
    g.rule("REL", "$SIDEP $SPAN", &[Op::Left, Op::Right], move |s| {
        region(c(side(&s[0])?.op(), vec![span(&s[1])?]))
    });
    // "right before Y" can also be read as "right of Y" with "before" skipped.
    g.rule("REL", "right $SPAN", &[Op::Right], move |s| region(c(Op::Right, vec![span(&s[0])?])));
    g.rule("REL", "left $SPAN", &[Op::Left], move |s| region(c(Op::Left, vec![span(&s[0])?])));
    g.rule("REL", "$ADV $SIDEP $SPAN", &[Op::Left, Op::Right, Op::WordDistance], |s| {
        Some(Sem::Rel(Rel::Next(side(&s[1])?, span(&s[2])?)))
    });
    for phrase in ["in", "inside", "within", "anywhere in", "somewhere in"] {
        g.rule("REL", &format!("{phrase} $SPAN"), &[], move |s| region(span(&s[0])?));
    }
    g.rule("REL", "in $WORD", &[], move |s| match &s[0] {
        Sem::Text(w) => region(Expr::Str(w.clone())),
        _ => None,
    });
    for phrase in ["between", "in between"] {
        g.rule("REL", &format!("{phrase} $ENDP and $ENDP"), &[Op::Between], move |s| {
            region(c(Op::Between, vec![text(&s[0])?, text(&s[1])?]))
        });
        g.rule("REL", &format!("{phrase} them"), &[Op::Between], move |_| {
            region(c(Op::Between, vec![Expr::ArgX, Expr::ArgY]))
        });
    }
    g.rule(
        "REL",
        "$INT $UNIT $SIDEP $SPAN",
        &[Op::And, Op::Contains, Op::Eq, Op::WordDistance, Op::CharDistance],
        |s| {
            Some(Sem::Rel(Rel::Distance(
                Some(side(&s[2])?),
                int(&s[0])?,
                unit(&s[1])?,
                span(&s[3])?,
            )))
        },
    );
    for phrase in ["from", "away from"] {
        g.rule(
            "REL",
            &format!("$INT $UNIT {phrase} $SPAN"),
            &[Op::Eq, Op::WordDistance, Op::CharDistance],
            |s| Some(Sem::Rel(Rel::Distance(None, int(&s[0])?, unit(&s[1])?, span(&s[2])?))),
        );
    }
    for phrase in ["within", "at most", "no more than"] {
        for of in ["of", "from"] {
            g.rule("REL", &format!("{phrase} $INT $UNIT {of} $SPAN"), &[Op::Within], move |s| {
                let (n, u, a) = (int(&s[0])?, unit(&s[1])?, span(&s[2])?);
                let mut args = vec![a, n];
                if u == Unit::Chars {
                    args.push(Expr::Unit(u));
                }
                region(c(Op::Within, args))
            });
        }
        g.rule("REL", &format!("{phrase} $INT $UNIT $SIDEP $SPAN"), &[Op::Left, Op::Right], move |s| {
            region(window(side(&s[2])?, span(&s[3])?, int(&s[0])?, unit(&s[1])?))
        });
    }

    // --- verbs
    for w in [
        "is", "are", "occurs", "occur", "appears", "appear", "is found", "are found", "exists",
        "exist", "is located", "are located", "is present", "are present", "comes", "come",
        "shows up", "show up", "is mentioned", "are mentioned", "lies", "lie", "sits",
    ] {
        g.constant("VERB", w, Sem::Verb(false));
    }
    for w in [
        "is not", "are not", "isn't", "aren't", "does not occur", "do not occur", "doesn't occur",
        "don't occur", "does not appear", "do not appear", "doesn't appear", "don't appear",
        "never occurs", "never occur", "never appears", "never appear", "is never", "are never",
        "does not exist", "do not exist", "is absent", "are absent", "is not found", "are not found",
    ] {
        g.constant("VERB", w, Sem::Verb(true));
    }
    for w in ["is", "are"] {
        g.constant("BE", w, Sem::Marker);
    }

    // --- subjects
    g.rule("SUBJ", "$STRS", &[], |s| {
        let (conj, xs) = items(&s[0])?;
        Some(Sem::Subject(Subject::Texts(conj, xs.to_vec())))
    });
    for prefix in [
        "the word", "the words", "word", "words", "the phrase", "the phrases", "phrase", "the string",
        "the strings", "the term", "the terms", "the token", "the tokens", "one of", "any of",
        "either", "either of", "one of the words", "any of the words",
    ] {
        g.rule("SUBJ", &format!("{prefix} $STRS"), &[], |s| {
            let (conj, xs) = items(&s[0])?;
            Some(Sem::Subject(Subject::Texts(conj, xs.to_vec())))
        });
    }
    g.rule("SUBJ", "$SPAN", &[], |s| {
        Some(Sem::Subject(Subject::Texts(Conj::Single, vec![span(&s[0])?])))
    });
    for det in ["a", "an", "any", "some", "another", "one"] {
        g.rule("SUBJ", &format!("{det} $TAG"), &[], |s| {
            Some(Sem::Subject(Subject::Tag(op(&s[0])?)))
        });
        for noun in ["word", "term", "phrase"] {
            g.rule("SUBJ", &format!("{det} $ALIAS {noun}"), &[Op::Intersection, Op::Count, Op::Ge], |s| {
                match &s[0] {
                    Sem::Text(name) => Some(Sem::Subject(Subject::Alias(name.clone()))),
                    _ => None,
                }
            });
        }
        g.rule("SUBJ", &format!("{det} $CASEADJ word"), &[Op::Filter, Op::Count], |s| {
            Some(Sem::Subject(Subject::WordFn(Expr::Func(op(&s[0])?, vec![]))))
        });
        for (phrase, test) in [
            ("word containing", Op::Substring),
            ("word that contains", Op::Substring),
            ("word starting with", Op::StartsWith),
            ("word that starts with", Op::StartsWith),
            ("word beginning with", Op::StartsWith),
            ("word ending with", Op::EndsWith),
            ("word that ends with", Op::EndsWith),
        ] {
            g.rule("SUBJ", &format!("{det} {phrase} $STR"), &[Op::Filter, Op::Count, test], move |s| {
                Some(Sem::Subject(Subject::WordFn(Expr::Func(test, vec![expr(&s[0])?]))))
            });
        }
    }
    for phrase in ["one of the $ALIAS words", "$ALIAS words", "a word in $ALIAS", "a word from $ALIAS"] {
        g.rule("SUBJ", phrase, &[Op::Intersection, Op::Count, Op::Ge], |s| match &s[0] {
            Sem::Text(name) => Some(Sem::Subject(Subject::Alias(name.clone()))),
            _ => None,
        });
    }
    for gop in [Op::List, Op::Tuple] {
        g.rule("SUBJ", "( $ENDP , $ENDP )", &[gop], move |s| {
            Some(Sem::Subject(Subject::Group(gop, vec![text(&s[0])?, text(&s[1])?])))
        });
        g.rule("SUBJ", "( $ENDP , $ENDP , $ENDP )", &[gop], move |s| {
            Some(Sem::Subject(Subject::Group(
                gop,
                vec![text(&s[0])?, text(&s[1])?, text(&s[2])?],
            )))
        });
    }

    // --- entity tags and case
    for (w, t) in [
        ("person", Op::Person),
        ("name", Op::Person),
        ("place", Op::Location),
        ("location", Op::Location),
        ("city", Op::Location),
        ("country", Op::Location),
        ("date", Op::Date),
        ("time", Op::Date),
        ("year", Op::Date),
        ("number", Op::Number),
        ("organization", Op::Organization),
        ("company", Op::Organization),
    ] {
        g.constant("TAG", w, Sem::Op(t));
    }
    for (w, t) in [
        ("people", Op::Person),
        ("persons", Op::Person),
        ("names", Op::Person),
        ("places", Op::Location),
        ("locations", Op::Location),
        ("dates", Op::Date),
        ("numbers", Op::Number),
        ("organizations", Op::Organization),
        ("companies", Op::Organization),
    ] {
        g.constant("TAGS", w, Sem::Op(t));
    }
    for (w, t) in [
        ("capitalized", Op::Capital),
        ("capital", Op::Capital),
        ("lowercase", Op::Lower),
        ("lower case", Op::Lower),
        ("lowercased", Op::Lower),
        ("uppercase", Op::Upper),
        ("upper case", Op::Upper),
        ("uppercased", Op::Upper),
        ("all caps", Op::AllCaps),
        ("all-caps", Op::AllCaps),
        ("all capitals", Op::AllCaps),
        ("all capital letters", Op::AllCaps),
    ] {
        g.constant("CASEADJ", w, Sem::Op(t));
    }
    g.rule("CASE", "$CASEADJ", &[], |s| op(&s[0]).map(Sem::Op));
    g.rule("CASE", "in $CASEADJ", &[], |s| op(&s[0]).map(Sem::Op));

    // --- counting
    for w in ["word", "words", "token", "tokens"] {
        g.constant("COUNTER", w, Sem::Counter(Counter::Words));
    }
    for w in ["character", "characters", "chars", "letters"] {
        g.constant("COUNTER", w, Sem::Counter(Counter::Chars));
    }
    g.rule("COUNTER", "$TAGS", &[Op::Filter], |s| {
        Some(Sem::Counter(Counter::Matching(Expr::Func(op(&s[0])?, vec![]))))
    });
    g.rule("COUNTER", "$TAG", &[Op::Filter], |s| {
        Some(Sem::Counter(Counter::Matching(Expr::Func(op(&s[0])?, vec![]))))
    });
    for noun in ["word", "words"] {
        g.rule("COUNTER", &format!("$CASEADJ {noun}"), &[Op::Filter], |s| {
            Some(Sem::Counter(Counter::Matching(Expr::Func(op(&s[0])?, vec![]))))
        });
    }
    g.rule("COUNTER", "$STR", &[Op::Filter, Op::Eq], |s| {
        Some(Sem::Counter(Counter::Matching(Expr::Func(Op::Eq, vec![expr(&s[0])?]))))
    });
    g.rule("NUMCMP", "$INT", &[Op::Eq], |s| Some(Sem::Cmp(Op::Eq, int(&s[0])?)));
    for (phrase, o) in [
        ("exactly", Op::Eq),
        ("more than", Op::Gt),
        ("over", Op::Gt),
        ("greater than", Op::Gt),
        ("at least", Op::Ge),
        ("no less than", Op::Ge),
        ("no fewer than", Op::Ge),
        ("less than", Op::Lt),
        ("fewer than", Op::Lt),
        ("under", Op::Lt),
        ("at most", Op::Le),
        ("no more than", Op::Le),
        ("up to", Op::Le),
    ] {
        g.rule("NUMCMP", &format!("{phrase} $INT"), &[o], move |s| Some(Sem::Cmp(o, int(&s[0])?)));
    }
    g.constant("NUMCMP", "no", Sem::Cmp(Op::Eq, Expr::Int(0)));

    for head in ["the number of", "number of", "the count of", "the amount of"] {
        g.rule("NUM", &format!("{head} $COUNTER $REL"), &[Op::Count], |s| {
            counted(counter(&s[0])?, rel(&s[1])?).map(Sem::Expr)
        });
    }
    g.rule("NUM", "$SPAN", &[Op::Count], |s| Some(Sem::Expr(c(Op::Count, vec![span(&s[0])?]))));
    for head in ["the length of", "the size of", "length of"] {
        g.rule("NUM", &format!("{head} $SPAN"), &[Op::Count], |s| {
            Some(Sem::Expr(c(Op::Count, vec![span(&s[0])?])))
        });
    }
    for (head, o) in [
        ("the distance between", Op::WordDistance),
        ("the word distance between", Op::WordDistance),
        ("the character distance between", Op::CharDistance),
    ] {
        g.rule("NUM", &format!("{head} $ENDP and $ENDP"), &[o], move |s| {
            Some(Sem::Expr(c(o, vec![text(&s[0])?, text(&s[1])?])))
        });
    }

    // --- comparators
    for (phrase, o) in [
        ("is equal to", Op::Eq),
        ("equals", Op::Eq),
        ("is the same as", Op::Eq),
        ("is", Op::Eq),
        ("is not", Op::Ne),
        ("is not equal to", Op::Ne),
        ("does not equal", Op::Ne),
        ("is different from", Op::Ne),
        ("is not the same as", Op::Ne),
        ("is smaller than", Op::Lt),
        ("is less than", Op::Lt),
        ("is fewer than", Op::Lt),
        ("is lower than", Op::Lt),
        ("is shorter than", Op::Lt),
        ("is below", Op::Lt),
        ("is no more than", Op::Le),
        ("is at most", Op::Le),
        ("is no greater than", Op::Le),
        ("is no larger than", Op::Le),
        ("is less than or equal to", Op::Le),
        ("is smaller than or equal to", Op::Le),
        ("is larger than", Op::Gt),
        ("is greater than", Op::Gt),
        ("is more than", Op::Gt),
        ("is bigger than", Op::Gt),
        ("is higher than", Op::Gt),
        ("is longer than", Op::Gt),
        ("is above", Op::Gt),
        ("exceeds", Op::Gt),
        ("is at least", Op::Ge),
        ("is no less than", Op::Ge),
        ("is no smaller than", Op::Ge),
        ("is no fewer than", Op::Ge),
        ("is greater than or equal to", Op::Ge),
        ("is larger than or equal to", Op::Ge),
    ] {
        g.constant("CMP", phrase, Sem::Op(o));
    }

    // --- boolean statements
    let rel_ops = [
        Op::Contains, Op::Not, Op::Any, Op::All, Op::None, Op::List, Op::And, Op::Eq,
        Op::WordDistance, Op::CharDistance, Op::Left, Op::Right, Op::Count, Op::Intersection,
        Op::Filter, Op::Ge, Op::Person, Op::Location, Op::Date, Op::Number, Op::Organization,
    ];
    g.rule("BOOL", "$SUBJ $VERB $REL", &rel_ops, |s| {
        relate(subject(&s[0])?, verb(&s[1])?, rel(&s[2])?).map(Sem::Expr)
    });
    g.rule("BOOL", "$SUBJ $VERB $REL", &[Op::Substring, Op::Any, Op::All, Op::None, Op::Not], |s| {
        relate_substring(subject(&s[0])?, verb(&s[1])?, rel(&s[2])?).map(Sem::Expr)
    });

    for (phrase, negated) in [
        ("contains", false),
        ("contain", false),
        ("includes", false),
        ("include", false),
        ("has", false),
        ("mentions", false),
        ("does not contain", true),
        ("doesn't contain", true),
        ("do not contain", true),
        ("does not include", true),
        ("doesn't include", true),
        ("does not have", true),
        ("does not mention", true),
    ] {
        for (o, read) in [(Op::Contains, 0), (Op::Substring, 1)] {
            g.rule("BOOL", &format!("$TEXT {phrase} $STRS"), &[o, Op::Any, Op::All, Op::None], move |s| {
                let hay = text(&s[0])?;
                if read == 1 && !is_span(&hay) && !matches!(hay, Expr::Str(_)) {
                    return None;
                }
                let (conj, xs) = items(&s[1])?;
                let atoms = xs.iter().map(|x| c(o, vec![hay.clone(), x.clone()])).collect();
                boolean(combine(conj, negated, atoms))
            });
        }
    }

    for (phrase, sd, tight) in [
        ("is preceded by", Side::Left, false),
        ("is preceded by", Side::Left, true),
        ("is immediately preceded by", Side::Left, true),
        ("is directly preceded by", Side::Left, true),
        ("is followed by", Side::Right, false),
        ("is followed by", Side::Right, true),
        ("is immediately followed by", Side::Right, true),
        ("is directly followed by", Side::Right, true),
    ] {
        g.rule("BOOL", &format!("$TEXT {phrase} $STRS"), &[Op::Contains, sd.op(), Op::Any, Op::All], move |s| {
            let anchor = text(&s[0])?;
            let (conj, xs) = items(&s[1])?;
            let atoms = xs
                .iter()
                .map(|x| {
                    let region = match (tight, x) {
                        (true, Expr::Str(w)) => {
                            window(sd, anchor.clone(), Expr::Int(word_count(w)), Unit::Words)
                        }
                        _ => c(sd.op(), vec![anchor.clone()]),
                    };
                    c(Op::Contains, vec![region, x.clone()])
                })
                .collect();
            boolean(combine(conj, false, atoms))
        });
    }

    for (phrase, negated) in [("is", false), ("are", false), ("is not", true), ("are not", true)] {
        g.rule("BOOL", &format!("$TEXT {phrase} $CASE"), &[Op::Lower, Op::Upper, Op::Capital, Op::AllCaps], move |s| {
            let e = c(op(&s[1])?, vec![text(&s[0])?]);
            boolean(if negated { not(e) } else { e })
        });
        for det in ["a", "an"] {
            g.rule("BOOL", &format!("$TEXT {phrase} {det} $TAG"), &[Op::Person, Op::Location, Op::Date, Op::Number, Op::Organization], move |s| {
                let e = c(op(&s[1])?, vec![text(&s[0])?]);
                boolean(if negated { not(e) } else { e })
            });
        }
    }

    for (phrase, o, negated) in [
        ("starts with", Op::StartsWith, false),
        ("begins with", Op::StartsWith, false),
        ("start with", Op::StartsWith, false),
        ("does not start with", Op::StartsWith, true),
        ("ends with", Op::EndsWith, false),
        ("end with", Op::EndsWith, false),
        ("does not end with", Op::EndsWith, true),
    ] {
        g.rule("BOOL", &format!("$TEXT {phrase} $STR"), &[o], move |s| {
            let e = c(o, vec![text(&s[0])?, expr(&s[1])?]);
            boolean(if negated { not(e) } else { e })
        });
    }

    for (pos, o) in [("start", Op::StartsWith), ("beginning", Op::StartsWith), ("end", Op::EndsWith)] {
        g.rule("BOOL", &format!("$TEXT is at the {pos} of a word in $SPAN"), &[Op::Any, Op::Map, o], move |s| {
            boolean(c(
                Op::Any,
                vec![c(Op::Map, vec![Expr::Func(o, vec![text(&s[0])?]), span(&s[1])?])],
            ))
        });
        g.rule("BOOL", &format!("$TEXT is at the {pos} of $TEXT"), &[o], move |s| {
            boolean(c(o, vec![text(&s[1])?, text(&s[0])?]))
        });
    }

    g.rule("BOOL", "$NUM $CMP $NUM", &[Op::Eq, Op::Ne, Op::Lt, Op::Le, Op::Gt, Op::Ge], |s| {
        boolean(c(op(&s[1])?, vec![expr(&s[0])?, expr(&s[2])?]))
    });
    g.rule("BOOL", "$TEXT $CMP $TEXT", &[Op::Eq, Op::Ne], |s| {
        let o = op(&s[1]).filter(|o| matches!(o, Op::Eq | Op::Ne))?;
        boolean(c(o, vec![text(&s[0])?, text(&s[2])?]))
    });

    let count_ops = [Op::Count, Op::Filter, Op::CharDistance, Op::Eq, Op::Lt, Op::Le, Op::Gt, Op::Ge];
    for head in ["", "there $BE ", "there $BE only "] {
        g.rule("BOOL", &format!("{head}$NUMCMP $COUNTER $REL"), &count_ops, |s| {
            let s = &s[s.len() - 3..];
            let (o, n) = cmp(&s[0])?;
            boolean(c(o, vec![counted(counter(&s[1])?, rel(&s[2])?)?, n]))
        });
    }
    g.rule("BOOL", "$NUMCMP $COUNTER $VERB $REL", &count_ops, |s| {
        let (o, n) = cmp(&s[0])?;
        let e = c(o, vec![counted(counter(&s[1])?, rel(&s[3])?)?, n]);
        boolean(if verb(&s[2])? { not(e) } else { e })
    });
    g.rule("BOOL", "$NUMCMP of $SUBJ $VERB $REL", &[Op::Count, Op::Intersection, Op::List], |s| {
        let (o, n) = cmp(&s[0])?;
        if verb(&s[2])? {
            return None;
        }
        let Rel::In(region) = rel(&s[3])? else { return None };
        let item = match subject(&s[1])? {
            Subject::Texts(_, xs) if xs.len() == 1 && is_span(&xs[0]) => xs[0].clone(),
            Subject::Texts(_, xs) => c(Op::List, xs.clone()),
            Subject::Alias(name) => Expr::Alias(name.clone()),
            _ => return None,
        };
        boolean(c(
            o,
            vec![c(Op::Count, vec![c(Op::Intersection, vec![item, region.clone()])]), n],
        ))
    });

    for (phrase, negated) in [
        ("$BE true", false),
        ("$BE present", false),
        ("exists", false),
        ("$BE not true", true),
        ("$BE false", true),
        ("$BE absent", true),
    ] {
        g.rule("BOOL", &format!("$TEXT {phrase}"), &[Op::Count, Op::Gt, Op::Contains, Op::Not], move |s| {
            let e = truth(&text(&s[0])?)?;
            boolean(if negated { not(e) } else { e })
        });
    }
    for (head, q) in [("any of", Op::Any), ("all of", Op::All), ("none of", Op::None), ("one of", Op::Any)] {
        g.rule("BOOL", &format!("{head} $TLIST $BE true"), &[q, Op::List], move |s| {
            let (_, xs) = items(&s[0])?;
            if xs.len() < 2 {
                return None;
            }
            let truths = xs.iter().map(truth).collect::<Option<Vec<_>>>()?;
            boolean(c(q, vec![c(Op::List, truths)]))
        });
    }
    g.rule("BOOL", "$TLIST $BE true", &[Op::All, Op::Set, Op::Any, Op::List], |s| {
        let (conj, xs) = items(&s[0])?;
        if xs.len() < 2 {
            return None;
        }
        let truths = xs.iter().map(truth).collect::<Option<Vec<_>>>()?;
        boolean(match conj {
            Conj::And => c(Op::All, vec![c(Op::Set, truths)]),
            _ => c(Op::Any, vec![c(Op::List, truths)]),
        })
    });

    // --- connectives
    for phrase in ["$BOOL and $BOOL", "$BOOL , and $BOOL", "$BOOL but $BOOL", "$BOOL with $BOOL", "both $BOOL and $BOOL"] {
        g.rule("BOOL", phrase, &[Op::And], |s| boolean(c(Op::And, vec![expr(&s[0])?, expr(&s[1])?])));
    }
    for phrase in ["$BOOL or $BOOL", "$BOOL , or $BOOL", "either $BOOL or $BOOL"] {
        g.rule("BOOL", phrase, &[Op::Or], |s| boolean(c(Op::Or, vec![expr(&s[0])?, expr(&s[1])?])));
    }
    for phrase in ["not $BOOL", "it is not the case that $BOOL", "it is not true that $BOOL"] {
        g.rule("BOOL", phrase, &[Op::Not], |s| boolean(not(expr(&s[0])?)));
    }

    // --- aliases
    let grammar_words = g.literals();
    for name in aliases.names() {
        if grammar_words.contains(name) {
            return Err(Error::ReservedAlias(name.to_string()));
        }
        let n = name.to_string();
        g.rule("ALIAS", name, &[], move |_| Some(Sem::Text(n.clone())));
    }

    Ok(g.build(aliases.clone(), arg_names.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_operator_is_reachable() {
        let g = build_default_grammar(&AliasSet::new()).unwrap();
        let ops = g.reachable_ops();
        let missing: Vec<_> = Op::ALL.iter().filter(|o| !ops.contains(o)).collect();
        assert!(missing.is_empty(), "unreachable operators: {missing:?}");
    }

    #[test]
    fn alias_names_cannot_shadow_keywords() {
        let mut aliases = AliasSet::new();
        aliases.insert("sentence", ["a"]).unwrap();
        assert!(matches!(
            build_default_grammar(&aliases),
            Err(Error::ReservedAlias(name)) if name == "sentence"
        ));
        let mut ok = AliasSet::new();
        ok.insert("spouse", ["wife", "husband"]).unwrap();
        let g = build_default_grammar(&ok).unwrap();
        assert!(g.dump().contains("ALIAS -> spouse"));
    }

    #[test]
    fn arg_names_extend_the_span_vocabulary() {
        let names = ArgNames::new(&["chemical"], &["disease"]);
        let g = build_grammar(&AliasSet::new(), &names).unwrap();
        assert!(g.is_keyword("chemical"));
        assert!(g.dump().contains("SPAN -> disease"));
    }
}
