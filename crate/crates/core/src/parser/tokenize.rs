use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "text", rename_all = "lowercase")]
pub enum Token {
    /// A lowercased word or punctuation mark.
    Word(String),
    /// The contents of a quoted string, case preserved.
    Quoted(String),
}

impl Token {
    pub fn word(&self) -> Option<&str> {
        match self {
            Token::Word(w) => Some(w),
            Token::Quoted(_) => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Word(w) => f.write_str(w),
            Token::Quoted(q) => write!(f, "QUOTED({q})"),
        }
    }
}

fn closers(open: char) -> &'static [char] {
    match open {
        '"' | '\u{201d}' => &['"', '\u{201d}'],
        '\u{201c}' => &['\u{201d}', '"'],
        '`' => &['\'', '\u{2019}', '`'],
        _ => &['\'', '\u{2019}'],
    }
}

fn is_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | '`' | '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}')
}

/// Splits an explanation into words and quoted strings.
///
/// A quote character opens a string only at the start of a token; inside a
/// word it is kept (`don't`). Single-quote strings close at a quote that is
/// not followed by a letter or digit, so `'his wife's'` stays one string.
/// `(`, `)` and `,` become tokens of their own; other punctuation is dropped,
/// except a `.` or `,` inside a number.
pub fn tokenize_explanation(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, tokens: &mut Vec<Token>| {
        if !word.is_empty() {
            tokens.push(Token::Word(word.to_lowercase()));
            word.clear();
        }
    };
    let digit_at = |i: usize| chars.get(i).is_some_and(|(_, c)| c.is_ascii_digit());

    let mut i = 0;
    while i < chars.len() {
        let (offset, ch) = chars[i];
        if is_quote(ch) && word.is_empty() {
            let strict = !matches!(ch, '"' | '\u{201c}' | '\u{201d}');
            let close = (i + 1..chars.len()).find(|&j| {
                closers(ch).contains(&chars[j].1)
                    && (!strict || chars.get(j + 1).is_none_or(|(_, n)| !n.is_alphanumeric()))
            });
            let Some(j) = close else {
                return Err(Error::UnbalancedQuote(offset));
            };
            let inner: String = chars[i + 1..j].iter().map(|(_, c)| *c).collect();
            tokens.push(Token::Quoted(inner.trim().to_string()));
            i = j + 1;
            continue;
        }
        match ch {
            c if c.is_whitespace() => flush(&mut word, &mut tokens),
            '.' | ',' if word.chars().all(|c| c.is_ascii_digit()) && !word.is_empty() && digit_at(i + 1) => {
                if ch == '.' {
                    word.push('.');
                }
            }
            '(' | ')' | ',' => {
                flush(&mut word, &mut tokens);
                tokens.push(Token::Word(ch.to_string()));
            }
            '.' | '!' | '?' | ';' | ':' => flush(&mut word, &mut tokens),
            c => word.push(c),
        }
        i += 1;
    }
    flush(&mut word, &mut tokens);
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Token {
        Token::Word(s.into())
    }

    fn q(s: &str) -> Token {
        Token::Quoted(s.into())
    }

    #[test]
    fn splits_words_and_quotes() {
        let toks = tokenize_explanation("Label true because 'his wife' is right before person 2.").unwrap();
        assert_eq!(
            toks,
            vec![
                w("label"),
                w("true"),
                w("because"),
                q("his wife"),
                w("is"),
                w("right"),
                w("before"),
                w("person"),
                w("2"),
            ]
        );
    }

    #[test]
    fn mixed_quote_styles() {
        let toks = tokenize_explanation("person Y is preceded by `beau'.").unwrap();
        assert_eq!(toks.last(), Some(&q("beau")));
        let toks = tokenize_explanation("\u{201c}wed\u{201d} occurs, and \"Ser\" isn't").unwrap();
        assert_eq!(toks, vec![q("wed"), w("occurs"), w(","), w("and"), q("Ser"), w("isn't")]);
    }

    #[test]
    fn apostrophes_inside_quotes() {
        let toks = tokenize_explanation("'his wife's' is before Y").unwrap();
        assert_eq!(toks[0], q("his wife's"));
    }

    #[test]
    fn unbalanced_quote_reports_offset() {
        match tokenize_explanation("X is \"wed before Y") {
            Err(Error::UnbalancedQuote(5)) => {}
            other => panic!("{other:?}"),
        }
        assert!(tokenize_explanation("the disease.\"").is_err());
    }

    #[test]
    fn numbers_keep_their_punctuation() {
        let toks = tokenize_explanation("at least 2.5 or 1,000 words (X, Y).").unwrap();
        assert_eq!(
            toks,
            vec![
                w("at"),
                w("least"),
                w("2.5"),
                w("or"),
                w("1000"),
                w("words"),
                w("("),
                w("x"),
                w(","),
                w("y"),
                w(")"),
            ]
        );
    }
}
