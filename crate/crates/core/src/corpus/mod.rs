//! Examples, explanations, alias lists and the JSON Lines formats they are
//! stored in.
//!
//! Inputs arrive pre-tokenized and pre-tagged. Entity X is always the entity
//! of `span_x`, regardless of where it sits in the sentence.

mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub use synth::{synth_corpus, CueRegion, CueSpec, ExplanationTemplate, SynthConfig, VocabEntry};

/// Binary class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_positive() { "true" } else { "false" })
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_bool(self.is_positive())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        label_from_value(&value).map_err(serde::de::Error::custom)
    }
}

fn label_from_value(value: &Value) -> std::result::Result<Label, String> {
    match value {
        Value::Bool(b) => Ok(Label::from_bool(*b)),
        Value::Number(n) => n
            .as_i64()
            .and_then(Label::from_sign)
            .ok_or_else(|| format!("label {n} outside {{-1, +1}}")),
        other => Err(format!("label {other} outside {{-1, +1}}")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityTag {
    Person,
    Location,
    Date,
    Number,
    Organization,
    None,
}

impl EntityTag {
    pub const NAMED: [EntityTag; 5] = [
        EntityTag::Person,
        EntityTag::Location,
        EntityTag::Date,
        EntityTag::Number,
        EntityTag::Organization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EntityTag::Person => "person",
            EntityTag::Location => "location",
            EntityTag::Date => "date",
            EntityTag::Number => "number",
            EntityTag::Organization => "organization",
            EntityTag::None => "none",
        }
    }
}

/// Half-open token range `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        TokenSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &TokenSpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &TokenSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl Serialize for TokenSpan {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.start, self.end].serialize(s)
    }
}

impl<'de> Deserialize<'de> for TokenSpan {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [start, end] = <[usize; 2]>::deserialize(d)?;
        Ok(TokenSpan { start, end })
    }
}

/// One candidate relation mention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub tokens: Vec<String>,
    pub entity_tags: Vec<EntityTag>,
    pub span_x: TokenSpan,
    pub span_y: TokenSpan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<Label>,
    /// Opaque precomputed features (e.g. dependency paths) passed through to
    /// the discriminative model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_features: Vec<String>,
}

impl Example {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.entity_tags.len() != self.tokens.len() {
            return Err(format!(
                "entity_tags: length {} differs from tokens length {}",
                self.entity_tags.len(),
                self.tokens.len()
            ));
        }
        for (field, span) in [("span_x", self.span_x), ("span_y", self.span_y)] {
            if span.start == span.end {
                return Err(format!("{field}: empty span"));
            }
            if span.start > span.end || span.end > self.tokens.len() {
                return Err(format!(
                    "{field}: span ({}, {}) out of range for {} tokens",
                    span.start,
                    span.end,
                    self.tokens.len()
                ));
            }
        }
        if self.span_x.overlaps(&self.span_y) {
            return Err("span_x: overlaps span_y".to_string());
        }
        Ok(())
    }

    /// The entity spans ordered by position: (earlier, later).
    pub fn ordered_spans(&self) -> (TokenSpan, TokenSpan) {
        if self.span_x.start <= self.span_y.start {
            (self.span_x, self.span_y)
        } else {
            (self.span_y, self.span_x)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub id: String,
    pub example_id: String,
    pub label: Label,
    pub text: String,
}

/// Named word lists that explanations may refer to ("a spouse word").
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AliasSet(BTreeMap<String, BTreeSet<String>>);

impl AliasSet {
    pub fn new() -> Self {
        AliasSet::default()
    }

    pub fn insert<I, S>(&mut self, name: &str, words: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let name = name.trim().to_lowercase();
        if name.is_empty() || name.split_whitespace().count() != 1 {
            return Err(Error::invalid(format!(
                "alias name `{name}` must be a single token"
            )));
        }
        let words: BTreeSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(Error::invalid(format!("alias `{name}` has no words")));
        }
        self.0.insert(name, words);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&BTreeSet<String>> {
        self.0.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: BTreeMap<String, Vec<String>> =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let mut set = AliasSet::new();
        for (name, words) in raw {
            set.insert(&name, words)?;
        }
        Ok(set)
    }
}

/// Entity names that explanations use to refer to X and Y ("the chemical").
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgNames {
    #[serde(default)]
    pub x: Vec<String>,
    #[serde(default)]
    pub y: Vec<String>,
}

impl ArgNames {
    pub fn new<S: AsRef<str>>(x: &[S], y: &[S]) -> Self {
        let norm = |v: &[S]| v.iter().map(|s| s.as_ref().trim().to_lowercase()).collect();
        ArgNames {
            x: norm(x),
            y: norm(y),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub labeled_subset: Vec<(Example, Explanation)>,
    pub unlabeled_pool: Vec<Example>,
    pub dev: Vec<Example>,
    pub test: Vec<Example>,
}

impl Dataset {
    pub fn explanations(&self) -> Vec<Explanation> {
        self.labeled_subset.iter().map(|(_, e)| e.clone()).collect()
    }

    pub fn labeled_examples(&self) -> Vec<Example> {
        self.labeled_subset.iter().map(|(x, _)| x.clone()).collect()
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

pub fn parse_example_line(line: &str) -> std::result::Result<Example, String> {
    let example: Example = serde_json::from_str(line).map_err(|e| e.to_string())?;
    example.validate()?;
    Ok(example)
}

pub fn load_examples(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let record = |message: String| Error::Record {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let example = parse_example_line(&line).map_err(record)?;
        if !seen.insert(example.id.clone()) {
            return Err(record(format!("id: duplicate id `{}`", example.id)));
        }
        out.push(example);
    }
    Ok(out)
}

pub fn load_explanations(
    path: impl AsRef<Path>,
    examples: &HashMap<String, Example>,
) -> Result<Vec<Explanation>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    let mut missing = Vec::new();
    let mut seen = HashSet::new();
    for (line_no, line) in read_lines(path)? {
        let record = |message: String| Error::Record {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let explanation: Explanation =
            serde_json::from_str(&line).map_err(|e| record(e.to_string()))?;
        if explanation.text.trim().is_empty() {
            return Err(record("text: empty explanation".into()));
        }
        if !seen.insert(explanation.id.clone()) {
            return Err(record(format!("id: duplicate id `{}`", explanation.id)));
        }
        if !examples.contains_key(&explanation.example_id) {
            missing.push(explanation.example_id.clone());
        }
        out.push(explanation);
    }
    if !missing.is_empty() {
        return Err(Error::UnknownExamples(missing));
    }
    Ok(out)
}

pub fn index_examples<'a>(examples: impl IntoIterator<Item = &'a Example>) -> HashMap<String, Example> {
    examples
        .into_iter()
        .map(|e| (e.id.clone(), e.clone()))
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).map_err(|e| Error::json(path, e))?;
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads one JSON record per non-blank line.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    read_lines(path)?
        .into_iter()
        .map(|(line_no, line)| {
            serde_json::from_str(&line).map_err(|e| Error::Record {
                path: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Writes `value` as pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut buf = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    buf.push(b'\n');
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub fn append_jsonl<T: Serialize>(path: impl AsRef<Path>, record: &T) -> Result<()> {
    let path = path.as_ref();
    let mut line = serde_json::to_vec(record).map_err(|e| Error::json(path, e))?;
    line.push(b'\n');
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    file.write_all(&line).map_err(|e| Error::io(path, e))
}
