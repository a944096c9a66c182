//! Deterministic synthetic relation corpus with planted cue phrases.
//!
//! Each example is `left-context X between Y right-context`. Cue phrases are
//! inserted into their region with a class-conditional probability, then the
//! gold label is flipped with probability `noise`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, EntityTag, Example, Explanation, Label, TokenSpan};
use crate::error::{Error, Result};
use crate::seed::{rng, stage_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CueRegion {
    Left,
    Between,
    Right,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CueSpec {
    pub phrase: String,
    #[serde(default = "default_region")]
    pub region: CueRegion,
    pub p_positive: f64,
    pub p_negative: f64,
}

fn default_region() -> CueRegion {
    CueRegion::Between
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub word: String,
    #[serde(default = "default_tag")]
    pub tag: EntityTag,
}

fn default_tag() -> EntityTag {
    EntityTag::None
}

/// An explanation bound to the first labeled-subset example that carries
/// `cue` in its planted region with the given label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationTemplate {
    pub cue: String,
    pub label: Label,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub vocabulary: Vec<VocabEntry>,
    pub entities: Vec<String>,
    #[serde(default = "default_entity_tag")]
    pub entity_tag: EntityTag,
    pub cues: Vec<CueSpec>,
    #[serde(default)]
    pub explanations: Vec<ExplanationTemplate>,
    pub positive_rate: f64,
    pub noise: f64,
    pub pool_size: usize,
    pub dev_size: usize,
    pub test_size: usize,
    /// Filler words between the entities: `1..=max_between`.
    #[serde(default = "default_between")]
    pub max_between: usize,
    /// Filler words on each side: `0..=max_context`.
    #[serde(default = "default_context")]
    pub max_context: usize,
    /// Probability that Y is placed before X.
    #[serde(default)]
    pub swap_rate: f64,
}

fn default_entity_tag() -> EntityTag {
    EntityTag::Person
}
fn default_between() -> usize {
    4
}
fn default_context() -> usize {
    3
}

impl SynthConfig {
    /// Spouse-style corpus: three explained positive cues, one unexplained
    /// positive cue, two explained negative cues.
    pub fn spouse_like(pool_size: usize) -> Self {
        let vocab = |w: &str, tag: EntityTag| VocabEntry {
            word: w.to_string(),
            tag,
        };
        let mut vocabulary: Vec<VocabEntry> = [
            "the", "a", "said", "with", "in", "and", "at", "was", "of", "on", "after", "to", "his",
            "her", "their", "met", "visited", "spoke", "about", "during", "event", "reported",
            "photo", "dinner", "later", "also", "old", "friend",
        ]
        .iter()
        .map(|w| vocab(w, EntityTag::None))
        .collect();
        vocabulary.push(vocab("Paris", EntityTag::Location));
        vocabulary.push(vocab("Monday", EntityTag::Date));
        vocabulary.push(vocab("2012", EntityTag::Number));
        vocabulary.push(vocab("Reuters", EntityTag::Organization));
        let cue = |p: &str, region, pp, pn| CueSpec {
            phrase: p.to_string(),
            region,
            p_positive: pp,
            p_negative: pn,
        };
        let template = |cue: &str, label, text: &str| ExplanationTemplate {
            cue: cue.to_string(),
            label,
            text: text.to_string(),
        };
        SynthConfig {
            vocabulary,
            entities: [
                "Ann", "Bob", "Carla", "Dev", "Eve", "Frank", "Gina", "Hugo", "Iris", "Jon",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            entity_tag: EntityTag::Person,
            cues: vec![
                cue("wed", CueRegion::Between, 0.3, 0.03),
                cue("married", CueRegion::Between, 0.3, 0.05),
                cue("husband", CueRegion::Right, 0.25, 0.04),
                cue("honeymoon", CueRegion::Between, 0.6, 0.02),
                cue("brother", CueRegion::Between, 0.03, 0.5),
                cue("colleague", CueRegion::Between, 0.02, 0.45),
            ],
            explanations: vec![
                template("wed", Label::Positive, "Label true because the word 'wed' is between X and Y"),
                template("married", Label::Positive, "Label true because \"married\" occurs between person 1 and person 2"),
                template("husband", Label::Positive, "Label true because 'husband' is after Y"),
                template("brother", Label::Negative, "Label false because the word \"brother\" is in between X and Y"),
                template("colleague", Label::Negative, "Label false because 'colleague' appears between them"),
            ],
            positive_rate: 0.35,
            noise: 0.05,
            pool_size,
            dev_size: 300,
            test_size: 600,
            max_between: 4,
            max_context: 3,
            swap_rate: 0.0,
        }
    }

    /// [`SynthConfig::spouse_like`] plus twenty rare positive and twenty rare
    /// negative cue words (rate 0.03 in their class, 0.002 otherwise). No
    /// explanation mentions them, so the classifier can only pick them up
    /// from enough unlabeled co-occurrences.
    pub fn spouse_long_tail(pool_size: usize) -> Self {
        const POSITIVE: [&str; 20] = [
            "bride", "groom", "wedding", "spouse", "fiancee", "newlywed", "vows", "engaged", "widow",
            "anniversary", "eloped", "betrothed", "nuptials", "partner", "courtship", "romance", "beloved",
            "darling", "sweetheart", "ring",
        ];
        const NEGATIVE: [&str; 20] = [
            "sister", "cousin", "coach", "manager", "rival", "neighbor", "classmate", "uncle", "aunt", "boss",
            "teammate", "mentor", "landlord", "tenant", "client", "lawyer", "doctor", "nephew", "niece",
            "roommate",
        ];
        let mut cfg = Self::spouse_like(pool_size);
        let rare = |w: &str, pp, pn| CueSpec {
            phrase: w.to_string(),
            region: CueRegion::Between,
            p_positive: pp,
            p_negative: pn,
        };
        cfg.cues.extend(POSITIVE.iter().map(|w| rare(w, 0.03, 0.002)));
        cfg.cues.extend(NEGATIVE.iter().map(|w| rare(w, 0.002, 0.03)));
        cfg
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.noise) {
            return Err(Error::invalid(format!(
                "noise rate {} outside [0, 0.5)",
                self.noise
            )));
        }
        if !(0.0..=1.0).contains(&self.positive_rate) || !(0.0..=1.0).contains(&self.swap_rate) {
            return Err(Error::invalid("rates must lie in [0, 1]"));
        }
        for c in &self.cues {
            if !(0.0..=1.0).contains(&c.p_positive) || !(0.0..=1.0).contains(&c.p_negative) {
                return Err(Error::invalid(format!("cue `{}` has probability outside [0, 1]", c.phrase)));
            }
            if c.phrase.split_whitespace().count() == 0 {
                return Err(Error::invalid("empty cue phrase"));
            }
        }
        if self.vocabulary.is_empty() || self.entities.is_empty() {
            return Err(Error::invalid("vocabulary and entities must be non-empty"));
        }
        if self.max_between == 0 {
            return Err(Error::invalid("max_between must be at least 1"));
        }
        for t in &self.explanations {
            if !self.cues.iter().any(|c| c.phrase == t.cue) {
                return Err(Error::invalid(format!("explanation references unknown cue `{}`", t.cue)));
            }
        }
        Ok(())
    }
}

struct Generated {
    example: Example,
    /// Cue phrases planted, by index into `SynthConfig::cues`.
    planted: Vec<usize>,
    clean_label: Label,
}

fn push_words(tokens: &mut Vec<String>, tags: &mut Vec<EntityTag>, words: &[(String, EntityTag)]) {
    for (w, t) in words {
        tokens.push(w.clone());
        tags.push(*t);
    }
}

fn generate(cfg: &SynthConfig, rng: &mut ChaCha8Rng, id: String) -> Generated {
    let clean_label = Label::from_bool(rng.gen_bool(cfg.positive_rate));
    let filler = |rng: &mut ChaCha8Rng, n: usize| -> Vec<(String, EntityTag)> {
        (0..n)
            .map(|_| {
                let v = cfg.vocabulary.choose(rng).expect("vocabulary non-empty");
                (v.word.clone(), v.tag)
            })
            .collect()
    };
    let mut left = {
        let n = rng.gen_range(0..=cfg.max_context);
        filler(rng, n)
    };
    let mut between = {
        let n = rng.gen_range(1..=cfg.max_between);
        filler(rng, n)
    };
    let mut right = {
        let n = rng.gen_range(0..=cfg.max_context);
        filler(rng, n)
    };

    let mut planted = Vec::new();
    for (k, cue) in cfg.cues.iter().enumerate() {
        let p = if clean_label.is_positive() {
            cue.p_positive
        } else {
            cue.p_negative
        };
        if !rng.gen_bool(p) {
            continue;
        }
        planted.push(k);
        let region = match cue.region {
            CueRegion::Left => &mut left,
            CueRegion::Between => &mut between,
            CueRegion::Right => &mut right,
        };
        let at = rng.gen_range(0..=region.len());
        let words: Vec<(String, EntityTag)> = cue
            .phrase
            .split_whitespace()
            .map(|w| (w.to_string(), EntityTag::None))
            .collect();
        region.splice(at..at, words);
    }

    let mut first = cfg.entities.choose(rng).expect("entities non-empty").clone();
    let mut second = cfg.entities.choose(rng).expect("entities non-empty").clone();
    while second == first && cfg.entities.len() > 1 {
        second = cfg.entities.choose(rng).expect("entities non-empty").clone();
    }
    let swapped = rng.gen_bool(cfg.swap_rate);
    if swapped {
        std::mem::swap(&mut first, &mut second);
    }

    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    push_words(&mut tokens, &mut tags, &left);
    let first_span = TokenSpan::new(tokens.len(), tokens.len() + 1);
    tokens.push(first);
    tags.push(cfg.entity_tag);
    push_words(&mut tokens, &mut tags, &between);
    let second_span = TokenSpan::new(tokens.len(), tokens.len() + 1);
    tokens.push(second);
    tags.push(cfg.entity_tag);
    push_words(&mut tokens, &mut tags, &right);

    let (span_x, span_y) = if swapped {
        (second_span, first_span)
    } else {
        (first_span, second_span)
    };
    let gold = if rng.gen_bool(cfg.noise) {
        clean_label.flip()
    } else {
        clean_label
    };
    Generated {
        example: Example {
            id,
            tokens,
            entity_tags: tags,
            span_x,
            span_y,
            gold_label: Some(gold),
            extra_features: Vec::new(),
        },
        planted,
        clean_label,
    }
}

fn split(cfg: &SynthConfig, seed: u64, name: &str, size: usize) -> Vec<Example> {
    let mut rng = rng(stage_seed(seed, &format!("synth:{name}")));
    (0..size)
        .map(|k| generate(cfg, &mut rng, format!("{name}-{k}")).example)
        .collect()
}

/// Generates a dataset that is a pure function of `(cfg, seed)`.
///
/// Pool examples keep their gold labels for evaluation; pipeline stages
/// must not read them.
pub fn synth_corpus(cfg: &SynthConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let unlabeled_pool = split(cfg, seed, "pool", cfg.pool_size);
    let dev = split(cfg, seed, "dev", cfg.dev_size);
    let test = split(cfg, seed, "test", cfg.test_size);

    let mut rng = rng(stage_seed(seed, "synth:labeled"));
    let mut labeled_subset = Vec::new();
    for (k, template) in cfg.explanations.iter().enumerate() {
        let cue = cfg
            .cues
            .iter()
            .position(|c| c.phrase == template.cue)
            .expect("validated");
        let mut found = None;
        for _ in 0..100_000 {
            let g = generate(cfg, &mut rng, format!("lab-{k}"));
            if g.planted.contains(&cue)
                && g.clean_label == template.label
                && g.example.gold_label == Some(template.label)
            {
                found = Some(g.example);
                break;
            }
        }
        let example = found.ok_or_else(|| {
            Error::invalid(format!(
                "could not generate an example for explanation on cue `{}`",
                template.cue
            ))
        })?;
        let explanation = Explanation {
            id: format!("exp-{k}"),
            example_id: example.id.clone(),
            label: template.label,
            text: template.text.clone(),
        };
        labeled_subset.push((example, explanation));
    }
    Ok(Dataset {
        labeled_subset,
        unlabeled_pool,
        dev,
        test,
    })
}
