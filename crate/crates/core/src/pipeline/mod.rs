//! End-to-end runs: explanations to candidates, filtered LFs, label matrix,
//! probabilistic labels, classifier and metrics.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aggregator::{
    build_label_matrix, exact_marginals, fit_generative, gibbs_marginals, majority_vote, AggregatorConfig, Fit,
    GradientMode, LabelMatrix, Marginals,
};
use crate::corpus::{
    index_examples, load_examples, load_explanations, write_json, write_jsonl, AliasSet, ArgNames, Dataset, Example,
    Explanation,
};
use crate::discriminative::{extract_all, predict_all, train_noise_aware, evaluate, LinearModel, Metrics, TrainConfig};
use crate::error::{Error, Result};
use crate::filterbank::{
    candidates_from_parses, run_filter_bank, Candidate, FilterOptions, FilterReport, Verdict, VerdictEntry,
    MAX_SIGNATURE_EXAMPLES,
};
use crate::grammar::{build_grammar, Grammar, LogicalForm, DEFAULT_BEAM, DEFAULT_MAX_SKIP};
use crate::lf_exec::coverage;
use crate::parser::{parse_all, ParseOutcome};
use crate::seed::stage_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrammarCaps {
    pub max_skip: usize,
    pub beam: usize,
}

impl Default for GrammarCaps {
    fn default() -> Self {
        GrammarCaps {
            max_skip: DEFAULT_MAX_SKIP,
            beam: DEFAULT_BEAM,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSettings {
    /// When false every parsed candidate goes straight to the label model.
    pub enabled: bool,
    pub max_signature_examples: usize,
}

impl Default for FilterSettings {
    fn default() -> Self {
        FilterSettings {
            enabled: true,
            max_signature_examples: MAX_SIGNATURE_EXAMPLES,
        }
    }
}

/// Default accuracy-prior strength for the aggregator. Parsed LFs vote one
/// label or abstain; without a prior the likelihood prefers flipping the sign
/// of every LF of one polarity.
pub const PARSED_LF_ACC_PRIOR: f64 = 0.1;

fn pipeline_aggregator() -> AggregatorConfig {
    AggregatorConfig {
        l2: PARSED_LF_ACC_PRIOR,
        ..AggregatorConfig::default()
    }
}

fn aggregator_over_default<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<AggregatorConfig, D::Error> {
    use serde::de::Error as _;
    let given = serde_json::Value::deserialize(d)?;
    let serde_json::Value::Object(given) = given else {
        return Err(D::Error::custom("aggregator config must be an object"));
    };
    let mut base = serde_json::to_value(pipeline_aggregator()).map_err(D::Error::custom)?;
    if let serde_json::Value::Object(fields) = &mut base {
        fields.extend(given);
    }
    serde_json::from_value(base).map_err(D::Error::custom)
}

/// Run configuration. Relative paths are resolved against the directory
/// of the config file when loaded with [`PipelineConfig::load`].
///
/// Each stage draws its seed from the master seed and the stage name; the
/// per-stage `seed` fields are mixed in, so changing one of them only
/// affects that stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// The pool. Explained examples must appear here too.
    pub examples: PathBuf,
    pub explanations: PathBuf,
    pub aliases: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub arg_names: ArgNames,
    pub grammar: GrammarCaps,
    pub filter: FilterSettings,
    /// Keys given in a config file override the pipeline's aggregator
    /// defaults, which differ from [`AggregatorConfig::default`] in `l2`.
    #[serde(deserialize_with = "aggregator_over_default")]
    pub aggregator: AggregatorConfig,
    pub discriminative: TrainConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            examples: PathBuf::from("examples.jsonl"),
            explanations: PathBuf::from("explanations.jsonl"),
            aliases: None,
            dev: None,
            test: None,
            arg_names: ArgNames::default(),
            grammar: GrammarCaps::default(),
            filter: FilterSettings::default(),
            aggregator: pipeline_aggregator(),
            discriminative: TrainConfig::default(),
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: PipelineConfig = crate::corpus::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.examples);
        fix(&mut self.explanations);
        fix(&mut self.out_dir);
        for p in [&mut self.aliases, &mut self.dev, &mut self.test].into_iter().flatten() {
            fix(p);
        }
    }

    /// Input files that must exist before a run starts.
    pub fn input_files(&self) -> Vec<&Path> {
        let mut files = vec![self.examples.as_path(), self.explanations.as_path()];
        files.extend([&self.aliases, &self.dev, &self.test].into_iter().flatten().map(PathBuf::as_path));
        files
    }

    pub fn check_files(&self) -> Result<()> {
        let missing: Vec<String> = self
            .input_files()
            .into_iter()
            .filter(|p| !p.is_file())
            .map(|p| p.display().to_string())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(format!("missing input file(s): {}", missing.join(", "))))
        }
    }

    pub fn aggregator_seed(&self) -> u64 {
        stage_seed(self.seed, "aggregate") ^ self.aggregator.seed
    }

    pub fn train_seed(&self) -> u64 {
        stage_seed(self.seed, "train") ^ self.discriminative.seed
    }

    pub fn filter_seed(&self) -> u64 {
        stage_seed(self.seed, "filter")
    }

    pub fn grammar(&self, aliases: &AliasSet) -> Result<Grammar> {
        Ok(build_grammar(aliases, &self.arg_names)?.with_caps(self.grammar.max_skip, self.grammar.beam))
    }
}

/// Everything a run reads, in memory. Pool examples never carry gold labels.
#[derive(Clone, Debug, Default)]
pub struct Inputs {
    pub pool: Vec<Example>,
    pub labeled: Vec<(Example, Explanation)>,
    pub dev: Vec<Example>,
    pub test: Vec<Example>,
    pub aliases: AliasSet,
}

fn hide_gold(examples: &[Example]) -> Vec<Example> {
    examples
        .iter()
        .map(|e| Example {
            gold_label: None,
            ..e.clone()
        })
        .collect()
}

impl Inputs {
    /// The labeled subset is prepended to the pool, since it is drawn from it.
    pub fn from_dataset(d: &Dataset, aliases: AliasSet) -> Self {
        let mut pool = d.labeled_examples();
        pool.extend(d.unlabeled_pool.iter().cloned());
        Inputs {
            pool: hide_gold(&pool),
            labeled: d.labeled_subset.clone(),
            dev: d.dev.clone(),
            test: d.test.clone(),
            aliases,
        }
    }

    pub fn load(config: &PipelineConfig) -> Result<Self> {
        config.check_files()?;
        let aliases = match &config.aliases {
            Some(p) => AliasSet::load(p)?,
            None => AliasSet::new(),
        };
        let examples = load_examples(&config.examples)?;
        let index = index_examples(&examples);
        let explanations = load_explanations(&config.explanations, &index)?;
        let labeled = explanations
            .into_iter()
            .map(|e| (index[&e.example_id].clone(), e))
            .collect();
        let load_eval = |p: &Option<PathBuf>| -> Result<Vec<Example>> {
            let Some(p) = p else { return Ok(Vec::new()) };
            let ex = load_examples(p)?;
            if let Some(e) = ex.iter().find(|e| e.gold_label.is_none()) {
                return Err(Error::invalid(format!("{}: example {} has no gold label", p.display(), e.id)));
            }
            Ok(ex)
        };
        Ok(Inputs {
            pool: hide_gold(&examples),
            labeled,
            dev: load_eval(&config.dev)?,
            test: load_eval(&config.test)?,
            aliases,
        })
    }

    pub fn explanations(&self) -> Vec<Explanation> {
        self.labeled.iter().map(|(_, e)| e.clone()).collect()
    }
}

/// Parses every explanation; candidates come back in explanation order.
pub fn parse_stage(grammar: &Grammar, explanations: &[Explanation]) -> (Vec<Candidate>, Vec<ParseOutcome>) {
    let outcomes = parse_all(grammar, explanations);
    let candidates = outcomes
        .iter()
        .flat_map(|o| candidates_from_parses(&o.explanation_id, &o.lfs))
        .collect();
    (candidates, outcomes)
}

/// Runs the filter bank, or passes every candidate through when disabled.
pub fn filter_stage(
    candidates: &[Candidate],
    inputs: &Inputs,
    config: &PipelineConfig,
) -> Result<(Vec<Candidate>, FilterReport)> {
    let (survivors, report) = if config.filter.enabled {
        let options = FilterOptions {
            max_signature_examples: config.filter.max_signature_examples,
            seed: config.filter_seed(),
        };
        run_filter_bank(candidates, &inputs.labeled, &inputs.pool, &inputs.aliases, &options)
    } else {
        let report = FilterReport {
            candidates_in: candidates.len(),
            survivors: candidates.len(),
            pool_size: inputs.pool.len(),
            verdicts: candidates
                .iter()
                .map(|c| VerdictEntry {
                    id: c.id.clone(),
                    explanation_id: c.explanation_id.clone(),
                    lf: c.lf.clone(),
                    verdict: Verdict::Kept,
                    coverage: None,
                })
                .collect(),
            ..FilterReport::default()
        };
        (candidates.to_vec(), report)
    };
    if survivors.is_empty() {
        return Err(Error::NoSurvivors(Box::new(report)));
    }
    Ok((survivors, report))
}

/// One surviving LF with its pool coverage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfRecord {
    pub id: String,
    pub explanation_id: String,
    pub lf: LogicalForm,
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRows {
    pub examples: usize,
    pub majority_vote: Metrics,
    pub aggregator: Metrics,
    pub discriminative: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregatorSummary {
    pub mode: GradientMode,
    pub objective: f64,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Outcome of a run. Wall-clock timings are kept out of the serialized
/// form so that identical runs produce identical bytes; they are written
/// to `timings.json` instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub pool_size: usize,
    pub explanations: usize,
    pub parses: Vec<ParseOutcomeRecord>,
    pub filter: FilterReport,
    pub lfs: Vec<LfRecord>,
    pub aggregator: AggregatorSummary,
    /// Keyed by split name (`dev`, `test`).
    pub evaluation: BTreeMap<String, EvalRows>,
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcomeRecord {
    pub explanation_id: String,
    pub candidates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<&ParseOutcome> for ParseOutcomeRecord {
    fn from(o: &ParseOutcome) -> Self {
        ParseOutcomeRecord {
            explanation_id: o.explanation_id.clone(),
            candidates: o.candidates,
            error: o.error.clone(),
        }
    }
}

/// Label model, classifier and evaluation for a fixed set of LFs.
#[derive(Clone, Debug)]
pub struct ModelOutputs {
    pub label_matrix: LabelMatrix,
    pub fit: Fit,
    pub marginals: Marginals,
    pub model: LinearModel,
    pub evaluation: BTreeMap<String, EvalRows>,
    pub timings: Vec<StageTiming>,
}

/// Marginals file: one probability per pool example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalsRecord {
    pub example_ids: Vec<String>,
    pub p: Marginals,
}

/// Label-model marginals for `lm`, exact or sampled as configured.
pub fn marginals_for(fit: &Fit, lm: &LabelMatrix, config: &PipelineConfig) -> Result<Marginals> {
    match config.aggregator.mode {
        GradientMode::Exact => exact_marginals(&fit.weights, lm),
        GradientMode::Gibbs => gibbs_marginals(
            &fit.weights,
            lm,
            config.aggregator.samples,
            config.aggregator.burn_in,
            config.aggregator_seed(),
        ),
    }
}

fn timed<T>(timings: &mut Vec<StageTiming>, stage: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.push(StageTiming {
        stage: stage.to_string(),
        seconds: start.elapsed().as_secs_f64(),
    });
    out
}

/// Scores majority vote, the label model and the classifier on `split`.
pub fn evaluate_split(
    lfs: &[(String, LogicalForm)],
    fit: &Fit,
    model: &LinearModel,
    split: &[Example],
    aliases: &AliasSet,
    config: &PipelineConfig,
) -> Result<EvalRows> {
    let lm = build_label_matrix(lfs, split, aliases)?;
    let direct = marginals_for(fit, &lm, config)?;
    Ok(EvalRows {
        examples: split.len(),
        majority_vote: evaluate(&majority_vote(&lm), split, 0.5)?,
        aggregator: evaluate(&direct, split, 0.5)?,
        discriminative: evaluate(&predict_all(model, split), split, model.threshold)?,
    })
}

pub fn model_stage(
    lfs: &[(String, LogicalForm)],
    pool: &[Example],
    inputs: &Inputs,
    config: &PipelineConfig,
) -> Result<ModelOutputs> {
    let mut timings = Vec::new();
    let label_matrix = timed(&mut timings, "label_matrix", || build_label_matrix(lfs, pool, &inputs.aliases))?;
    let agg_config = AggregatorConfig {
        seed: config.aggregator_seed(),
        ..config.aggregator.clone()
    };
    let fit = timed(&mut timings, "aggregate", || fit_generative(&label_matrix, &agg_config))?;
    let marginals = marginals_for(&fit, &label_matrix, config)?;
    let train_config = TrainConfig {
        seed: config.train_seed(),
        ..config.discriminative.clone()
    };
    let model = timed(&mut timings, "train", || {
        train_noise_aware(&extract_all(pool), &marginals, &train_config)
    })?
    .model;
    let mut evaluation = BTreeMap::new();
    timed(&mut timings, "evaluate", || -> Result<()> {
        for (name, split) in [("dev", &inputs.dev), ("test", &inputs.test)] {
            if !split.is_empty() {
                evaluation.insert(
                    name.to_string(),
                    evaluate_split(lfs, &fit, &model, split, &inputs.aliases, config)?,
                );
            }
        }
        Ok(())
    })?;
    Ok(ModelOutputs {
        label_matrix,
        fit,
        marginals,
        model,
        evaluation,
        timings,
    })
}

pub fn lf_pairs(survivors: &[Candidate]) -> Vec<(String, LogicalForm)> {
    survivors.iter().map(|c| (c.id.clone(), c.lf.clone())).collect()
}

/// Surviving LFs with their coverage on the label matrix's examples.
pub fn roster(survivors: &[Candidate], lm: &LabelMatrix) -> Vec<LfRecord> {
    survivors
        .iter()
        .zip(&lm.rows)
        .map(|(c, row)| LfRecord {
            id: c.id.clone(),
            explanation_id: c.explanation_id.clone(),
            lf: c.lf.clone(),
            coverage: coverage(row),
        })
        .collect()
}

/// Intermediate results of the front half of a run.
pub struct Front {
    pub candidates: Vec<Candidate>,
    pub outcomes: Vec<ParseOutcome>,
    pub survivors: Vec<Candidate>,
    pub filter: FilterReport,
    pub timings: Vec<StageTiming>,
}

/// Parse and filter.
pub fn front_stages(inputs: &Inputs, config: &PipelineConfig, extra: &[Candidate]) -> Result<Front> {
    let mut timings = Vec::new();
    let grammar = config.grammar(&inputs.aliases)?;
    let (mut candidates, outcomes) = timed(&mut timings, "parse", || parse_stage(&grammar, &inputs.explanations()));
    candidates.extend(extra.iter().cloned());
    let (survivors, filter) = timed(&mut timings, "filter", || filter_stage(&candidates, inputs, config))?;
    Ok(Front {
        candidates,
        outcomes,
        survivors,
        filter,
        timings,
    })
}

/// Runs every stage on in-memory inputs; `extra` candidates are added to
/// the parser's before filtering. Artifacts go to `out_dir` when given.
pub fn run_on(inputs: &Inputs, config: &PipelineConfig, extra: &[Candidate], out_dir: Option<&Path>) -> Result<RunReport> {
    let front = front_stages(inputs, config, extra)?;
    let lfs = lf_pairs(&front.survivors);
    let out = model_stage(&lfs, &inputs.pool, inputs, config)?;
    let mut timings = front.timings;
    timings.extend(out.timings.iter().cloned());
    let report = RunReport {
        pool_size: inputs.pool.len(),
        explanations: inputs.labeled.len(),
        parses: front.outcomes.iter().map(ParseOutcomeRecord::from).collect(),
        filter: front.filter,
        lfs: roster(&front.survivors, &out.label_matrix),
        aggregator: AggregatorSummary {
            mode: config.aggregator.mode,
            objective: out.fit.objective,
            epochs: config.aggregator.epochs,
        },
        evaluation: out.evaluation.clone(),
        timings,
    };
    if let Some(dir) = out_dir {
        write_artifacts(dir, &front.candidates, &report, &out)?;
    }
    Ok(report)
}

pub fn write_artifacts(dir: &Path, candidates: &[Candidate], report: &RunReport, out: &ModelOutputs) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_jsonl(dir.join("candidates.jsonl"), candidates)?;
    write_json(&dir.join("filter_report.json"), &report.filter)?;
    write_jsonl(dir.join("lfs.jsonl"), &report.lfs)?;
    write_jsonl(dir.join("label_matrix.jsonl"), &out.label_matrix.to_records())?;
    write_json(&dir.join("weights.json"), &out.fit.weights)?;
    write_json(
        &dir.join("marginals.json"),
        &MarginalsRecord {
            example_ids: out.label_matrix.example_ids.clone(),
            p: out.marginals.clone(),
        },
    )?;
    write_json(&dir.join("model.json"), &out.model)?;
    write_json(&dir.join("report.json"), report)?;
    write_json(&dir.join("timings.json"), &report.timings)
}

/// Loads the configured files, runs every stage and writes all artifacts
/// to the configured output directory.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport> {
    let inputs = Inputs::load(config)?;
    run_on(&inputs, config, &[], Some(&config.out_dir))
}

/// Result of one scaling step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub pool_size: usize,
    pub report: RunReport,
}

/// Filters once on the full pool, then reruns the label model and the
/// classifier on nested pool prefixes of the given sizes.
pub fn scaling_on(inputs: &Inputs, config: &PipelineConfig, sizes: &[usize]) -> Result<Vec<ScalingPoint>> {
    if sizes.len() < 2 {
        return Err(Error::invalid("scaling needs at least two pool sizes"));
    }
    if sizes.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("pool sizes must be ascending"));
    }
    if let Some(&too_big) = sizes.iter().find(|&&s| s > inputs.pool.len() || s == 0) {
        return Err(Error::invalid(format!(
            "pool size {too_big} outside 1..={}",
            inputs.pool.len()
        )));
    }
    let front = front_stages(inputs, config, &[])?;
    let lfs = lf_pairs(&front.survivors);
    sizes
        .iter()
        .map(|&size| {
            let pool = &inputs.pool[..size];
            let out = model_stage(&lfs, pool, inputs, config)?;
            Ok(ScalingPoint {
                pool_size: size,
                report: RunReport {
                    pool_size: size,
                    explanations: inputs.labeled.len(),
                    parses: front.outcomes.iter().map(ParseOutcomeRecord::from).collect(),
                    filter: front.filter.clone(),
                    lfs: roster(&front.survivors, &out.label_matrix),
                    aggregator: AggregatorSummary {
                        mode: config.aggregator.mode,
                        objective: out.fit.objective,
                        epochs: config.aggregator.epochs,
                    },
                    evaluation: out.evaluation,
                    timings: out.timings,
                },
            })
        })
        .collect()
}

pub fn scaling_experiment(config: &PipelineConfig, sizes: &[usize]) -> Result<Vec<ScalingPoint>> {
    let inputs = Inputs::load(config)?;
    scaling_on(&inputs, config, sizes)
}

/// Writes a dataset in the on-disk layout a config expects: the labeled
/// examples followed by the pool in `examples.jsonl`, plus explanations,
/// dev and test files.
pub fn write_dataset(dir: &Path, d: &Dataset, aliases: &AliasSet) -> Result<PipelineConfig> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut examples = d.labeled_examples();
    examples.extend(d.unlabeled_pool.iter().cloned());
    write_jsonl(dir.join("examples.jsonl"), &examples)?;
    write_jsonl(dir.join("explanations.jsonl"), &d.explanations())?;
    write_jsonl(dir.join("dev.jsonl"), &d.dev)?;
    write_jsonl(dir.join("test.jsonl"), &d.test)?;
    let mut cfg = PipelineConfig {
        examples: dir.join("examples.jsonl"),
        explanations: dir.join("explanations.jsonl"),
        dev: Some(dir.join("dev.jsonl")),
        test: Some(dir.join("test.jsonl")),
        out_dir: dir.join("out"),
        ..PipelineConfig::default()
    };
    if !aliases.is_empty() {
        write_json(&dir.join("aliases.json"), aliases)?;
        cfg.aliases = Some(dir.join("aliases.json"));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests;
