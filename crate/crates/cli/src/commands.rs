use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use babble::aggregator::{build_label_matrix, fit_generative, AggregatorConfig, Fit, GenerativeWeights, GradientMode};
use babble::corpus::{load_examples, read_json, read_jsonl, write_json, write_jsonl, AliasSet, Example};
use babble::discriminative::{evaluate, extract_all, predict_all, train_noise_aware, LinearModel, TrainConfig};
use babble::filterbank::Candidate;
use babble::grammar::LogicalForm;
use babble::lf_exec::{trace, EvalContext};
use babble::pipeline::{
    evaluate_split, filter_stage, lf_pairs, marginals_for, parse_stage, roster, run_pipeline, scaling_experiment,
    Inputs, LfRecord, MarginalsRecord, PipelineConfig, RunReport,
};
use babble_service::ServiceConfig;

use crate::{Command, Common, Mode};

/// 2 for bad input, 1 for anything that failed while running.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<babble::Error>() {
        Some(b) if b.is_validation() => 2,
        _ => 1,
    }
}

fn invalid(message: impl Into<String>) -> anyhow::Error {
    babble::Error::invalid(message).into()
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(p) = &common.examples {
        cfg.examples = p.clone();
    }
    if let Some(p) = &common.explanations {
        cfg.explanations = p.clone();
    }
    if let Some(p) = &common.out_dir {
        cfg.out_dir = p.clone();
    }
    if common.aliases.is_some() {
        cfg.aliases = common.aliases.clone();
    }
    if common.dev.is_some() {
        cfg.dev = common.dev.clone();
    }
    if common.test.is_some() {
        cfg.test = common.test.clone();
    }
    if let Some(seed) = common.master_seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn aliases(cfg: &PipelineConfig) -> Result<AliasSet> {
    Ok(match &cfg.aliases {
        Some(p) => AliasSet::load(p)?,
        None => AliasSet::new(),
    })
}

fn out_dir(cfg: &PipelineConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    Ok(&cfg.out_dir)
}

fn artifact(given: &Option<PathBuf>, cfg: &PipelineConfig, name: &str) -> PathBuf {
    given.clone().unwrap_or_else(|| cfg.out_dir.join(name))
}

/// Pool examples with gold labels removed, as every stage sees them.
fn pool(cfg: &PipelineConfig) -> Result<Vec<Example>> {
    Ok(load_examples(&cfg.examples)?
        .into_iter()
        .map(|e| Example { gold_label: None, ..e })
        .collect())
}

pub fn dispatch(common: &Common, command: Command) -> Result<()> {
    let mut cfg = load_config(common)?;
    match command {
        Command::Parse { grammar_dump, out } => parse(&cfg, grammar_dump, out),
        Command::Filter {
            candidates,
            report_table,
        } => filter(&cfg, candidates, report_table),
        Command::Aggregate {
            lfs,
            mode,
            seed,
            samples,
            burn_in,
        } => {
            if let Some(mode) = mode {
                cfg.aggregator.mode = match mode {
                    Mode::Exact => GradientMode::Exact,
                    Mode::Gibbs => GradientMode::Gibbs,
                };
            }
            if let Some(seed) = seed {
                cfg.aggregator.seed = seed;
            }
            if let Some(samples) = samples {
                cfg.aggregator.samples = samples;
            }
            if let Some(burn_in) = burn_in {
                cfg.aggregator.burn_in = burn_in;
            }
            aggregate(&cfg, lfs)
        }
        Command::Train { marginals, seed } => {
            if let Some(seed) = seed {
                cfg.discriminative.seed = seed;
            }
            train(&cfg, marginals)
        }
        Command::Eval {
            model,
            split,
            lfs,
            weights,
        } => eval(&cfg, model, split, lfs.zip(weights)),
        Command::Run => run(&cfg),
        Command::Scale { sizes } => scale(&cfg, &sizes),
        Command::Serve { host, port, static_dir } => serve(cfg, &host, port, static_dir),
        Command::Execute { lf, example } => execute(&cfg, &lf, &example),
    }
}

fn parse(cfg: &PipelineConfig, grammar_dump: bool, out: Option<PathBuf>) -> Result<()> {
    if grammar_dump {
        print!("{}", cfg.grammar(&aliases(cfg)?)?.dump());
        return Ok(());
    }
    let inputs = Inputs::load(cfg)?;
    let (candidates, outcomes) = parse_stage(&cfg.grammar(&inputs.aliases)?, &inputs.explanations());
    let path = match out {
        Some(p) => p,
        None => out_dir(cfg)?.join("candidates.jsonl"),
    };
    write_jsonl(&path, &candidates)?;
    for o in &outcomes {
        match &o.error {
            Some(err) => println!("{}\t0\t{err}", o.explanation_id),
            None => println!("{}\t{}", o.explanation_id, o.candidates),
        }
    }
    Ok(())
}

fn filter(cfg: &PipelineConfig, candidates: Option<PathBuf>, report_table: bool) -> Result<()> {
    let inputs = Inputs::load(cfg)?;
    let path = artifact(&candidates, cfg, "candidates.jsonl");
    let candidates: Vec<Candidate> = if candidates.is_some() || path.is_file() {
        read_jsonl(&path)?
    } else {
        parse_stage(&cfg.grammar(&inputs.aliases)?, &inputs.explanations()).0
    };
    let dir = out_dir(cfg)?;
    let (survivors, report) = match filter_stage(&candidates, &inputs, cfg) {
        Ok(r) => r,
        Err(babble::Error::NoSurvivors(report)) => {
            write_json(dir.join("filter_report.json"), &report)?;
            return Err(babble::Error::NoSurvivors(report).into());
        }
        Err(e) => return Err(e.into()),
    };
    let lm = build_label_matrix(&lf_pairs(&survivors), &inputs.pool, &inputs.aliases)?;
    write_json(dir.join("filter_report.json"), &report)?;
    write_jsonl(dir.join("lfs.jsonl"), &roster(&survivors, &lm))?;
    if report_table {
        print!("{}", report.table());
    } else {
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(())
}

fn read_lfs(path: &Path) -> Result<Vec<(String, LogicalForm)>> {
    let records: Vec<LfRecord> = read_jsonl(path)?;
    if records.is_empty() {
        return Err(invalid(format!("{}: no LFs", path.display())));
    }
    Ok(records.into_iter().map(|r| (r.id, r.lf)).collect())
}

fn aggregate(cfg: &PipelineConfig, lfs: Option<PathBuf>) -> Result<()> {
    let lfs = read_lfs(&artifact(&lfs, cfg, "lfs.jsonl"))?;
    let pool = pool(cfg)?;
    let lm = build_label_matrix(&lfs, &pool, &aliases(cfg)?)?;
    let agg = AggregatorConfig {
        seed: cfg.aggregator_seed(),
        ..cfg.aggregator.clone()
    };
    let fit = fit_generative(&lm, &agg)?;
    let marginals = marginals_for(&fit, &lm, cfg)?;
    let dir = out_dir(cfg)?;
    write_jsonl(dir.join("label_matrix.jsonl"), &lm.to_records())?;
    write_json(dir.join("weights.json"), &fit.weights)?;
    write_json(
        dir.join("marginals.json"),
        &MarginalsRecord {
            example_ids: lm.example_ids.clone(),
            p: marginals,
        },
    )?;
    println!("objective {:.6} over {} LFs and {} examples", fit.objective, lm.m(), lm.n());
    Ok(())
}

fn train(cfg: &PipelineConfig, marginals: Option<PathBuf>) -> Result<()> {
    let path = artifact(&marginals, cfg, "marginals.json");
    let record: MarginalsRecord = read_json(&path)?;
    let pool = pool(cfg)?;
    let ids: Vec<&str> = pool.iter().map(|e| e.id.as_str()).collect();
    if record.example_ids.iter().map(String::as_str).ne(ids.iter().copied()) {
        return Err(invalid(format!(
            "{}: example ids differ from {}",
            path.display(),
            cfg.examples.display()
        )));
    }
    let train = TrainConfig {
        seed: cfg.train_seed(),
        ..cfg.discriminative.clone()
    };
    let trained = train_noise_aware(&extract_all(&pool), &record.p, &train)?;
    write_json(out_dir(cfg)?.join("model.json"), &trained.model)?;
    println!(
        "{} features, final loss {:.6}",
        trained.model.weights.len(),
        trained.history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn eval(
    cfg: &PipelineConfig,
    model: Option<PathBuf>,
    split: Option<PathBuf>,
    label_model: Option<(PathBuf, PathBuf)>,
) -> Result<()> {
    let model: LinearModel = read_json(artifact(&model, cfg, "model.json"))?;
    let split = split
        .or_else(|| cfg.test.clone())
        .ok_or_else(|| invalid("no split given and no test split configured"))?;
    let examples = load_examples(&split)?;
    let out = match label_model {
        Some((lfs, weights)) => {
            let lfs = read_lfs(&lfs)?;
            let weights: GenerativeWeights = read_json(&weights)?;
            let fit = Fit {
                weights,
                objective: f64::NAN,
                history: Vec::new(),
            };
            serde_json::to_string_pretty(&evaluate_split(&lfs, &fit, &model, &examples, &aliases(cfg)?, cfg)?)?
        }
        None => serde_json::to_string_pretty(&evaluate(
            &predict_all(&model, &examples),
            &examples,
            model.threshold,
        )?)?,
    };
    println!("{out}");
    Ok(())
}

fn print_summary(report: &RunReport) {
    println!(
        "{} explanations, {} candidates, {} LFs kept, pool {}",
        report.explanations, report.filter.candidates_in, report.filter.survivors, report.pool_size
    );
    for (split, rows) in &report.evaluation {
        for (name, m) in [
            ("majority_vote", &rows.majority_vote),
            ("aggregator", &rows.aggregator),
            ("discriminative", &rows.discriminative),
        ] {
            println!("{split}\t{name}\tP {:.3}\tR {:.3}\tF1 {:.3}", m.precision, m.recall, m.f1);
        }
    }
}

fn run(cfg: &PipelineConfig) -> Result<()> {
    let report = run_pipeline(cfg)?;
    print_summary(&report);
    Ok(())
}

fn scale(cfg: &PipelineConfig, sizes: &[usize]) -> Result<()> {
    let points = scaling_experiment(cfg, sizes)?;
    write_json(out_dir(cfg)?.join("scaling.json"), &points)?;
    for p in &points {
        for (split, rows) in &p.report.evaluation {
            println!("{}\t{split}\tF1 {:.3}", p.pool_size, rows.discriminative.f1);
        }
    }
    Ok(())
}

fn serve(cfg: PipelineConfig, host: &str, port: u16, static_dir: Option<PathBuf>) -> Result<()> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| invalid(format!("bad address {host}:{port}: {e}")))?;
    let config = ServiceConfig {
        pipeline: cfg,
        static_dir,
    };
    // bad inputs fail here, before binding
    let app = babble_service::app(config)?;
    tokio::runtime::Runtime::new()?.block_on(babble_service::serve(app, addr))?;
    Ok(())
}

fn execute(cfg: &PipelineConfig, lf: &str, example_id: &str) -> Result<()> {
    let lf: LogicalForm = lf.parse()?;
    lf.type_check()?;
    let examples = load_examples(&cfg.examples)?;
    let example = examples
        .iter()
        .find(|e| e.id == example_id)
        .ok_or_else(|| babble::Error::UnknownExamples(vec![example_id.to_string()]))?;
    let aliases = aliases(cfg)?;
    let ctx = EvalContext::new(example, &aliases);
    let (label, steps) = trace(&lf, &ctx);
    println!("label {label}");
    for s in steps {
        println!("{}\t{}", s.node, s.value);
    }
    Ok(())
}
