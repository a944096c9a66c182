use super::*;
use crate::corpus::{synth_corpus, SynthConfig};

fn inputs(pool: usize, seed: u64) -> Inputs {
    let d = synth_corpus(&SynthConfig::spouse_like(pool), seed).unwrap();
    Inputs::from_dataset(&d, AliasSet::new())
}

#[test]
fn synthetic_run_classifier_keeps_up_with_label_model() {
    let report = run_on(&inputs(800, 1), &PipelineConfig::default(), &[], None).unwrap();
    assert!(report.filter.reconciles());
    assert_eq!(report.lfs.len(), 5, "{:#?}", report.lfs);
    let test = &report.evaluation["test"];
    assert!(
        test.discriminative.f1 >= test.aggregator.f1 - 0.02,
        "{test:#?}"
    );
}

#[test]
fn pool_gold_labels_are_hidden() {
    let i = inputs(50, 2);
    assert!(i.pool.iter().all(|e| e.gold_label.is_none()));
    assert!(i.test.iter().all(|e| e.gold_label.is_some()));
}

#[test]
fn missing_files_fail_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        examples: dir.path().join("nope.jsonl"),
        out_dir: dir.path().join("out"),
        ..PipelineConfig::default()
    };
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(err.is_validation());
    assert!(err.to_string().contains("nope.jsonl"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn file_run_writes_every_artifact_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = synth_corpus(&SynthConfig::spouse_like(300), 3).unwrap();
    let mut cfg = write_dataset(dir.path(), &d, &AliasSet::new()).unwrap();
    run_pipeline(&cfg).unwrap();
    for name in [
        "candidates.jsonl",
        "filter_report.json",
        "lfs.jsonl",
        "label_matrix.jsonl",
        "weights.json",
        "marginals.json",
        "model.json",
        "report.json",
        "timings.json",
    ] {
        assert!(cfg.out_dir.join(name).is_file(), "{name}");
    }
    let first = std::fs::read(cfg.out_dir.join("report.json")).unwrap();
    cfg.out_dir = dir.path().join("again");
    run_pipeline(&cfg).unwrap();
    assert_eq!(first, std::fs::read(cfg.out_dir.join("report.json")).unwrap());
}

#[test]
fn training_seed_does_not_touch_earlier_stages() {
    let i = inputs(200, 4);
    let a_cfg = PipelineConfig::default();
    let b_cfg = PipelineConfig {
        discriminative: TrainConfig {
            seed: 99,
            subsample: Some(0.5),
            ..TrainConfig::default()
        },
        ..PipelineConfig::default()
    };
    assert_ne!(a_cfg.train_seed(), b_cfg.train_seed());
    assert_eq!(a_cfg.aggregator_seed(), b_cfg.aggregator_seed());
    let a = run_on(&i, &a_cfg, &[], None).unwrap();
    let b = run_on(&i, &b_cfg, &[], None).unwrap();
    assert_eq!(
        serde_json::to_string(&a.filter).unwrap(),
        serde_json::to_string(&b.filter).unwrap()
    );
    assert_eq!(a.lfs, b.lfs);
}

#[test]
fn scaling_argument_checks() {
    let i = inputs(120, 5);
    let cfg = PipelineConfig::default();
    assert!(scaling_on(&i, &cfg, &[50]).is_err());
    assert!(scaling_on(&i, &cfg, &[50, 10_000]).is_err());
    let same = scaling_on(&i, &cfg, &[80, 80]).unwrap();
    assert_eq!(same[0].report.evaluation, same[1].report.evaluation);
}

#[test]
fn disabled_filter_passes_everything() {
    let i = inputs(100, 6);
    let cfg = PipelineConfig {
        filter: FilterSettings {
            enabled: false,
            ..FilterSettings::default()
        },
        ..PipelineConfig::default()
    };
    let r = run_on(&i, &cfg, &[], None).unwrap();
    assert_eq!(r.filter.survivors, r.filter.candidates_in);
    assert!(r.lfs.len() > 5);
}

#[test]
fn no_survivors_is_an_error_with_report() {
    let mut i = inputs(100, 7);
    for (_, e) in &mut i.labeled {
        e.text = "zzz qqq".into();
    }
    match run_on(&i, &PipelineConfig::default(), &[], None) {
        Err(Error::NoSurvivors(report)) => assert_eq!(report.candidates_in, 0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn config_paths_resolve_against_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"examples": "ex.jsonl", "seed": 3, "aggregator": {"mode": "gibbs"}}"#).unwrap();
    let cfg = PipelineConfig::load(&path).unwrap();
    assert_eq!(cfg.examples, dir.path().join("ex.jsonl"));
    assert_eq!(cfg.aggregator.mode, GradientMode::Gibbs);
    assert_eq!(cfg.aggregator.l2, PARSED_LF_ACC_PRIOR);
    assert_eq!(cfg.seed, 3);
    std::fs::write(&path, r#"{"bogus": 1}"#).unwrap();
    assert!(PipelineConfig::load(&path).is_err());
    std::fs::write(&path, r#"{"aggregator": {"bogus": 1}}"#).unwrap();
    assert!(PipelineConfig::load(&path).is_err());
}
