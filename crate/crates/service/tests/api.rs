use std::path::Path;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use babble::corpus::{synth_corpus, write_jsonl, AliasSet, Explanation, SynthConfig};
use babble::filterbank::{candidates_from_parses, run_filter_bank};
use babble::parser::parse_text;
use babble::pipeline::{run_pipeline, write_dataset, PipelineConfig};
use babble_service::{router, AppState, Session};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    dir: tempfile::TempDir,
    config: PipelineConfig,
}

/// Synthetic dataset on disk. With `explained` false the explanations file
/// starts empty.
fn fixture(pool: usize, explained: bool) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let d = synth_corpus(&SynthConfig::spouse_like(pool), 11).unwrap();
    let config = write_dataset(dir.path(), &d, &AliasSet::new()).unwrap();
    if !explained {
        write_jsonl::<Explanation>(&config.explanations, &[]).unwrap();
    }
    Fixture { dir, config }
}

fn app(config: &PipelineConfig, static_dir: Option<&Path>) -> (Router, AppState) {
    let state = AppState::new(Session::open(config.clone()).unwrap());
    (router(state.clone(), static_dir.map(Path::to_path_buf)), state)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn assert_error(body: &Value, code: &str) {
    assert_eq!(body["code"], code, "{body}");
    assert!(body["message"].is_string(), "{body}");
    assert!(body.get("detail").is_some(), "{body}");
}

fn draft(example_id: &str, label: bool, text: &str) -> Value {
    json!({"example_id": example_id, "label": label, "text": text})
}

async fn wait_for_run(app: &Router) -> Value {
    let start = Instant::now();
    loop {
        let (status, body) = call(app, "GET", "/run/latest", None).await;
        assert_eq!(status, StatusCode::OK);
        if body["state"] != "running" {
            return body;
        }
        assert!(start.elapsed() < Duration::from_secs(300), "run did not finish");
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
}

#[tokio::test]
async fn examples_are_paged_and_looked_up() {
    let f = fixture(40, true);
    let (app, _) = app(&f.config, None);
    let (status, page) = call(&app, "GET", "/examples?offset=5&limit=10", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(page["total"], 45);
    assert_eq!(page["offset"], 5);
    assert_eq!(page["items"].as_array().unwrap().len(), 10);
    let id = page["items"][0]["id"].as_str().unwrap().to_string();
    assert!(page["items"][0].get("gold_label").is_none());

    let (status, ex) = call(&app, "GET", &format!("/examples/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ex, page["items"][0]);

    let (_, tail) = call(&app, "GET", "/examples?offset=40", None).await;
    assert_eq!(tail["items"].as_array().unwrap().len(), 5);

    let (status, err) = call(&app, "GET", "/examples/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_error(&err, "not_found");

    let (status, err) = call(&app, "GET", "/examples?limit=abc", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error(&err, "invalid_request");
}

#[tokio::test]
async fn gibberish_gives_no_parse() {
    let f = fixture(30, true);
    let (app, _) = app(&f.config, None);
    let (status, p) = call(&app, "POST", "/explanations/preview", Some(draft("lab-0", true, "zorp blat quux"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(p["candidates"].as_array().unwrap().len(), 0);
    assert_eq!(p["diagnostic"], "no parse");
    assert_eq!(p["survivors"], 0);
}

#[tokio::test]
async fn precedence_sentence_yields_left_predicate() {
    let f = fixture(30, true);
    let (app, _) = app(&f.config, None);
    let (status, p) = call(
        &app,
        "POST",
        "/explanations/preview",
        Some(draft("lab-0", true, "Label true because X is before Y")),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let cands = p["candidates"].as_array().unwrap();
    assert!(!cands.is_empty());
    assert!(cands.iter().any(|c| c["lf"].as_str().unwrap().contains("(left ")), "{p}");
    for c in cands {
        assert!(c["rendering"].is_string());
    }
}

#[tokio::test]
async fn preview_verdicts_match_direct_filter_bank() {
    let f = fixture(200, true);
    let (app, state) = app(&f.config, None);
    let session = Session::open(f.config.clone()).unwrap();
    let texts = [
        ("lab-0", true, "Label true because the word 'wed' is between X and Y"),
        ("lab-3", false, "Label false because the word \"brother\" is in between X and Y"),
        ("lab-0", false, "Label false because the word 'wed' is between X and Y"),
        ("lab-1", true, "Label true because X is before Y"),
    ];
    for (example_id, label, text) in texts {
        let (status, p) = call(&app, "POST", "/explanations/preview", Some(draft(example_id, label, text))).await;
        assert_eq!(status, StatusCode::OK);

        let grammar = f.config.grammar(&AliasSet::new()).unwrap();
        let label = babble::corpus::Label::from_bool(label);
        let id = p["explanation"]["id"].as_str().unwrap();
        let fresh = candidates_from_parses(id, &parse_text(&grammar, text, label).unwrap());
        let mut all = session.accepted_candidates().to_vec();
        all.extend(fresh.iter().cloned());
        let mut labeled = session.labeled().to_vec();
        let example = session.example(example_id).unwrap().clone();
        labeled.push((
            example,
            Explanation {
                id: id.to_string(),
                example_id: example_id.to_string(),
                label,
                text: text.to_string(),
            },
        ));
        let (_, report) = run_filter_bank(&all, &labeled, session.pool(), &AliasSet::new(), &session.filter_options());
        let want: Vec<(String, String)> = report.verdicts[session.accepted_candidates().len()..]
            .iter()
            .map(|v| (v.lf.to_sexpr(), v.verdict.name().to_string()))
            .collect();
        let got: Vec<(String, String)> = p["candidates"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| (c["lf"].as_str().unwrap().to_string(), c["verdict"].as_str().unwrap().to_string()))
            .collect();
        assert_eq!(got, want, "{text}");
        for c in p["candidates"].as_array().unwrap() {
            let kept = c["verdict"] == "kept";
            assert_eq!(c.get("coverage").is_some(), kept);
            assert_eq!(c.get("conflict_rate").is_some(), kept);
        }
    }
    assert_eq!(state.revision(), 0);
}

#[tokio::test]
async fn previews_leave_revision_unchanged() {
    let f = fixture(60, true);
    let (app, state) = app(&f.config, None);
    let before = std::fs::read(&f.config.explanations).unwrap();
    for (i, text) in ["X is before Y", "zzz", "the word 'wed' is between X and Y", "'", "Y is after X"]
        .iter()
        .enumerate()
    {
        call(&app, "POST", "/explanations/preview", Some(draft("lab-0", i % 2 == 0, text))).await;
    }
    assert_eq!(state.revision(), 0);
    let (_, list) = call(&app, "GET", "/explanations", None).await;
    assert_eq!(list["revision"], 0);
    assert_eq!(before, std::fs::read(&f.config.explanations).unwrap());
}

#[tokio::test]
async fn commit_appends_and_bumps_revision() {
    let f = fixture(60, false);
    let (app, state) = app(&f.config, None);
    let text = "Label true because the word 'wed' is between X and Y";
    let (status, c) = call(&app, "POST", "/explanations", Some(draft("lab-0", true, text))).await;
    assert_eq!(status, StatusCode::CREATED, "{c}");
    assert_eq!(c["revision"], 1);
    assert_eq!(state.revision(), 1);
    let (_, list) = call(&app, "GET", "/explanations", None).await;
    assert_eq!(list["explanations"].as_array().unwrap().len(), 1);
    assert_eq!(list["explanations"][0]["text"], text);

    // same text again: kept, deduplication is the filter bank's job
    let (status, again) = call(&app, "POST", "/explanations", Some(draft("lab-0", true, text))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(again["revision"], 2);
    assert_ne!(again["explanation"]["id"], c["explanation"]["id"]);
    assert!(again["preview"]["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["verdict"] == "duplicate"));

    let on_disk = babble::corpus::read_jsonl::<Explanation>(&f.config.explanations).unwrap();
    assert_eq!(on_disk.len(), 2);
    assert_eq!(serde_json::to_value(&on_disk).unwrap(), list_of(&app).await);
}

async fn list_of(app: &Router) -> Value {
    call(app, "GET", "/explanations", None).await.1["explanations"].clone()
}

#[tokio::test]
async fn inconsistent_explanation_is_rejected() {
    let f = fixture(60, false);
    let (app, state) = app(&f.config, None);
    // the condition does not hold on its own example
    let (status, err) = call(
        &app,
        "POST",
        "/explanations",
        Some(draft("lab-0", true, "Label true because the word 'zebra' is between X and Y")),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_error(&err, "rejected");
    let cands = err["detail"]["candidates"].as_array().unwrap();
    assert!(!cands.is_empty());
    for c in cands {
        assert_eq!(c["verdict"], "semantic_fail");
        assert_eq!(c["vote_on_example"], 0);
    }
    assert_eq!(state.revision(), 0);
    assert!(list_of(&app).await.as_array().unwrap().is_empty());
}

#[tokio::test]
async fn bad_bodies_and_unknown_examples() {
    let f = fixture(20, true);
    let (app, _) = app(&f.config, None);
    let (status, err) = call(&app, "POST", "/explanations/preview", Some(json!({"text": 3}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error(&err, "invalid_request");
    let (status, err) = call(&app, "POST", "/explanations/preview", Some(draft("missing", true, "X is before Y"))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_error(&err, "not_found");
    let (status, err) = call(&app, "POST", "/explanations", Some(draft("lab-0", true, "  "))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error(&err, "invalid_request");
}

#[tokio::test]
async fn run_needs_an_explanation() {
    let f = fixture(20, false);
    let (app, _) = app(&f.config, None);
    let (status, err) = call(&app, "POST", "/run", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_error(&err, "no_explanations");
    let (status, err) = call(&app, "GET", "/report", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_error(&err, "no_report");
    let (status, _) = call(&app, "GET", "/run/latest", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn run_is_exclusive_and_matches_cli() {
    let mut f = fixture(3000, true);
    f.config.aggregator.epochs = 2000;
    let (app, state) = app(&f.config, None);

    let (status, started) = call(&app, "POST", "/run", None).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(started["run"], 1);
    let (status, busy) = call(&app, "POST", "/run", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_error(&busy, "run_in_progress");

    // previews keep working during a run
    let (status, _) = call(&app, "POST", "/explanations/preview", Some(draft("lab-0", true, "X is before Y"))).await;
    assert_eq!(status, StatusCode::OK);

    let done = wait_for_run(&app).await;
    assert_eq!(done["state"], "succeeded", "{done}");
    assert_eq!(state.revision(), 1);

    let (status, report) = call(&app, "GET", "/report", None).await;
    assert_eq!(status, StatusCode::OK);
    let written = std::fs::read(f.config.out_dir.join("report.json")).unwrap();
    assert_eq!(report, serde_json::from_slice::<Value>(&written).unwrap());
    assert_eq!(report, done["report"]);

    let mut cli = f.config.clone();
    cli.out_dir = f.dir.path().join("cli");
    run_pipeline(&cli).unwrap();
    assert_eq!(written, std::fs::read(cli.out_dir.join("report.json")).unwrap());

    let (status, second) = call(&app, "POST", "/run", None).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(second["run"], 2);
    wait_for_run(&app).await;
}

#[tokio::test]
async fn static_assets_are_served_at_root() {
    let f = fixture(10, true);
    let assets = tempfile::tempdir().unwrap();
    std::fs::write(assets.path().join("index.html"), "<html>workbench</html>").unwrap();
    let (app, _) = app(&f.config, Some(assets.path()));
    let (status, body) = call(&app, "GET", "/", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, Value::String("<html>workbench</html>".into()));
    let (status, _) = call(&app, "GET", "/examples?limit=1", None).await;
    assert_eq!(status, StatusCode::OK);
}
