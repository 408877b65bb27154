//! HTTP API contract: every served score equals the library score for the
//! same model file, errors carry stable codes, and the journal only grows.

use std::path::Path;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rollaid::{fixtures, load_model, load_transactions, save_model, score_state, train};
use rollaid::{DefectState, MinerConfig, PreprocessConfig};
use rollaid_cli::service::{router, AppState, ServeConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

const COSTS: &str = "defect_id,repair_cost\n\
d1,10\nd2,20\nd3,30\nd4,40\nd5,50\nd6,60\nd7,70\nd8,80\nd9,90\n";

fn write_fixture_files(dir: &Path, min_support: u64) {
    let log = load_transactions(fixtures::WORKED_LOG_CSV.as_bytes()).unwrap();
    let model = train(
        &log,
        &PreprocessConfig::default(),
        &MinerConfig::new(min_support).unwrap(),
    )
    .unwrap();
    save_model(
        &model,
        std::fs::File::create(dir.join("model.json")).unwrap(),
    )
    .unwrap();
    std::fs::write(dir.join("log.csv"), fixtures::WORKED_LOG_CSV).unwrap();
    std::fs::write(dir.join("costs.csv"), COSTS).unwrap();
}

fn serve(dir: &Path) -> (AppState, Router) {
    let state = AppState::load(ServeConfig {
        model_path: dir.join("model.json"),
        costs_path: Some(dir.join("costs.csv")),
        log_path: Some(dir.join("log.csv")),
        journal_path: dir.join("journal.jsonl"),
    })
    .unwrap();
    (state.clone(), router(state))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    assert_eq!(
        resp.headers().get(header::CONTENT_TYPE).unwrap(),
        "application/json"
    );
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn library_score(dir: &Path, state: &str) -> (u64, u64, Option<String>) {
    let model = load_model(std::fs::File::open(dir.join("model.json")).unwrap()).unwrap();
    let r = score_state(&model, &DefectState::parse(state).unwrap());
    (
        r.score.numerator(),
        r.score.denominator(),
        r.witness.map(|w| w.to_string()),
    )
}

#[tokio::test]
async fn score_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_files(dir.path(), 1);
    let (_, app) = serve(dir.path());
    for state in ["", "d1;d2", "d6;d7;d8", "d5", "d1;d2;d3;d4;d9"] {
        let (status, body) = call(
            &app,
            "POST",
            "/api/v1/score",
            Some(json!({ "state": state })),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        let (n, d, w) = library_score(dir.path(), state);
        assert_eq!(body["numerator"], n);
        assert_eq!(body["denominator"], d);
        assert_eq!(body["witness"].as_str().map(str::to_owned), w);
    }
    // trained on the 8-row log, {d6,d7} has one beta and one alpha occurrence
    let (_, body) = call(
        &app,
        "POST",
        "/api/v1/score",
        Some(json!({ "state": "d6;d7" })),
    )
    .await;
    assert_eq!(body["display"], "1.000000");
    let (_, body) = call(
        &app,
        "POST",
        "/api/v1/score",
        Some(json!({ "state": "d1;d2" })),
    )
    .await;
    assert_eq!(body["display"], "0.500000");
}

#[tokio::test]
async fn ranking_for_log_day() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_files(dir.path(), 1);
    let (_, app) = serve(dir.path());
    let (status, body) = call(&app, "GET", "/api/v1/ranking?date=2017-01-02", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["date"], "2017-01-02");
    assert_eq!(body["n_rollouts"], 1);
    let vehicles = body["vehicles"].as_array().unwrap();
    assert_eq!(vehicles.len(), 1);
    assert_eq!(vehicles[0]["vehicle_id"], "1");
    assert_eq!(vehicles[0]["state"], "d1;d2;d3;d4");
    assert_eq!(vehicles[0]["repair_cost"], 100.0);
    let (n, d, _) = library_score(dir.path(), "d1;d2;d3;d4");
    assert_eq!(vehicles[0]["score"]["numerator"], n);
    assert_eq!(vehicles[0]["score"]["denominator"], d);

    // a day nobody was observed: empty fleet, zero rollouts
    let (status, body) = call(&app, "GET", "/api/v1/ranking?date=2018-06-01", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["n_rollouts"], 0);
    assert!(body["vehicles"].as_array().unwrap().is_empty());

    // default is the last logged day
    let (_, body) = call(&app, "GET", "/api/v1/ranking", None).await;
    assert_eq!(body["date"], "2017-03-15");

    let (status, body) = call(&app, "GET", "/api/v1/ranking?date=15/03/2017", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "invalid_request");
}

#[tokio::test]
async fn whatif_contract() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_files(dir.path(), 1);
    let (_, app) = serve(dir.path());

    let (status, body) = call(
        &app,
        "POST",
        "/api/v1/whatif",
        Some(json!({ "state": "d6;d7;d8" })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["before"], body["after"]);

    let (_, body) = call(
        &app,
        "POST",
        "/api/v1/whatif",
        Some(json!({ "state": "d6;d7;d8", "add": ["zz"], "remove": ["d8"] })),
    )
    .await;
    assert_eq!(body["state_after"], "d6;d7;zz");
    let (n, d, _) = library_score(dir.path(), "d6;d7;zz");
    assert_eq!(body["after"]["numerator"], n);
    assert_eq!(body["after"]["denominator"], d);

    let (status, body) = call(
        &app,
        "POST",
        "/api/v1/whatif",
        Some(json!({ "state": "d1", "add": ["bad;token"] })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "invalid_request");
    assert!(body["error"]["message"]
        .as_str()
        .unwrap()
        .contains("invalid defect id"));
}

#[tokio::test]
async fn decisions_append_to_journal() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_files(dir.path(), 1);
    let (_, app) = serve(dir.path());
    let req = json!({ "date": "2017-03-14", "vehicle_id": "2", "decision": "roll_out" });
    let (status, first) = call(&app, "POST", "/api/v1/decisions", Some(req.clone())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first["accepted"], true);
    assert_eq!(first["record"]["sequence"], 0);
    let (n, d, _) = library_score(dir.path(), "d6;d7;d8");
    assert_eq!(first["record"]["score_shown"]["numerator"], n);
    assert_eq!(first["record"]["score_shown"]["denominator"], d);

    // identical resubmission is journaled again with the next sequence number
    let (_, second) = call(&app, "POST", "/api/v1/decisions", Some(req)).await;
    assert_eq!(second["record"]["sequence"], 1);

    let (status, body) = call(
        &app,
        "POST",
        "/api/v1/decisions",
        Some(json!({ "date": "2017-03-14", "vehicle_id": "2", "decision": "maybe" })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "invalid_request");

    let journal = std::fs::read_to_string(dir.path().join("journal.jsonl")).unwrap();
    let lines: Vec<Value> = journal
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], first["record"]);
    assert_eq!(lines[1], second["record"]);

    // a restarted service continues the sequence instead of rewriting
    let (_, app) = serve(dir.path());
    let (_, third) = call(
        &app,
        "POST",
        "/api/v1/decisions",
        Some(json!({ "date": "2017-01-01", "vehicle_id": "1", "decision": "hold" })),
    )
    .await;
    assert_eq!(third["record"]["sequence"], 2);
    let journal = std::fs::read_to_string(dir.path().join("journal.jsonl")).unwrap();
    let first_line: Value = serde_json::from_str(journal.lines().next().unwrap()).unwrap();
    assert_eq!(first_line, lines[0]);
    assert_eq!(journal.lines().count(), 3);
}

#[tokio::test]
async fn concurrent_decisions_are_serialized() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_files(dir.path(), 1);
    let (_, app) = serve(dir.path());
    let tasks: Vec<_> = (0..32)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(async move {
                let req = json!({ "date": "2017-01-01", "vehicle_id": format!("v{i}"), "decision": "hold" });
                call(&app, "POST", "/api/v1/decisions", Some(req)).await
            })
        })
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap().0, StatusCode::OK);
    }
    let journal = std::fs::read_to_string(dir.path().join("journal.jsonl")).unwrap();
    let mut seqs: Vec<u64> = journal
        .lines()
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["sequence"]
                .as_u64()
                .unwrap()
        })
        .collect();
    seqs.sort_unstable();
    assert_eq!(seqs, (0..32).collect::<Vec<_>>());
}

#[tokio::test]
async fn meta_and_atomic_reload() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_files(dir.path(), 1);
    let (state, app) = serve(dir.path());
    let (status, meta) = call(&app, "GET", "/api/v1/model/meta", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(meta["format"], "rollaid-isr-model");
    assert_eq!(meta["version"], 1);
    assert_eq!(meta["config"]["min_support"], 1);
    assert_eq!(meta["provenance"]["n_rows"], 8);
    assert_eq!(meta["provenance"]["training_end"], "2017-03-15");

    // a request holding the old model keeps it across a reload
    let held = state.model();
    write_fixture_files(dir.path(), 2);
    let (status, meta) = call(&app, "POST", "/api/v1/model/reload", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(meta["config"]["min_support"], 2);
    assert_eq!(held.config.min_support, 1);
    assert_eq!(state.model().config.min_support, 2);

    // a broken file is rejected and the served model stays in place
    std::fs::write(
        dir.path().join("model.json"),
        "{\"format\": \"rollaid-isr-model\", \"version\": 9}",
    )
    .unwrap();
    let (status, body) = call(&app, "POST", "/api/v1/model/reload", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "unsupported_model_version");
    assert_eq!(state.model().config.min_support, 2);
}

#[tokio::test]
async fn report_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_files(dir.path(), 1);
    let (_, app) = serve(dir.path());
    // the model's training window covers the whole log, so nothing is evaluated
    let (status, body) = call(&app, "GET", "/api/v1/report?theta=4", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["theta"], 4);
    assert!(body["days"].as_array().unwrap().is_empty());

    let (status, body) = call(&app, "GET", "/api/v1/report?theta=0", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "invalid_config");

    let (status, body) = call(&app, "GET", "/api/v1/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "not_found");

    let (status, body) = call(&app, "POST", "/api/v1/score", Some(json!({ "stat": "d1" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "invalid_request");
}

#[tokio::test]
async fn ranking_without_log_is_a_conflict() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_files(dir.path(), 1);
    let app = router(
        AppState::load(ServeConfig {
            model_path: dir.path().join("model.json"),
            costs_path: None,
            log_path: None,
            journal_path: dir.path().join("journal.jsonl"),
        })
        .unwrap(),
    );
    let (status, body) = call(&app, "GET", "/api/v1/ranking?date=2017-01-01", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "log_not_loaded");
}
