use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use crowdsense::pipeline::{LlmProvider, MockProvider, ProviderError};
use crowdsense::{Config, IdGen, ManualClock, ProviderKind, Workspace};
use crowdsense_server::api::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn app_with(provider: Arc<dyn LlmProvider>) -> Router {
    let ws = Workspace::in_memory_with(Arc::new(ManualClock::at_millis(1_700_000_000_000)), IdGen::seeded(1));
    let mut config = Config::default();
    config.provider.fixtures_path = Some(fixtures().join("appendix/responses.json"));
    router(AppState::with_provider(ws, config, provider))
}

fn app() -> Router {
    app_with(Arc::new(MockProvider))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

async fn wait_for_run(app: &Router, run_id: &str) -> Value {
    for _ in 0..200 {
        let (status, run) = get(app, &format!("/pipeline/runs/{run_id}")).await;
        assert_eq!(status, StatusCode::OK, "{run}");
        if run["status"] != "running" {
            return run;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("run {run_id} did not finish");
}

async fn seeded(app: &Router) -> Vec<Value> {
    let records: Vec<Value> = [
        "the fee is outrageous",
        "cannot withdraw my money",
        "another fee appeared",
        "app crash on upload",
        "login loop again",
        "crash after update",
        "hello everyone",
    ]
    .iter()
    .map(|b| json!({ "body": b }))
    .collect();
    let (status, report) = post(app, "/ingest/subreddit", json!({"source_name": "Freelancers", "records": records})).await;
    assert_eq!(status, StatusCode::OK, "{report}");
    let (status, started) = call(app, Method::POST, "/pipeline/run", None).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{started}");
    let run = wait_for_run(app, started["run_id"].as_str().unwrap()).await;
    assert_eq!(run["status"], "succeeded");
    let (_, problems) = get(app, "/problems").await;
    problems["bars"].as_array().unwrap().clone()
}

#[tokio::test]
async fn ingest_and_sources() {
    let app = app();
    let (status, report) = post(
        &app,
        "/ingest/app_store_review",
        json!({"source_name": "Upwork", "records": [
            {"rating": 1, "body": "a"}, {"rating": 2, "body": "b"}, {"rating": 3, "body": "c"},
            {"rating": 4, "body": "d"}, {"rating": 5, "body": "e"}, {"rating": 0, "body": "f"}
        ]}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((report["accepted"].as_u64(), report["filtered"].as_u64()), (Some(3), Some(2)));
    assert_eq!(report["rejected"][0]["reason"]["code"], "invalid_rating");

    let (_, sources) = get(&app, "/sources").await;
    assert_eq!(sources[0]["item_count"], 3);

    let (status, err) = post(&app, "/ingest/subreddit", json!({"source_name": "", "records": []})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "invalid_request");
    let (status, _) = post(&app, "/ingest/manual", json!({"source_name": "x", "records": []})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn manual_issue_and_unassigned() {
    let app = app();
    let (status, c) = post(&app, "/issues", json!({"author_handle": "w1", "body": "Client refused to pay after delivery"})).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(c["source_kind"], "manual");
    let (status, err) = post(&app, "/issues", json!({"author_handle": "w1", "body": "  "})).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_request")));
    let (_, page) = get(&app, "/unassigned?page=1&page_size=5").await;
    assert_eq!(page["total_items"], 1);
    let (status, _) = get(&app, "/unassigned?page=zero").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn pipeline_zoom_and_upvote() {
    let app = app();
    let bars = seeded(&app).await;
    let names: Vec<_> = bars.iter().map(|b| b["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["Payment", "Usability"]);
    let id = bars[0]["category_id"].as_str().unwrap();

    let (status, view) = get(&app, &format!("/problems/{id}?page=1&page_size=2")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["posts"]["total_items"], 3);
    assert_eq!(view["posts"]["items"].as_array().unwrap().len(), 2);

    for _ in 0..2 {
        let (_, up) = post(&app, &format!("/problems/{id}/upvote"), json!({"voter_handle": "ana"})).await;
        assert_eq!(up["upvote_count"], 1);
    }
    let (status, err) = get(&app, "/problems/nope").await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));
}

#[tokio::test]
async fn pipeline_run_reports_and_refuses_empty() {
    let app = app();
    let (status, err) = call(&app, Method::POST, "/pipeline/run", None).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_request")));
    seeded(&app).await;
    let (status, err) = get(&app, "/pipeline/runs/unknown").await;
    assert_eq!(status, StatusCode::NOT_FOUND, "{err}");
}

struct Slow;

impl LlmProvider for Slow {
    fn id(&self) -> String {
        "slow".into()
    }
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        std::thread::sleep(Duration::from_millis(150));
        MockProvider.complete(prompt)
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn second_concurrent_run_is_rejected() {
    let app = app_with(Arc::new(Slow));
    post(&app, "/issues", json!({"body": "fee too high"})).await;
    let (first, started) = call(&app, Method::POST, "/pipeline/run", None).await;
    assert_eq!(first, StatusCode::ACCEPTED);
    let (second, err) = call(&app, Method::POST, "/pipeline/run", None).await;
    assert_eq!((second, err["code"].as_str()), (StatusCode::CONFLICT, Some("already_running")));
    wait_for_run(&app, started["run_id"].as_str().unwrap()).await;
    let (again, _) = call(&app, Method::POST, "/pipeline/run", None).await;
    assert_eq!(again, StatusCode::ACCEPTED);
}

#[tokio::test]
async fn recorded_provider_override() {
    let app = app();
    let records: Vec<Value> = std::fs::read_to_string(fixtures().join("appendix/complaints.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    post(&app, "/ingest/subreddit", json!({"source_name": "Freelancers", "records": records})).await;
    let (status, started) = post(&app, "/pipeline/run", json!({"provider": "recorded"})).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let run = wait_for_run(&app, started["run_id"].as_str().unwrap()).await;
    assert!(run["provider_id"].as_str().unwrap().starts_with("recorded:"));
    let (_, problems) = get(&app, "/problems").await;
    assert_eq!(problems["bars"].as_array().unwrap().len(), 5);
    let scam = problems["bars"].as_array().unwrap().iter().find(|b| b["name"] == "Scam").unwrap();
    let (_, board) = get(&app, &format!("/problems/{}/solutions", scam["category_id"].as_str().unwrap())).await;
    assert!(board[0]["body"].as_str().unwrap().starts_with("Create a scam alert system"));
}

#[tokio::test]
async fn collaboration_endpoints() {
    let app = app();
    let bars = seeded(&app).await;
    let id = bars[0]["category_id"].as_str().unwrap();

    let (status, msg) = post(&app, &format!("/problems/{id}/chat"), json!({"author_handle": "w1", "body": "hi"})).await;
    assert_eq!(status, StatusCode::CREATED, "{msg}");
    let (_, thread) = get(&app, &format!("/problems/{id}/chat")).await;
    assert_eq!(thread.as_array().unwrap().len(), 1);

    let doc_uri = format!("/problems/{id}/document");
    let (status, doc) = call(&app, Method::PUT, &doc_uri, Some(json!({"base_version": 0, "body": "plan"}))).await;
    assert_eq!((status, doc["version"].as_u64()), (StatusCode::OK, Some(1)));
    let (status, err) = call(&app, Method::PUT, &doc_uri, Some(json!({"base_version": 0, "body": "stale"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["current"]["body"], "plan");
    let (status, doc) = post(
        &app,
        &format!("/problems/{id}/document/annotations"),
        json!({"author_handle": "w2", "start": 0, "end": 4, "note": "vague"}),
    )
    .await;
    assert_eq!((status, doc["annotations"].as_array().unwrap().len()), (StatusCode::CREATED, 1));

    let (status, human) = post(&app, &format!("/problems/{id}/solutions"), json!({"author_handle": "w1", "body": "group letter"})).await;
    assert_eq!(status, StatusCode::CREATED);
    let (_, board) = get(&app, &format!("/problems/{id}/solutions")).await;
    let board = board.as_array().unwrap();
    assert_eq!(board.len(), 4);
    assert_eq!(board[0]["origin"], "human");
    assert!(board[1..].iter().all(|s| s["disclaimer"].is_string() && s["label"] == "Generated using Generative AI"));

    let sid = human["id"].as_str().unwrap();
    let (_, voted) = post(&app, &format!("/problems/{id}/solutions/{sid}/vote"), json!({"voter_handle": "bo"})).await;
    assert_eq!(voted["vote_count"], 1);

    let (status, _) = get(&app, &format!("/problems/{id}/final")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let ai_sid = board[1]["id"].as_str().unwrap();
    let (status, fin) = post(&app, &format!("/problems/{id}/final"), json!({"solution_id": ai_sid, "decided_by": ["w1"]})).await;
    assert_eq!(status, StatusCode::CREATED, "{fin}");
    assert!(fin["solution"]["disclaimer"].is_string());
    let (status, _) = post(&app, &format!("/problems/{id}/final"), json!({"solution_id": sid, "decided_by": ["w1"]})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (_, fin) = get(&app, &format!("/problems/{id}/final")).await;
    assert_eq!(fin["solution_id"], ai_sid);

    let (status, added) = call(&app, Method::POST, &format!("/problems/{id}/ai-solutions"), None).await;
    assert_eq!(status, StatusCode::CREATED, "{added}");
    assert_eq!(added.as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn timing_and_sus() {
    let app = app();
    let (status, t) = call(&app, Method::POST, "/sessions/p1/tasks/2/start", None).await;
    assert_eq!(status, StatusCode::OK, "{t}");
    let (status, t) = call(&app, Method::POST, "/sessions/p1/tasks/2/stop", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(t["duration_seconds"], 0.0);
    let (status, _) = call(&app, Method::POST, "/sessions/p1/tasks/2/stop", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, Method::POST, "/sessions/p1/tasks/9/start", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, Method::POST, "/sessions/p1/tasks/3/stop", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, s) = post(&app, "/sus", json!({"answers": [3, 3, 3, 3, 3, 3, 3, 3, 3, 3]})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((s["score"].as_f64(), s["adjectival"].as_str()), (Some(50.0), Some("Poor")));
    let (status, err) = post(&app, "/sus", json!({"answers": [3, 3]})).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_request")));
}

#[tokio::test]
async fn malformed_requests_get_error_documents() {
    let app = app();
    let resp = app
        .clone()
        .oneshot(
            Request::post("/issues")
                .header("content-type", "application/json")
                .body(Body::from("{not json"))
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
    let (status, err) = get(&app, "/no/such/route").await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));
    let (status, _) = post(&app, "/sus", json!({"answers": [300]})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, health) = get(&app, "/health").await;
    assert_eq!(health["sequence_no"], 0);
}

#[tokio::test]
async fn live_provider_failure_is_bad_gateway() {
    let ws = Workspace::in_memory_with(Arc::new(ManualClock::at_millis(0)), IdGen::seeded(2));
    let mut config = Config::default();
    config.provider.kind = ProviderKind::Live;
    config.provider.base_url = Some("http://127.0.0.1:9/v1".into());
    config.provider.model = Some("m".into());
    config.max_attempts = 1;
    let state = AppState::new(ws, config).unwrap();
    let app = router(state);
    post(&app, "/issues", json!({"body": "fee too high"})).await;
    let (_, started) = call(&app, Method::POST, "/pipeline/run", None).await;
    let run = wait_for_run(&app, started["run_id"].as_str().unwrap()).await;
    assert_eq!(run["status"], "failed");
    let (_, problems) = get(&app, "/problems").await;
    assert!(problems["bars"].as_array().unwrap().is_empty());
}
