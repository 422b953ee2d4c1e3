//! HTTP endpoints, bearer auth and the SSE ledger stream.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use forge_core::domain::{load_design, DesignModel, LedgerEntry};
use forge_core::orchestr::{HilItem, HilMode, ModeHandler, Pipeline, RunConfig, RunOutcome, Scenario, ScriptedBackend};
use forge_core::specgram::{LearningCache, RuleSet};
use forge_hil::{router, DatasetLog, HilQueue, ResolveResponse, RunSummary};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

fn core(rel: &str) -> String {
    std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core").join(rel)).unwrap()
}

fn encoder() -> DesignModel {
    load_design(&core("fixtures/encoder.dsn")).unwrap()
}

fn pending_run(cache: &LearningCache) -> RunOutcome {
    let d = encoder();
    let (rules, cfg) = (RuleSet::seeded(), RunConfig::default());
    let pipe = Pipeline { design: &d, rules: &rules, cache, config: &cfg };
    let sc = Scenario::from_json(&core("scenarios/encoder_fig2.json")).unwrap();
    pipe.run(&core("scenarios/encoder_spec.rb"), &mut ScriptedBackend::new(sc), &mut ModeHandler(HilMode::Interactive))
        .unwrap()
}

fn setup(token: Option<&str>) -> (Arc<HilQueue>, Router) {
    let q = Arc::new(HilQueue::new(Arc::new(LearningCache::seeded()), Arc::new(DatasetLog::in_memory())));
    (q.clone(), router(q, token.map(String::from)))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>, token: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn empty_state_lists_no_runs() {
    let (_, app) = setup(None);
    assert_eq!(call(&app, "GET", "/runs", None, None).await, (StatusCode::OK, Value::Array(vec![])));
    assert_eq!(call(&app, "GET", "/hil/pending", None, None).await.1, Value::Array(vec![]));
    assert_eq!(call(&app, "GET", "/runs/nope/ledger", None, None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn resolve_over_http_extends_the_ledger() {
    let (q, app) = setup(None);
    let out = pending_run(q.cache());
    q.register(&out, &encoder(), None, None);

    let (s, runs) = call(&app, "GET", "/runs", None, None).await;
    assert_eq!(s, StatusCode::OK);
    let runs: Vec<RunSummary> = serde_json::from_value(runs).unwrap();
    assert_eq!((runs.len(), runs[0].pending), (1, 1));

    let (_, pending) = call(&app, "GET", "/hil/pending", None, None).await;
    let items: Vec<HilItem> = serde_json::from_value(pending).unwrap();
    assert_eq!(items.len(), 1);
    let id = &items[0].item_id;

    let (s, cov) = call(&app, "GET", &format!("/runs/{}/coverage", out.run_id), None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(cov["total_signals"], out.coverage.as_ref().unwrap().total_signals);

    let uri = format!("/hil/{id}/resolve");
    let bad = serde_json::json!({"decision": "corrected"});
    assert_eq!(call(&app, "POST", &uri, Some(bad), None).await.0, StatusCode::BAD_REQUEST);
    let invalid = serde_json::json!({"decision": "corrected", "correction": "@(posedge clk) x |-> y"});
    assert_eq!(call(&app, "POST", &uri, Some(invalid), None).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let good = serde_json::json!({"decision": "corrected", "correction": core("tests/golden/fig2_corrected.sva")});
    let (s, body) = call(&app, "POST", &uri, Some(good.clone()), None).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    let resolved: ResolveResponse = serde_json::from_value(body).unwrap();
    assert!(resolved.cache_entry.is_some());
    assert_eq!(call(&app, "POST", &uri, Some(good), None).await.0, StatusCode::CONFLICT);
    assert_eq!(
        call(&app, "POST", "/hil/nope/resolve", Some(serde_json::json!({"decision": "accepted"})), None).await.0,
        StatusCode::NOT_FOUND
    );

    let (_, ledger) = call(&app, "GET", &format!("/runs/{}/ledger", out.run_id), None, None).await;
    let entries: Vec<LedgerEntry> = serde_json::from_value(ledger).unwrap();
    assert_eq!(entries.len(), out.ledger.len() + 3);
    assert!(entries.iter().any(|e| e.event.kind_name() == "HilResolved"));
    assert_eq!(call(&app, "GET", "/hil/pending", None, None).await.1, Value::Array(vec![]));
}

#[tokio::test]
async fn bearer_token_is_enforced() {
    let (_, app) = setup(Some("s3cret"));
    assert_eq!(call(&app, "GET", "/runs", None, None).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(call(&app, "GET", "/runs", None, Some("wrong")).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(call(&app, "GET", "/runs", None, Some("s3cret")).await.0, StatusCode::OK);
}

/// Read SSE frames until `n` `data:` lines arrived.
async fn sse_data(body: &mut Body, n: usize) -> Vec<(String, LedgerEntry)> {
    let mut buf = String::new();
    let mut out = Vec::new();
    while out.len() < n {
        let frame =
            tokio::time::timeout(Duration::from_secs(5), body.frame()).await.expect("sse stalled").unwrap().unwrap();
        let Ok(data) = frame.into_data() else { continue };
        buf.push_str(std::str::from_utf8(&data).unwrap());
        while let Some(end) = buf.find("\n\n") {
            let block: String = buf.drain(..end + 2).collect();
            let event = block.lines().find_map(|l| l.strip_prefix("event: ")).unwrap_or("").to_string();
            if let Some(d) = block.lines().find_map(|l| l.strip_prefix("data: ")) {
                out.push((event, serde_json::from_str(d).unwrap()));
            }
        }
    }
    out
}

#[tokio::test]
async fn events_stream_history_then_live_entries() {
    let (q, app) = setup(None);
    let out = pending_run(q.cache());
    q.register(&out, &encoder(), None, None);
    let req = Request::builder().uri(format!("/events/{}", out.run_id)).body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let mut body = resp.into_body();

    let history = sse_data(&mut body, out.ledger.len()).await;
    let want: Vec<LedgerEntry> = out.ledger.entries().to_vec();
    assert_eq!(history.iter().map(|(_, e)| e.clone()).collect::<Vec<_>>(), want);
    assert_eq!(history[0].0, "SpecParsed");

    let id = q.pending()[0].item_id.clone();
    let q2 = q.clone();
    tokio::task::spawn_blocking(move || {
        q2.resolve(&id, forge_core::orchestr::HilDecision::Declined, chrono::Utc::now())
    })
    .await
    .unwrap()
    .unwrap();
    let live = sse_data(&mut body, 2).await;
    let kinds: Vec<&str> = live.iter().map(|(k, _)| k.as_str()).collect();
    assert_eq!(kinds, ["HilResolved", "DatasetRecordEmitted"]);
    assert_eq!(live[0].1.seq as usize, out.ledger.len());
}
