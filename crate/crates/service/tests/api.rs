use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use persum_core::config::EngineConfig;
use persum_service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &std::path::Path) -> Router {
    router(Arc::new(AppState::new(EngineConfig::default(), dir)))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, v)
}

async fn create(app: &Router, mode: &str, seed: u64) -> String {
    let body = json!({"mode": mode, "corpus_id": format!("synth-{seed}"), "budget": 45, "seed": seed});
    let (status, v) = call(app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["schema_version"], 1);
    v["session_id"].as_str().unwrap().to_string()
}

async fn query(app: &Router, id: &str) -> Value {
    let (status, v) = call(app, Method::GET, &format!("/sessions/{id}/query"), None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v
}

async fn summary(app: &Router, id: &str) -> Value {
    let (status, v) = call(app, Method::GET, &format!("/sessions/{id}/summary"), None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v
}

/// Deterministic answer to whatever query is pending; `step` varies the
/// choices between rounds and sessions.
fn answer_for(q: &Value, step: u64) -> Value {
    let query = &q["query"];
    match query["kind"].as_str().unwrap() {
        "concept_group" => {
            let items: Vec<Value> = query["items"]
                .as_array()
                .unwrap()
                .iter()
                .enumerate()
                .map(|(k, item)| {
                    let accept = (step + k as u64) % 3 != 0;
                    json!({
                        "concept_id": item["concept_id"],
                        "action": if accept { 1 } else { -1 },
                        "weight": 0.5 + 0.1 * ((step + k as u64) % 5) as f64,
                    })
                })
                .collect();
            json!({"round": q["round"], "items": items})
        }
        _ => json!({"round": q["round"], "winner": if step % 3 == 1 { "right" } else { "left" }}),
    }
}

/// Answers queries until the session converges or `max_rounds` pass, and
/// returns the final summary.
async fn drive(app: &Router, id: &str, salt: u64, max_rounds: usize) -> Value {
    for step in 0..max_rounds as u64 {
        let q = query(app, id).await;
        if q["status"] == "converged" {
            assert!(q["query"].is_null());
            break;
        }
        let (status, v) = call(app, Method::POST, &format!("/sessions/{id}/feedback"), Some(answer_for(&q, salt * 31 + step))).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        tokio::task::yield_now().await;
    }
    summary(app, id).await
}

fn words(v: &Value) -> usize {
    v["word_count"].as_u64().unwrap() as usize
}

#[tokio::test]
async fn health_check_reports_schema_version() {
    let dir = tempfile::tempdir().unwrap();
    let (status, v) = call(&app(dir.path()), Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!({"schema_version": 1, "status": "ok"}));
}

#[tokio::test]
async fn adaptive_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = create(&app, "adaptive", 1).await;
    let first = summary(&app, &id).await;
    assert!(words(&first) <= 45);
    assert_eq!(first["sentences"].as_array().unwrap().len(), first["sentence_ids"].as_array().unwrap().len());

    let q = query(&app, &id).await;
    assert_eq!(q["query"]["kind"], "concept_group");
    assert_eq!(q["round"], 0);
    let items = q["query"]["items"].as_array().unwrap();
    assert!(!items.is_empty() && items.len() <= EngineConfig::default().group_size);

    let (status, v) = call(&app, Method::POST, &format!("/sessions/{id}/feedback"), Some(answer_for(&q, 0))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["round"], 1);
    assert!(words(&v["summary"]) <= 45);
    assert_eq!(query(&app, &id).await["round"], 1);
}

#[tokio::test]
async fn preference_session_runs_to_convergence_then_refuses_feedback() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = create(&app, "sumrecom", 2).await;
    let q = query(&app, &id).await;
    assert_eq!(q["query"]["kind"], "concepts");
    assert!(q["query"]["left"]["label"].is_string());

    let s = drive(&app, &id, 0, 500).await;
    assert_eq!(s["status"], "converged");
    assert!(words(&s) <= 45 && words(&s) > 0);

    let (status, v) = call(&app, Method::POST, &format!("/sessions/{id}/feedback"), Some(json!({"winner": "left"}))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{v}");
    assert_eq!(v["schema_version"], 1);
}

#[tokio::test]
async fn feedback_outside_the_pending_query_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = create(&app, "adaptive", 3).await;
    let q = query(&app, &id).await;
    let pending: Vec<u64> = q["query"]["items"].as_array().unwrap().iter().map(|i| i["concept_id"].as_u64().unwrap()).collect();
    let outside = (0..).find(|c| !pending.contains(c)).unwrap();
    let uri = format!("/sessions/{id}/feedback");

    let body = json!({"items": [{"concept_id": outside, "action": 1, "weight": 0.5}]});
    assert_eq!(call(&app, Method::POST, &uri, Some(body)).await.0, StatusCode::CONFLICT);

    let stale = json!({"round": 7, "items": [{"concept_id": pending[0], "action": 1, "weight": 0.5}]});
    assert_eq!(call(&app, Method::POST, &uri, Some(stale)).await.0, StatusCode::CONFLICT);

    // Nothing was applied.
    assert_eq!(query(&app, &id).await["round"], 0);
}

#[tokio::test]
async fn malformed_bodies_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let field_of = |v: &Value| v["error"]["fields"][0]["field"].as_str().unwrap().to_string();

    let (status, v) = call(&app, Method::POST, "/sessions", Some(json!({"mode": "psychic", "corpus_id": "synth-1"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(field_of(&v), "mode");

    let (status, v) = call(&app, Method::POST, "/sessions", Some(json!({"mode": "adaptive", "corpus_id": "synth-1", "budget": "many"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(field_of(&v), "budget");

    let (status, v) = call(&app, Method::POST, "/sessions", Some(json!({"mode": "adaptive", "corpus_id": "../etc"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(field_of(&v), "corpus_id");

    let (status, v) = call(&app, Method::POST, "/sessions", Some(json!({"mode": "adaptive", "corpus_id": "nowhere"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(field_of(&v), "corpus_id");

    let id = create(&app, "adaptive", 4).await;
    let q = query(&app, &id).await;
    let concept = q["query"]["items"][0]["concept_id"].clone();
    let uri = format!("/sessions/{id}/feedback");

    let (status, v) = call(&app, Method::POST, &uri, Some(json!({"items": [{"concept_id": concept, "action": 1, "weight": 3.0}]}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(field_of(&v), "items[0].weight");

    let (status, v) = call(&app, Method::POST, &uri, Some(json!({"items": [{"concept_id": concept, "action": 5, "weight": 0.5}]}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(field_of(&v), "items[0].action");

    let (status, _) = call(&app, Method::POST, &uri, Some(Value::String("not an object".into()))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn unknown_sessions_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    for uri in ["/sessions/not-a-uuid/query", "/sessions/6f1c1f9e-52a4-4a57-8a3e-3f1f4bb4e4a0/summary"] {
        let (status, v) = call(&app, Method::GET, uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert_eq!(v["error"]["code"], 404);
    }
    let (status, _) = call(
        &app,
        Method::POST,
        "/sessions/6f1c1f9e-52a4-4a57-8a3e-3f1f4bb4e4a0/feedback",
        Some(json!({"winner": "left"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn one_shot_summary_respects_budget() {
    let dir = tempfile::tempdir().unwrap();
    let (status, v) = call(&app(dir.path()), Method::POST, "/summarize", Some(json!({"corpus_id": "synth-5", "budget": 30}))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert!(words(&v) <= 30 && words(&v) > 0);
    assert!(v["score"]["total"].is_number());
}

#[tokio::test]
async fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let first = app(dir.path());
    let adaptive = create(&first, "adaptive", 6).await;
    let prefs = create(&first, "sumrecom", 6).await;
    for step in 0..3 {
        for id in [&adaptive, &prefs] {
            let q = query(&first, id).await;
            let (status, v) = call(&first, Method::POST, &format!("/sessions/{id}/feedback"), Some(answer_for(&q, step))).await;
            assert_eq!(status, StatusCode::OK, "{v}");
        }
    }
    let mut before = Vec::new();
    for id in [&adaptive, &prefs] {
        before.push((summary(&first, id).await, query(&first, id).await));
    }
    drop(first);

    let second = app(dir.path());
    for (id, (s, q)) in [&adaptive, &prefs].iter().zip(before) {
        assert_eq!(summary(&second, id).await, s);
        assert_eq!(query(&second, id).await, q);
    }
    // The restored sessions keep going.
    let q = query(&second, &adaptive).await;
    let (status, _) = call(&second, Method::POST, &format!("/sessions/{adaptive}/feedback"), Some(answer_for(&q, 9))).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn parallel_sessions_match_serial_replay() {
    const SESSIONS: u64 = 8;
    const ROUNDS: usize = 6;
    let dir = tempfile::tempdir().unwrap();
    let shared = app(dir.path());

    let mut handles = Vec::new();
    for k in 0..SESSIONS {
        let app = shared.clone();
        handles.push(tokio::spawn(async move {
            let mode = if k % 2 == 0 { "adaptive" } else { "sumrecom" };
            let id = create(&app, mode, 10 + k % 3).await;
            let s = drive(&app, &id, k, ROUNDS).await;
            (k, mode, s)
        }));
    }
    let mut parallel = Vec::new();
    for h in handles {
        parallel.push(h.await.unwrap());
    }

    let serial_dir = tempfile::tempdir().unwrap();
    let serial = app(serial_dir.path());
    for (k, mode, s) in parallel {
        let id = create(&serial, mode, 10 + k % 3).await;
        let replayed = drive(&serial, &id, k, ROUNDS).await;
        for key in ["sentence_ids", "word_count", "round", "status", "score"] {
            assert_eq!(replayed[key], s[key], "session {k} ({mode}) differs in {key}");
        }
    }
}
