use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use hexkey_core::charact::import_log;
use hexkey_service::{router, AppState};

fn app(dir: &Path) -> Router {
    router(Arc::new(AppState::open(dir).unwrap()))
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let (s, b) = send(app, Method::POST, uri, Some(body)).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = send(app, Method::GET, uri, None).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

/// Movement time of the population model plus a small deterministic wobble.
fn scripted_mt(from: &Value, to: &Value, n: u64) -> f64 {
    let dx = to["cx"].as_f64().unwrap() - from["cx"].as_f64().unwrap();
    let dy = to["cy"].as_f64().unwrap() - from["cy"].as_f64().unwrap();
    let id = ((dx * dx + dy * dy).sqrt() / 130.0 + 1.0).log2();
    let wobble = ((n * 7919) % 101) as f64 / 100.0 * 0.04 - 0.02;
    (0.127 + id / 4.9 + wobble).max(0.01)
}

/// Clicks each highlighted target until the session stops issuing them or
/// `limit` clicks have been made. Returns the last click response and the clock.
async fn click_through(
    app: &Router,
    id: &str,
    limit: usize,
    mut mt: impl FnMut(&Value, &Value, u64) -> f64,
) -> (Value, f64) {
    let (_, snap) = get(app, &format!("/sessions/{id}")).await;
    let mut from = snap["current_key"].clone();
    let mut target = snap["next_target"].clone();
    let mut t = 0.0;
    let mut last = Value::Null;
    for n in 0..limit as u64 {
        if target.is_null() {
            break;
        }
        t += mt(&from, &target, n);
        let (status, resp) = post(
            app,
            &format!("/sessions/{id}/clicks"),
            json!({"clicked_key": target, "t": t}),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{resp}");
        assert_eq!(resp["success"], true);
        from = target;
        target = resp["next_target"].clone();
        last = resp;
    }
    (last, t)
}

async fn new_session(app: &Router, seed: u64) -> String {
    let (status, v) = post(app, "/sessions", json!({"seed": seed})).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert!(v["first_target"].is_object());
    v["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn healthz() {
    let dir = tempfile::tempdir().unwrap();
    let (status, _) = send(&app(dir.path()), Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn scripted_session_yields_a_full_model() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = new_session(&app, 3).await;

    let (status, _) = get(&app, &format!("/sessions/{id}/model")).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (last, _) = click_through(&app, &id, 400, scripted_mt).await;
    assert!(last["next_target"].is_null());
    assert_eq!(last["progress"]["phase"], "complete");
    assert_eq!(last["progress"]["cap"], 400);
    assert_eq!(last["progress"]["presented"], 225);

    let (status, model) = get(&app, &format!("/sessions/{id}/model")).await;
    assert_eq!(status, StatusCode::OK);
    let bins = model["bins"].as_array().unwrap();
    assert_eq!(bins.len(), 16);
    assert!(bins.iter().all(|b| b["fitted"] == true));
    assert!(dir.path().join(format!("models/{id}.json")).exists());
}

#[tokio::test]
async fn session_stops_at_400_targets() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = new_session(&app, 11).await;
    // times unrelated to distance: every bin stays weak
    let mut lcg = 12345u64;
    let (last, t) = click_through(&app, &id, 1000, |_, _, _| {
        lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        0.3 + (lcg >> 33) as f64 / (1u64 << 31) as f64 * 2.0
    })
    .await;
    assert_eq!(last["progress"]["presented"], 400);
    assert_eq!(last["progress"]["phase"], "complete");
    assert!(last["next_target"].is_null());

    let (status, _) = post(
        &app,
        &format!("/sessions/{id}/clicks"),
        json!({"clicked_key": {"row": 4, "col": 4}, "t": t + 1.0}),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = get(&app, &format!("/sessions/{id}/model")).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn restart_rebuilds_sessions_from_their_logs() {
    let dir = tempfile::tempdir().unwrap();
    let id;
    let before;
    {
        let app = app(dir.path());
        id = new_session(&app, 21).await;
        let (_, t) = click_through(&app, &id, 40, scripted_mt).await;
        // a miss and a rest mid-session
        let (_, snap) = get(&app, &format!("/sessions/{id}")).await;
        let target = &snap["next_target"];
        let (row, col) = (target["row"].as_u64().unwrap(), target["col"].as_u64().unwrap());
        let wrong = json!({"row": row, "col": if col > 0 { col - 1 } else { col + 1 }});
        let (status, resp) = post(
            &app,
            &format!("/sessions/{id}/clicks"),
            json!({"clicked_key": wrong, "t": t + 0.5}),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(resp["success"], false);
        let (status, _) = post(
            &app,
            &format!("/sessions/{id}/pause"),
            json!({"t0": t + 1.0, "t1": t + 31.0}),
        )
        .await;
        assert_eq!(status, StatusCode::NO_CONTENT);
        before = get(&app, &format!("/sessions/{id}")).await.1;
        // the service is dropped here without any shutdown step
    }
    let app = app(dir.path());
    let after = get(&app, &format!("/sessions/{id}")).await.1;
    assert_eq!(before, after);

    let on_disk = std::fs::read_to_string(dir.path().join(format!("sessions/{id}.ndjson"))).unwrap();
    let (_, exported) = send(&app, Method::GET, &format!("/sessions/{id}/log"), None).await;
    assert_eq!(on_disk.as_bytes(), &exported[..]);
    assert_eq!(import_log(&on_disk).unwrap().events().count(), 41);

    // ids keep counting past the replayed ones
    let next = new_session(&app, 1).await;
    assert_ne!(next, id);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_sessions_keep_separate_logs() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mut handles = Vec::new();
    for seed in 0..10u64 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let id = new_session(&app, 100 + seed).await;
            click_through(&app, &id, 60, scripted_mt).await;
            (id, seed)
        }));
    }
    let mut ids = Vec::new();
    for h in handles {
        ids.push(h.await.unwrap());
    }
    for (id, seed) in &ids {
        let text = std::fs::read_to_string(dir.path().join(format!("sessions/{id}.ndjson"))).unwrap();
        let session = import_log(&text).unwrap();
        assert_eq!(session.seed(), 100 + seed);
        let seqs: Vec<u64> = session.events().map(|e| e.sequence_no).collect();
        assert_eq!(seqs, (1..=60).collect::<Vec<_>>());
    }
    let mut unique: Vec<_> = ids.iter().map(|(id, _)| id.clone()).collect();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), 10);
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());

    assert_eq!(get(&app, "/sessions/nope").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/sessions/..%2Fetc").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/layouts/l999999").await.0, StatusCode::NOT_FOUND);
    assert_eq!(
        post(&app, "/trials/t1/finish", json!({})).await.0,
        StatusCode::NOT_FOUND
    );

    // wrong content type
    let req = Request::post("/sessions")
        .header(header::CONTENT_TYPE, "text/plain")
        .body(Body::from("{\"seed\":1}"))
        .unwrap();
    assert_eq!(
        app.clone().oneshot(req).await.unwrap().status(),
        StatusCode::UNSUPPORTED_MEDIA_TYPE
    );
    // malformed and mistyped bodies name the problem
    let req = Request::post("/sessions")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from("{"))
        .unwrap();
    assert_eq!(
        app.clone().oneshot(req).await.unwrap().status(),
        StatusCode::BAD_REQUEST
    );
    let (status, v) = post(&app, "/sessions", json!({"seed": "x"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("seed"), "{v}");
    let (status, _) = post(
        &app,
        "/sessions",
        json!({"seed": 1, "grid": {"rows": 0, "cols": 9, "key_width_px": 130.0}}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let id = new_session(&app, 5).await;
    let clicks = format!("/sessions/{id}/clicks");
    let (status, _) = post(&app, &clicks, json!({"clicked_key": {"row": 9, "col": 0}, "t": 1.0})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // client sequence numbers: the next one records, a repeat is answered idempotently, a gap conflicts
    let (_, snap) = get(&app, &format!("/sessions/{id}")).await;
    let target = snap["next_target"].clone();
    let (status, first) = post(&app, &clicks, json!({"clicked_key": target, "t": 1.0, "client_seq": 1})).await;
    assert_eq!(status, StatusCode::OK);
    let (status, again) = post(&app, &clicks, json!({"clicked_key": target, "t": 1.0, "client_seq": 1})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first, again);
    let (status, _) = post(&app, &clicks, json!({"clicked_key": target, "t": 2.0, "client_seq": 5})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(get(&app, &format!("/sessions/{id}")).await.1["events"], 1);

    // time running backwards
    let (status, _) = post(&app, &clicks, json!({"clicked_key": first["next_target"], "t": 0.5})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = post(&app, &format!("/sessions/{id}/pause"), json!({"t0": 3.0, "t1": 2.0})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // layouts
    let (status, _) = post(&app, "/layouts", json!({"kind": "personalized", "seed": 0})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(
        &app,
        "/layouts",
        json!({"kind": "personalized", "session_id": id, "seed": 0}),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = post(&app, "/layouts", json!({"kind": "diagonal", "seed": 0})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(
        &app,
        "/layouts",
        json!({"kind": "generic", "corpus_ref": "missing", "seed": 0}),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    std::fs::write(dir.path().join("corpora/blank.txt"), "1 2 3\n").unwrap();
    let (status, _) = post(
        &app,
        "/layouts",
        json!({"kind": "generic", "corpus_ref": "blank", "seed": 0}),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn layouts_and_typing_trials() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());

    let (status, created) = post(&app, "/layouts", json!({"kind": "qwerty", "seed": 0})).await;
    assert_eq!(status, StatusCode::CREATED);
    let layout_id = created["layout_id"].as_str().unwrap().to_string();
    let (status, bytes) = send(&app, Method::GET, &format!("/layouts/{layout_id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        bytes,
        std::fs::read(dir.path().join(format!("layouts/{layout_id}.json"))).unwrap()
    );
    assert_eq!(serde_json::from_slice::<Value>(&bytes).unwrap(), created["layout"]);

    let (status, trial) = post(&app, "/trials", json!({"layout_id": layout_id, "prompt": "  go, now "})).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(trial["prompt"], "GO NOW");
    let tid = trial["trial_id"].as_str().unwrap().to_string();
    let keys = format!("/trials/{tid}/keystrokes");

    let mut t = 0.0;
    for (target, selected) in [
        ('G', 'G'),
        ('O', 'I'),
        ('O', 'O'),
        (' ', ' '),
        ('N', 'N'),
        ('O', 'O'),
        ('W', 'W'),
    ] {
        t += 0.5;
        let (status, v) = post(
            &app,
            &keys,
            json!({"char_target": target, "char_selected": selected, "t": t}),
        )
        .await;
        assert_eq!(status, StatusCode::NO_CONTENT, "{v}");
    }
    let (status, _) = post(
        &app,
        &keys,
        json!({"char_target": "W", "char_selected": "W", "t": t + 1.0}),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, report) = send(&app, Method::POST, &format!("/trials/{tid}/finish"), None).await;
    assert_eq!(status, StatusCode::OK);
    let report: Value = serde_json::from_slice(&report).unwrap();
    // six targets, one missed on the first try
    assert!((report["accuracy_pct"].as_f64().unwrap() - 500.0 / 6.0).abs() < 1e-9);
    // seven selections in 3.5 s
    assert!((report["wpm"].as_f64().unwrap() - 7.0 / (3.5 / 60.0) / 5.0).abs() < 1e-9);
    assert_eq!(report["layout"], layout_id.as_str());

    // the trial survives a restart
    let app = self::app(dir.path());
    let (status, again) = send(&app, Method::POST, &format!("/trials/{tid}/finish"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_slice::<Value>(&again).unwrap(), report);
    let log = std::fs::read_to_string(dir.path().join(format!("trials/{tid}.ndjson"))).unwrap();
    assert_eq!(log.lines().count(), 1 + 7 + 1);
}

#[tokio::test]
async fn personalized_layout_from_a_session() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = new_session(&app, 8).await;
    click_through(&app, &id, 400, scripted_mt).await;

    let (status, from_session) = post(
        &app,
        "/layouts",
        json!({"kind": "personalized", "session_id": id, "seed": 4}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, _) = get(&app, &format!("/sessions/{id}/model")).await;
    assert_eq!(status, StatusCode::OK);
    let (status, from_ref) = post(
        &app,
        "/layouts",
        json!({"kind": "personalized", "model_ref": id, "seed": 4}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(from_session["layout"], from_ref["layout"]);
    assert!(from_ref["layout"]["provenance"]["model_sha256"].is_string());
}
