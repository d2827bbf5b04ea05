use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use mixbo::bench::{bnh, retrofit};
use mixbo::driver::{run, write_history, RunConfig};
use mixbo::moea::Nsga2Config;
use mixbo_service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let v = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, v)
}

fn bnh_config(doe: usize, budget: usize, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(bnh().space, 2, 2, doe, budget);
    cfg.seed = seed;
    cfg.nsga2 = Nsga2Config {
        pop_size: 20,
        generations: 10,
        ..Nsga2Config::default()
    };
    cfg
}

fn create_body(cfg: &RunConfig) -> Value {
    json!({"version": 1, "config": serde_json::from_str::<Value>(&cfg.to_json()).unwrap()})
}

async fn create(app: &Router, cfg: &RunConfig) -> String {
    let (s, v) = call(app, "POST", "/v1/sessions", Some(create_body(cfg))).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

/// Named values back into the evaluator's native form.
fn evaluate(cfg: &RunConfig, ask: &Value) -> (Vec<f64>, Vec<f64>) {
    let space = &cfg.space;
    let values = space
        .variables()
        .iter()
        .enumerate()
        .map(|(i, var)| {
            let v = &ask["point"][&var.name];
            let text = v.as_str().map_or_else(|| v.to_string(), str::to_string);
            space.parse_value(i, &text).unwrap()
        })
        .collect();
    bnh().evaluate(&space.point(values).unwrap())
}

async fn drive(app: &Router, id: &str, cfg: &RunConfig, steps: usize) {
    for _ in 0..steps {
        let (s, a) = call(app, "GET", &format!("/v1/sessions/{id}/ask"), None).await;
        assert_eq!(s, StatusCode::OK, "{a}");
        let (f, g) = evaluate(cfg, &a);
        let (s, t) = call(
            app,
            "POST",
            &format!("/v1/sessions/{id}/tell"),
            Some(json!({"version": 1, "token": a["token"], "f": f, "g": g, "status": "ok"})),
        )
        .await;
        assert_eq!(s, StatusCode::OK, "{t}");
    }
}

fn app_in(dir: &std::path::Path) -> Router {
    router(AppState::open(dir).unwrap())
}

#[tokio::test]
async fn create_echoes_relaxed_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let p = retrofit();
    let mut cfg = RunConfig::new(p.space, 4, 4, 13, 81);
    cfg.maximize = p.maximize;
    let (s, v) = call(&app, "POST", "/v1/sessions", Some(create_body(&cfg))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["relaxed_dimension"], 7);
    assert_eq!(v["phase"], "doe");
    assert_eq!(v["version"], 1);
    let id = v["id"].as_str().unwrap();
    assert!(dir.path().join(id).join("events.jsonl").is_file());
}

#[tokio::test]
async fn invalid_create_bodies_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let good = create_body(&bnh_config(4, 6, 1));
    let mut unknown_kind = good.clone();
    unknown_kind["config"]["space"]["variables"][0]["kind"] = json!("quaternion");
    let mut duplicate = good.clone();
    let first = duplicate["config"]["space"]["variables"][0].clone();
    duplicate["config"]["space"]["variables"][1]["name"] = first["name"].clone();
    let mut extra = good.clone();
    extra["colour"] = json!("blue");
    let mut version = good.clone();
    version["version"] = json!(2);
    let mut budget = good.clone();
    budget["config"]["budget"] = json!(1);
    for (what, body) in [
        ("unknown kind", unknown_kind),
        ("duplicate name", duplicate),
        ("unknown field", extra),
        ("version", version),
        ("budget", budget),
    ] {
        let (s, v) = call(&app, "POST", "/v1/sessions", Some(body)).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{what}: {v}");
        assert!(!v["error"]["message"].as_str().unwrap().is_empty());
    }
    let (s, _) = call(&app, "POST", "/v1/sessions", Some(json!("not an object"))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn ask_tell_protocol_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let cfg = bnh_config(3, 4, 2);
    let (s, _) = call(&app, "GET", "/v1/sessions/nope/ask", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let id = create(&app, &cfg).await;
    let tell_uri = format!("/v1/sessions/{id}/tell");
    let (s, v) = call(&app, "POST", &tell_uri, Some(json!({"version": 1, "token": "x", "f": [1, 2], "g": [0, 0]}))).await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");

    let (s, a) = call(&app, "GET", &format!("/v1/sessions/{id}/ask"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(a["evaluation"], 0);
    assert_eq!(a["origin"], "doe");
    assert_eq!(a["active"]["x1"], true);
    let (s, _) = call(&app, "GET", &format!("/v1/sessions/{id}/ask"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (_, st) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(st["pending_token"], a["token"]);

    let (s, _) = call(&app, "POST", &tell_uri, Some(json!({"version": 1, "token": "wrong", "f": [1, 2], "g": [0, 0]}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call(&app, "POST", &tell_uri, Some(json!({"version": 1, "token": a["token"], "f": [1], "g": [0, 0]}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "POST", &tell_uri, Some(json!({"version": 1, "token": a["token"], "f": [1, 2], "g": [0]}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "POST", &tell_uri, Some(json!({"version": 1, "token": a["token"], "f": [1, 2], "g": [0, 0], "x": 1}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (_, st) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(st["evaluations"], 0);

    let (f, g) = evaluate(&cfg, &a);
    let (s, t) = call(&app, "POST", &tell_uri, Some(json!({"version": 1, "token": a["token"], "f": f, "g": g}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(t["evaluations"], 1);
    assert_eq!(t["status"], "ok");

    // failed evaluations are stored as such
    let (_, a) = call(&app, "GET", &format!("/v1/sessions/{id}/ask"), None).await;
    let (s, t) = call(&app, "POST", &tell_uri, Some(json!({"version": 1, "token": a["token"], "status": "failed"}))).await;
    assert_eq!(s, StatusCode::OK, "{t}");
    assert_eq!(t["status"], "failed");
    let (_, a) = call(&app, "GET", &format!("/v1/sessions/{id}/ask"), None).await;
    let (_, t) = call(&app, "POST", &tell_uri, Some(json!({"version": 1, "token": a["token"], "f": [null, 1.0], "g": [0, 0]}))).await;
    assert_eq!(t["status"], "failed");
    let (_, st) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(st["failed"], 2);
    assert_eq!(st["phase"], "enrich");
}

#[tokio::test]
async fn finished_session_serves_results() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let cfg = bnh_config(4, 6, 3);
    let id = create(&app, &cfg).await;
    let results_uri = format!("/v1/sessions/{id}/results");
    drive(&app, &id, &cfg, 5).await;
    let (s, v) = call(&app, "GET", &results_uri, None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert!(v["links"]["results"].is_string());
    let (s, forced) = call(&app, "GET", &format!("{results_uri}?force=true"), None).await;
    assert_eq!(s, StatusCode::OK, "{forced}");
    assert_eq!(forced["forced"], true);
    assert_eq!(forced["evaluations"], 5);
    let (s, _) = call(&app, "GET", &format!("{results_uri}?force=maybe"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    drive(&app, &id, &cfg, 1).await;
    let (s, v) = call(&app, "GET", &format!("/v1/sessions/{id}/ask"), None).await;
    assert_eq!(s, StatusCode::GONE);
    assert_eq!(v["links"]["results"], results_uri.as_str());
    let (s, r1) = call(&app, "GET", &results_uri, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(r1["forced"], false);
    assert!(!r1["pf_database"].as_array().unwrap().is_empty());
    assert!(!r1["predicted_pf"].as_array().unwrap().is_empty());
    assert!(r1["proximity"]["summary"].as_str().unwrap().contains("survive in the merged front"));
    let (_, r2) = call(&app, "GET", &results_uri, None).await;
    assert_eq!(r1, r2);
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bnh_config(3, 7, 4);
    let id = {
        let app = app_in(dir.path());
        let id = create(&app, &cfg).await;
        drive(&app, &id, &cfg, 4).await;
        let (s, _) = call(&app, "GET", &format!("/v1/sessions/{id}/ask"), None).await;
        assert_eq!(s, StatusCode::OK);
        id
    };
    // torn write at the end of the log
    let log = dir.path().join(&id).join("events.jsonl");
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.push_str("{\"event\":\"tell\",\"at_");
    std::fs::write(&log, text).unwrap();

    let app = app_in(dir.path());
    let (s, st) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(st["evaluations"], 4);
    let token = st["pending_token"].as_str().unwrap().to_string();
    let (s, _) = call(&app, "GET", &format!("/v1/sessions/{id}/ask"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    // finish the pending ask from the recovered state, then the rest
    let (_, h) = call(&app, "GET", &format!("/v1/sessions/{id}/history"), None).await;
    assert!(h.as_str().unwrap().starts_with("id,origin,status,x1,x2,"));
    assert_eq!(h.as_str().unwrap().lines().count(), 5);
    let (expected, _) = run(cfg.clone(), |q| Ok(bnh().evaluate(q))).unwrap();
    let q = &expected.history()[4].point;
    let (f, g) = bnh().evaluate(q);
    let (s, t) = call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/tell"),
        Some(json!({"version": 1, "token": token, "f": f, "g": g})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{t}");
    drive(&app, &id, &cfg, 2).await;
    let (_, csv) = call(&app, "GET", &format!("/v1/sessions/{id}/history"), None).await;
    let mut buf = Vec::new();
    write_history(&expected, &mut buf).unwrap();
    assert_eq!(csv.as_str().unwrap().as_bytes(), buf.as_slice());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_asks_on_one_session_serialize() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let cfg = bnh_config(5, 8, 5);
    let id = create(&app, &cfg).await;
    let other = create(&app, &cfg).await;
    let mut handles = Vec::new();
    for k in 0..8 {
        let app = app.clone();
        let sid = if k < 6 { id.clone() } else { other.clone() };
        handles.push(tokio::spawn(async move { call(&app, "GET", &format!("/v1/sessions/{sid}/ask"), None).await }));
    }
    let mut statuses = Vec::new();
    for h in handles {
        statuses.push(h.await.unwrap().0);
    }
    let ok_first = statuses[..6].iter().filter(|s| **s == StatusCode::OK).count();
    assert_eq!(ok_first, 1, "{statuses:?}");
    assert!(statuses[..6].iter().all(|s| *s == StatusCode::OK || *s == StatusCode::CONFLICT));
    assert_eq!(statuses[6..].iter().filter(|s| **s == StatusCode::OK).count(), 1);
    let log = std::fs::read_to_string(dir.path().join(&id).join("events.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
}
