mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use common::{Fixture, APP};
use http_body_util::BodyExt;
use revnote_cli::layout::DataDir;
use revnote_cli::server::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(f: &Fixture, token: Option<&str>) -> Router {
    let state = AppState::load(&DataDir::new(&f.data), token.map(String::from)).unwrap();
    router(Arc::new(state))
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value, String) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    (status, serde_json::from_str(&text).unwrap_or(Value::Null), text)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, v, _) = call(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, v)
}

async fn post(app: &Router, body: Value) -> (StatusCode, Value) {
    let req = Request::post("/api/labels")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, v, _) = call(app, req).await;
    (s, v)
}

fn label(pair: &str, who: &str, rel: &str, role: Option<&str>) -> Value {
    json!({ "pair_id": pair, "annotator": who, "relevance": rel, "role": role })
}

#[tokio::test]
async fn next_unlabeled_pair_carries_context() {
    let f = Fixture::matched();
    let app = app(&f, None);
    let (s, v) = get(&app, "/api/pairs?annotator=a1&state=unlabeled&limit=1").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["total"].as_u64().unwrap() as usize, f.pair_ids().len());
    let p = &v["pairs"][0];
    assert_eq!(p["app"]["app_id"], APP);
    assert_eq!(p["app"]["name"], "Demo Music");
    assert!(p["note"]["text"].as_str().unwrap().chars().any(char::is_uppercase), "original text");
    assert!(p["note"]["version"].is_string());
    assert!(p["review"]["full_text"].is_string());
    assert!(p["delta_t_days"].is_i64());

    let id = p["pair_id"].as_str().unwrap().to_string();
    assert_eq!(post(&app, label(&id, "a1", "irrelevant", None)).await.0, StatusCode::CREATED);
    let (_, v) = get(&app, "/api/pairs?annotator=a1&state=unlabeled").await;
    assert_eq!(v["total"].as_u64().unwrap() as usize, f.pair_ids().len() - 1);
    assert!(v["pairs"].as_array().unwrap().iter().all(|p| p["pair_id"] != id.as_str()));
    let (_, v) = get(&app, "/api/pairs?annotator=a1&state=labeled").await;
    assert_eq!(v["total"], 1);
    let (_, v) = get(&app, "/api/pairs?app=other").await;
    assert_eq!(v["total"], 0);
    assert_eq!(get(&app, "/api/pairs?state=unlabeled").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/pairs?state=bogus").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn label_validation_statuses() {
    let f = Fixture::matched();
    let app = app(&f, None);
    let id = f.pair_ids()[0].clone();

    let (s, v) = post(&app, label(&id, "a1", "irrelevant", Some("praiser"))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["error"].is_string());
    assert_eq!(post(&app, label(&id, "a1", "relevant", Some("wizard"))).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(post(&app, label(&id, "", "relevant", None)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let mut stamped = label(&id, "a1", "relevant", None);
    stamped["labeled_at"] = json!("2020-01-01T00:00:00Z");
    assert_eq!(post(&app, stamped).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(post(&app, label("nope", "a1", "relevant", None)).await.0, StatusCode::NOT_FOUND);

    let (s, v) = post(&app, label(&id, "a1", "relevant", Some("feature_requester"))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["role"], "feature_requester");
    assert!(v["labeled_at"].is_string());
    assert_eq!(post(&app, label(&id, "a1", "irrelevant", None)).await.0, StatusCode::CONFLICT);
    assert_eq!(post(&app, label(&id, "a2", "irrelevant", None)).await.0, StatusCode::CREATED);

    let (s, v) = get(&app, &format!("/api/pairs/{id}")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["labels"].as_array().unwrap().len(), 2);
    assert_eq!(get(&app, "/api/pairs/unknown").await.0, StatusCode::NOT_FOUND);
    let (s, v) = get(&app, "/api/nothing").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(v["error"].is_string());
}

#[tokio::test]
async fn labels_are_durable_and_exported() {
    let f = Fixture::matched();
    let ids = f.pair_ids();
    {
        let app = app(&f, None);
        for id in &ids[..3] {
            assert_eq!(post(&app, label(id, "a1", "relevant", Some("bug_reporter"))).await.0, StatusCode::CREATED);
        }
    }
    let on_disk = std::fs::read_to_string(f.data.join("labels.jsonl")).unwrap();
    assert_eq!(on_disk.lines().count(), 3);

    // A reload sees the same labels and still enforces uniqueness.
    let app = app(&f, None);
    assert_eq!(post(&app, label(&ids[0], "a1", "irrelevant", None)).await.0, StatusCode::CONFLICT);
    let (s, _, text) = call(&app, Request::get("/api/export").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(text, on_disk);
    let (_, v) = get(&app, "/api/progress").await;
    assert_eq!(v["labeled"], 3);
    assert_eq!(v["total"].as_u64().unwrap() as usize, ids.len());
    assert_eq!(v["per_annotator"]["a1"], 3);
    assert_eq!(v["consensus"], 0);
}

#[tokio::test]
async fn torn_final_line_is_ignored_on_reload() {
    let f = Fixture::matched();
    let ids = f.pair_ids();
    {
        let app = app(&f, None);
        post(&app, label(&ids[0], "a1", "irrelevant", None)).await;
    }
    let path = f.data.join("labels.jsonl");
    let good = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, format!("{good}{{\"pair_id\":\"{}\",\"annot", ids[1])).unwrap();

    let app = app(&f, None);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), good);
    assert_eq!(post(&app, label(&ids[1], "a1", "irrelevant", None)).await.0, StatusCode::CREATED);
    let lines: Vec<Value> = std::fs::read_to_string(&path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
}

#[tokio::test]
async fn corrupt_inputs_fail_startup() {
    let f = Fixture::matched();
    std::fs::write(f.data.join("labels.jsonl"), "garbage\n{}\n").unwrap();
    assert!(AppState::load(&DataDir::new(&f.data), None).is_err());
    std::fs::remove_file(f.data.join("labels.jsonl")).unwrap();
    let pairs = f.data.join("pairs.jsonl");
    let text = std::fs::read_to_string(&pairs).unwrap();
    std::fs::write(&pairs, text.replacen("\"rn_sentence_id\":\"", "\"rn_sentence_id\":\"zz", 1)).unwrap();
    assert!(AppState::load(&DataDir::new(&f.data), None).is_err());
}

#[tokio::test]
async fn agreement_and_adjudication() {
    let f = Fixture::matched();
    let app = app(&f, None);
    let ids = f.pair_ids();
    assert!(ids.len() >= 4);
    let (_, v) = get(&app, "/api/agreement").await;
    assert!(v["cohen_kappa"].is_null());

    // a1 and a2 agree on ids[0..2], disagree on relevance for ids[2] and on
    // role for ids[3].
    let plan = [
        (("relevant", Some("praiser")), ("relevant", Some("praiser"))),
        (("irrelevant", None), ("irrelevant", None)),
        (("relevant", Some("complainer")), ("irrelevant", None)),
        (("relevant", Some("questioner")), ("relevant", Some("complainer"))),
    ];
    for (id, (a, b)) in ids.iter().zip(plan) {
        assert_eq!(post(&app, label(id, "a1", a.0, a.1)).await.0, StatusCode::CREATED);
        assert_eq!(post(&app, label(id, "a2", b.0, b.1)).await.0, StatusCode::CREATED);
    }
    let (s, v) = get(&app, "/api/agreement").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["annotators"], json!(["a1", "a2"]));
    assert_eq!(v["common_pairs"], 4);
    assert_eq!(v["percent_agreement"], 0.75);
    // po = 3/4, pa = 3/4, pb = 2/4, pe = 3/8 + 1/8 = 1/2
    assert!((v["cohen_kappa"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(v["relevance_disagreements"], json!([ids[2]]));
    let pending: Vec<&str> = v["pending_adjudication"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["pair_id"].as_str().unwrap())
        .collect();
    let mut expected = vec![ids[2].as_str(), ids[3].as_str()];
    expected.sort();
    assert_eq!(pending, expected);

    assert_eq!(post(&app, label(&ids[2], "adjudicator", "irrelevant", None)).await.0, StatusCode::CREATED);
    let (_, v) = get(&app, "/api/agreement").await;
    assert_eq!(v["pending_adjudication"].as_array().unwrap().len(), 1);
    assert_eq!(v["annotators"], json!(["a1", "a2"]), "adjudicator is not a coder");
    let (_, p) = get(&app, "/api/progress").await;
    assert_eq!(p["consensus"], 3);

    post(&app, label(&ids[0], "a3", "relevant", None)).await;
    assert_eq!(get(&app, "/api/agreement").await.0, StatusCode::BAD_REQUEST);
    let (s, v) = get(&app, "/api/agreement?a=a1&b=a3").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["common_pairs"], 1);
}

#[tokio::test]
async fn token_guards_every_endpoint() {
    let f = Fixture::matched();
    let app = app(&f, Some("s3cret"));
    assert_eq!(get(&app, "/api/progress").await.0, StatusCode::UNAUTHORIZED);
    let wrong = Request::get("/api/progress").header("X-Api-Token", "nope").body(Body::empty()).unwrap();
    assert_eq!(call(&app, wrong).await.0, StatusCode::UNAUTHORIZED);
    let id = f.pair_ids()[0].clone();
    assert_eq!(post(&app, label(&id, "a1", "irrelevant", None)).await.0, StatusCode::UNAUTHORIZED);
    assert!(!f.data.join("labels.jsonl").exists());
    let right = Request::get("/api/progress").header("X-Api-Token", "s3cret").body(Body::empty()).unwrap();
    assert_eq!(call(&app, right).await.0, StatusCode::OK);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_duplicate_submissions_store_one_label() {
    let f = Fixture::matched();
    let app = app(&f, None);
    let id = f.pair_ids()[0].clone();
    let tasks: Vec<_> = (0..16)
        .map(|_| {
            let (app, id) = (app.clone(), id.clone());
            tokio::spawn(async move { post(&app, label(&id, "a1", "irrelevant", None)).await.0 })
        })
        .collect();
    let mut created = 0;
    for t in tasks {
        match t.await.unwrap() {
            StatusCode::CREATED => created += 1,
            s => assert_eq!(s, StatusCode::CONFLICT),
        }
    }
    assert_eq!(created, 1);
    assert_eq!(std::fs::read_to_string(f.data.join("labels.jsonl")).unwrap().lines().count(), 1);
}

#[test]
fn serve_reports_missing_pairs() {
    let f = Fixture::ingested();
    let out = f.raw(&["serve", "--port", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pairs"));
}
