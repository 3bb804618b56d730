use std::path::Path;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use detscope_service::{app, Config};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    _tmp: tempfile::TempDir,
    config: Config,
    input: std::path::PathBuf,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("input");
    std::fs::create_dir_all(&input).unwrap();
    std::fs::write(input.join("vocabulary.txt"), "dog\ncat\n").unwrap();
    std::fs::write(
        input.join("detections.jsonl"),
        [
            r#"{"id":"d1","image_id":"img1","class":"dog","bbox":[0,0,10,10],"confidence":0.9}"#,
            r#"{"id":"d2","image_id":"img1","class":"dog","bbox":[20,20,30,30],"confidence":0.8}"#,
            r#"{"id":"d3","image_id":"img2","class":"dog","bbox":[0,0,5,5],"confidence":0.2}"#,
            r#"{"id":"c1","image_id":"img2","class":"cat","bbox":[5,5,9,9],"confidence":0.6}"#,
        ]
        .join("\n"),
    )
    .unwrap();
    std::fs::write(
        input.join("ground_truth.jsonl"),
        r#"{"image_id":"img1","class":"dog","bbox":[0,0,10,10]}"#,
    )
    .unwrap();
    let images = tmp.path().join("images");
    std::fs::create_dir_all(&images).unwrap();
    std::fs::write(images.join("img1.png"), b"\x89PNG fake").unwrap();
    let config = Config {
        listen: "127.0.0.1:0".parse().unwrap(),
        data_dir: tmp.path().join("data"),
        image_dir: images,
    };
    Fixture {
        _tmp: tmp,
        config,
        input,
    }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(v.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(app, Method::GET, uri, None).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let (s, b) = call(app, Method::POST, uri, Some(body)).await;
    (s, serde_json::from_slice(&b).unwrap())
}

async fn load(app: &Router, dir: &Path) -> String {
    let (s, v) = post_json(app, "/datasets", json!({ "dir": dir })).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["dataset_id"].as_str().unwrap().to_string()
}

async fn new_session(app: &Router, dataset_id: &str) -> String {
    let (s, v) = post_json(app, "/sessions", json!({ "dataset_id": dataset_id })).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

fn eliminate(ids: &[&str]) -> Value {
    json!({ "kind": "eliminate_fp", "payload": { "detection_ids": ids }, "actor": "ana" })
}

#[tokio::test]
async fn empty_data_dir_lists_nothing() {
    let f = fixture();
    let app = app(&f.config).unwrap();
    let (s, v) = get_json(&app, "/datasets").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!([]));
}

#[tokio::test]
async fn unknown_route_is_not_found() {
    let f = fixture();
    let app = app(&f.config).unwrap();
    let (s, v) = get_json(&app, "/nope/nothing").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");
}

#[tokio::test]
async fn elimination_projects_mean_085() {
    let f = fixture();
    let app = app(&f.config).unwrap();
    let d = load(&app, &f.input).await;
    let s = new_session(&app, &d).await;
    let (st, ev) = post_json(&app, &format!("/sessions/{s}/events"), eliminate(&["d3"])).await;
    assert_eq!(st, StatusCode::CREATED, "{ev}");
    assert_eq!(ev["index"], 0);

    let (_, series) = get_json(&app, &format!("/sessions/{s}/projection/dog")).await;
    let means: Vec<f64> = series
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["mean_confidence"].as_f64().unwrap())
        .collect();
    assert_eq!(means.len(), 2);
    assert!((means[0] - 1.9 / 3.0).abs() < 1e-12);
    assert!((means[1] - 0.85).abs() < 1e-12);
}

#[tokio::test]
async fn elimination_errors_map_to_codes() {
    let f = fixture();
    let app = app(&f.config).unwrap();
    let d = load(&app, &f.input).await;
    let s = new_session(&app, &d).await;
    let uri = format!("/sessions/{s}/events");
    let (st, v) = post_json(&app, &uri, eliminate(&["zz"])).await;
    assert_eq!((st, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_detection")));
    post_json(&app, &uri, eliminate(&["d1"])).await;
    let (st, v) = post_json(&app, &uri, eliminate(&["d1"])).await;
    assert_eq!((st, v["code"].as_str()), (StatusCode::CONFLICT, Some("already_eliminated")));
    let (st, v) = post_json(&app, &uri, json!({ "kind": "teleport", "payload": {} })).await;
    assert_eq!((st, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_payload")));
    // rejected events never reach the log
    let (_, sess) = get_json(&app, &format!("/sessions/{s}")).await;
    assert_eq!(sess["event_count"], 1);
    let (st, v) = get_json(&app, "/sessions/nope").await;
    assert_eq!((st, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_session")));
    let (st, v) = get_json(&app, "/datasets/nope/classes").await;
    assert_eq!((st, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_dataset")));
}

#[tokio::test]
async fn restart_replays_identical_state() {
    let f = fixture();
    let first = app(&f.config).unwrap();
    let d = load(&first, &f.input).await;
    let s = new_session(&first, &d).await;
    let uri = format!("/sessions/{s}/events");
    post_json(&first, &uri, eliminate(&["d3"])).await;
    post_json(
        &first,
        &uri,
        json!({ "kind": "reannotate_bbox", "payload": { "detection_id": "d2", "bbox": [21.5, 20, 30, 31] }, "actor": "ana" }),
    )
    .await;
    post_json(
        &first,
        &uri,
        json!({ "kind": "add_false_negative", "payload": { "image_id": "img2", "class": "cat", "bbox": [1, 1, 2, 2] }, "actor": "bo" }),
    )
    .await;
    post_json(&first, &uri, json!({ "kind": "revert", "payload": { "target": 0 }, "actor": "ana" })).await;

    let paths = [
        format!("/sessions/{s}"),
        format!("/sessions/{s}/events"),
        format!("/sessions/{s}/projection/dog"),
        format!("/sessions/{s}/projection/cat"),
        format!("/sessions/{s}/mapping/img1"),
        format!("/sessions/{s}/mapping/img2"),
        format!("/sessions/{s}/export"),
        "/datasets".to_string(),
    ];
    let mut before = Vec::new();
    for p in &paths {
        before.push(call(&first, Method::GET, p, None).await);
    }
    drop(first);
    let second = app(&f.config).unwrap();
    for (p, want) in paths.iter().zip(&before) {
        assert_eq!(&call(&second, Method::GET, p, None).await, want, "{p}");
    }
}

#[tokio::test]
async fn corrupt_log_aborts_startup_with_location() {
    let f = fixture();
    let first = app(&f.config).unwrap();
    let d = load(&first, &f.input).await;
    let s = new_session(&first, &d).await;
    post_json(&first, &format!("/sessions/{s}/events"), eliminate(&["d3"])).await;
    let log = f.config.data_dir.join("sessions").join(&s).join("events.jsonl");
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.push_str("{not json\n");
    std::fs::write(&log, text).unwrap();
    let err = app(&f.config).unwrap_err().to_string();
    assert!(err.contains("events.jsonl"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}

#[tokio::test]
async fn changed_source_files_abort_startup() {
    let f = fixture();
    let first = app(&f.config).unwrap();
    load(&first, &f.input).await;
    std::fs::write(f.input.join("vocabulary.txt"), "dog\ncat\nemu\n").unwrap();
    let err = app(&f.config).unwrap_err().to_string();
    assert!(err.contains("changed"), "{err}");
}

#[tokio::test]
async fn reloading_same_files_is_idempotent() {
    let f = fixture();
    let app = app(&f.config).unwrap();
    let d = load(&app, &f.input).await;
    let (s, v) = post_json(&app, "/datasets", json!({ "dir": f.input })).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["dataset_id"], d.as_str());
    let (s, v) = post_json(&app, "/datasets", json!({ "dir": f.input.join("missing") })).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("io_error")));
}

#[tokio::test]
async fn detections_are_paginated_by_id() {
    let f = fixture();
    let app = app(&f.config).unwrap();
    let d = load(&app, &f.input).await;
    let (_, v) = get_json(&app, &format!("/datasets/{d}/classes/dog/detections?limit=2&offset=1")).await;
    assert_eq!(v["total"], 3);
    let ids: Vec<&str> = v["items"].as_array().unwrap().iter().map(|x| x["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["d2", "d3"]);
    let (_, v) = get_json(&app, &format!("/datasets/{d}/classes/dog/detections")).await;
    assert_eq!(v["limit"], 200);
    let (s, v) = get_json(&app, &format!("/datasets/{d}/classes/emu/detections")).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("no_such_class")));
    let (s, v) = get_json(&app, &format!("/datasets/{d}/classes/dog/detections?limit=x")).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));
}

#[tokio::test]
async fn metrics_and_proportions_endpoints() {
    let f = fixture();
    let app = app(&f.config).unwrap();
    let d = load(&app, &f.input).await;
    let (s, v) = get_json(&app, &format!("/datasets/{d}/metrics/class-stats")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v.as_array().unwrap().len(), 2);
    let (s, v) = get_json(&app, &format!("/datasets/{d}/metrics/confidence-size")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["points"].as_array().unwrap().len(), 2);
    let (s, v) = get_json(&app, &format!("/datasets/{d}/metrics/clutter")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["scores"].as_array().unwrap().len(), 2);
    let (s, v) = get_json(&app, &format!("/datasets/{d}/class-proportions")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v[0]["class_label"], "dog");
    let (s, body) = call(&app, Method::GET, &format!("/datasets/{d}/metrics/report?format=csv"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(String::from_utf8(body).unwrap().starts_with("[meta]\n"));
}

#[tokio::test]
async fn totem_endpoints_validate_parameters() {
    let f = fixture();
    let app = app(&f.config).unwrap();
    let d = load(&app, &f.input).await;
    let (s, v) = get_json(&app, &format!("/datasets/{d}/totem/graph?threshold=0")).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_edge_threshold")));
    let (s, v) = get_json(&app, &format!("/datasets/{d}/totem/graph")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["nodes"], json!([]));
    let (s, v) = get_json(&app, &format!("/datasets/{d}/totem/cliques?min_size=1")).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_min_size")));
    let (s, v) = get_json(&app, &format!("/datasets/{d}/totem/similarity")).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("too_few_profiles")));
}

#[tokio::test]
async fn images_are_served_without_traversal() {
    let f = fixture();
    std::fs::write(f.config.data_dir.parent().unwrap().join("secret.png"), b"x").unwrap();
    let app = app(&f.config).unwrap();
    let (s, body) = call(&app, Method::GET, "/images/img1", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, b"\x89PNG fake");
    for uri in ["/images/..%2Fsecret", "/images/..", "/images/%2E%2E%2Fsecret.png", "/images/img9"] {
        let (s, v) = get_json(&app, uri).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        assert!(v["code"] == "unknown_image" || v["code"] == "not_found", "{uri}: {v}");
    }
}
