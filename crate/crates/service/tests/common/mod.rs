#![allow(dead_code)]

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub struct Reply {
    pub status: StatusCode,
    pub etag: Option<String>,
    pub body: Value,
    pub raw: String,
}

pub async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>, if_match: Option<&str>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(v) = if_match {
        req = req.header(header::IF_MATCH, v);
    }
    let req = match body {
        Some(b) => req
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let etag = resp
        .headers()
        .get(header::ETAG)
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let raw = String::from_utf8(bytes.to_vec()).unwrap();
    let body = serde_json::from_str(&raw).unwrap_or(Value::Null);
    Reply { status, etag, body, raw }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Method::GET, uri, None, None).await
}

pub fn tiny_body() -> Value {
    json!({
        "effects": [[1, 2], [1, 3], [1, 1]],
        "costs": [[10, 25], [10, 35], [10, 15]],
        "labels": ["Status quo", "New"],
        "ref": 2,
        "kmax": 50,
        "grid_points": 51
    })
}

/// Four arms with deterministic pseudo-random spread.
pub fn four_arm_body(n: usize) -> Value {
    let noise = |s: usize, t: usize, salt: f64| ((s as f64 * 12.9898 + t as f64 * 78.233 + salt).sin() * 43758.5453).fract();
    let effects: Vec<Vec<f64>> = (0..n)
        .map(|s| (0..4).map(|t| 0.5 + 0.3 * t as f64 + 0.4 * noise(s, t, 1.0)).collect())
        .collect();
    let costs: Vec<Vec<f64>> = (0..n)
        .map(|s| (0..4).map(|t| 50.0 + 80.0 * t as f64 + 60.0 * noise(s, t, 2.0)).collect())
        .collect();
    let params: Vec<Vec<f64>> = (0..n).map(|s| vec![noise(s, 0, 1.0), noise(s, 9, 3.0)]).collect();
    json!({
        "effects": effects,
        "costs": costs,
        "labels": ["No treatment", "Self-help", "Individual counselling", "Group counselling"],
        "ref": 4,
        "kmax": 500,
        "params": {"names": ["p_effect", "p_other"], "rows": params}
    })
}

pub async fn create(app: &Router, body: Value) -> (String, Reply) {
    let r = send(app, Method::POST, "/sessions", Some(body), None).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.raw);
    (r.body["id"].as_str().unwrap().to_string(), r)
}
