mod common;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use proptest::prelude::*;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{create, four_arm_body, get, send, tiny_body};
use psa_service::{router, AppState};

#[tokio::test]
async fn create_and_summarise_tiny() {
    let app = router(AppState::default());
    let (id, r) = create(&app, tiny_body()).await;
    assert_eq!(r.body["revision"], 1);
    assert_eq!(r.etag.as_deref(), Some("\"1\""));
    assert_eq!(r.body["ref"], 2);
    assert_eq!(r.body["comparisons"], json!([1]));
    assert_eq!(r.body["icer"], json!([15.0]));
    assert_eq!(r.body["kstar"], json!([15.0]));
    assert!(r.body["advisories"][0].as_str().unwrap().contains("3 simulations"));

    let s = get(&app, &format!("/sessions/{id}/summary?k=20")).await;
    assert_eq!(s.status, StatusCode::OK);
    assert_eq!(s.body["k"], 20.0);
    assert_eq!(s.body["comparisons"][0]["eib"], 5.0);
    assert!((s.body["comparisons"][0]["ceac"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(s.body["comparisons"][0]["icer"], 15.0);
    assert!(s.body["text"].as_str().unwrap().starts_with("Cost-effectiveness analysis summary"));

    let bad = get(&app, &format!("/sessions/{id}/summary?k=99")).await;
    assert_eq!(bad.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(bad.body["fields"][0]["field"], "k");
}

#[tokio::test]
async fn csv_upload() {
    let app = router(AppState::default());
    let body = json!({
        "effects_csv": "Status quo,New\n1,2\n1,3\n1,1\n",
        "costs_csv": "Status quo,New\n10,25\n10,35\n10,15\n",
        "ref": 2
    });
    let (_, r) = create(&app, body).await;
    assert_eq!(r.body["labels"], json!(["Status quo", "New"]));
    let bad = send(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"effects_csv": "1,2\n3,x\n", "costs_csv": "1,2\n3,4\n"})),
        None,
    )
    .await;
    assert_eq!(bad.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(bad.body["error"].as_str().unwrap().contains("row 2, column 2"));
}

#[tokio::test]
async fn patch_comparisons_changes_ceplane() {
    let app = router(AppState::default());
    let (id, _) = create(&app, four_arm_body(200)).await;
    let plot = get(&app, &format!("/sessions/{id}/plots/ceplane?k=250")).await;
    assert_eq!(plot.body["spec"]["series"].as_array().unwrap().len(), 3);

    let r = send(&app, Method::PATCH, &format!("/sessions/{id}"), Some(json!({"comparisons": [1, 3]})), None).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.raw);
    assert_eq!(r.body["revision"], 2);
    assert_eq!(r.body["comparisons"], json!([1, 3]));
    let plot = get(&app, &format!("/sessions/{id}/plots/ceplane?k=250")).await;
    let series = plot.body["spec"]["series"].as_array().unwrap();
    assert_eq!(series.len(), 2);
    assert_eq!(plot.body["revision"], 2);
    // two clouds: no ICER marker
    let annotations = plot.body["spec"]["annotations"].as_array().unwrap();
    assert!(annotations.iter().all(|a| a["type"] != "icer-marker"));

    let single = get(&app, &format!("/sessions/{id}/plots/ceplane?k=250&comparison=3")).await;
    assert_eq!(single.body["spec"]["series"].as_array().unwrap().len(), 1);
    let excluded = get(&app, &format!("/sessions/{id}/plots/ceplane?k=250&comparison=2")).await;
    assert_eq!(excluded.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(excluded.body["fields"][0]["field"], "comparison");
}

#[tokio::test]
async fn invalid_patch_is_422_and_leaves_state() {
    let app = router(AppState::default());
    let (id, created) = create(&app, four_arm_body(50)).await;
    let uri = format!("/sessions/{id}");
    for (body, field) in [
        (json!({"ref": 1, "comparisons": [1, 3]}), "ref"),
        (json!({"comparisons": [4]}), "comparisons"),
        (json!({"comparisons": [9]}), "comparisons"),
        (json!({"ref": 0}), "ref"),
        (json!({"kmax": -5}), "kmax"),
        (json!({"kmax": "high"}), "kmax"),
        (json!({"colour": "red"}), "colour"),
    ] {
        let r = send(&app, Method::PATCH, &uri, Some(body.clone()), None).await;
        assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY, "{body}: {}", r.raw);
        assert_eq!(r.body["fields"][0]["field"], field, "{body}: {}", r.raw);
    }
    let after = get(&app, &uri).await;
    assert_eq!(after.body["revision"], 1);
    assert_eq!(after.body["payload_hash"], created.body["payload_hash"]);

    let malformed = Request::builder()
        .method(Method::PATCH)
        .uri(&uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from("{\"ref\": "))
        .unwrap();
    assert_eq!(app.clone().oneshot(malformed).await.unwrap().status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn stale_if_match_is_409() {
    let app = router(AppState::default());
    let (id, _) = create(&app, four_arm_body(50)).await;
    let uri = format!("/sessions/{id}");
    let ok = send(&app, Method::PATCH, &uri, Some(json!({"kmax": 400})), Some("\"1\"")).await;
    assert_eq!(ok.status, StatusCode::OK);
    let stale = send(&app, Method::PATCH, &uri, Some(json!({"kmax": 300})), Some("\"1\"")).await;
    assert_eq!(stale.status, StatusCode::CONFLICT);
    let current = get(&app, &uri).await;
    assert_eq!(current.body["kmax"], 400.0);
    assert_eq!(current.body["revision"], 2);
    let any = send(&app, Method::PATCH, &uri, Some(json!({"kmax": 300})), Some("*")).await;
    assert_eq!(any.status, StatusCode::OK);
}

#[tokio::test]
async fn repeated_patch_gives_same_payload() {
    let app = router(AppState::default());
    let (id, _) = create(&app, four_arm_body(80)).await;
    let uri = format!("/sessions/{id}");
    let body = json!({"ref": 2, "comparisons": [1, 4], "kmax": 300});
    let first = send(&app, Method::PATCH, &uri, Some(body.clone()), None).await;
    let second = send(&app, Method::PATCH, &uri, Some(body), None).await;
    assert_eq!(first.status, StatusCode::OK);
    assert_eq!(second.status, StatusCode::OK);
    assert_eq!(first.body["payload_hash"], second.body["payload_hash"]);
    assert!(second.body["revision"].as_u64() > first.body["revision"].as_u64());
}

#[tokio::test]
async fn shares_add_mixed_overlay() {
    let app = router(AppState::default());
    let (id, _) = create(&app, four_arm_body(200)).await;
    let r = send(
        &app,
        Method::POST,
        &format!("/sessions/{id}/extensions"),
        Some(json!({"shares": [0.4, 0.3, 0.2, 0.1]})),
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.raw);
    assert_eq!(r.body["extensions"]["shares"], json!([0.4, 0.3, 0.2, 0.1]));
    let plot = get(&app, &format!("/sessions/{id}/plots/evi")).await;
    let series = plot.body["spec"]["series"].as_array().unwrap();
    assert_eq!(series.len(), 2);
    assert_eq!(series[1]["label"], "Mixed strategy");
    for (m, b) in series[1]["data"].as_array().unwrap().iter().zip(series[0]["data"].as_array().unwrap()) {
        assert!(m[1].as_f64().unwrap() >= b[1].as_f64().unwrap() - 1e-9);
    }

    let bad = send(
        &app,
        Method::POST,
        &format!("/sessions/{id}/extensions"),
        Some(json!({"shares": [0.5, 0.5]})),
        None,
    )
    .await;
    assert_eq!(bad.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(bad.body["fields"][0]["field"], "shares");

    let missing = get(&app, &format!("/sessions/{id}/plots/evi-riskav")).await;
    assert_eq!(missing.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = send(
        &app,
        Method::POST,
        &format!("/sessions/{id}/extensions"),
        Some(json!({"riskav": [0, 0.005], "multice": true})),
        None,
    )
    .await;
    assert_eq!(r.body["extensions"]["multice"], json!([1, 2, 3, 4]));
    assert_eq!(get(&app, &format!("/sessions/{id}/plots/evi-riskav")).await.status, StatusCode::OK);

    // extensions follow later mutations
    let r = send(&app, Method::PATCH, &format!("/sessions/{id}"), Some(json!({"comparisons": [1]})), None).await;
    assert_eq!(r.body["extensions"]["multice"], json!([1, 4]));
}

#[tokio::test]
async fn unknown_things_are_404() {
    let app = router(AppState::default());
    assert_eq!(get(&app, "/sessions/nope").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/sessions/nope/summary").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/jobs/nope").await.status, StatusCode::NOT_FOUND);
    let (id, _) = create(&app, tiny_body()).await;
    assert_eq!(get(&app, &format!("/sessions/{id}/plots/pie")).await.status, StatusCode::NOT_FOUND);
    let del = send(&app, Method::DELETE, &format!("/sessions/{id}"), None, None).await;
    assert_eq!(del.status, StatusCode::NO_CONTENT);
    assert_eq!(get(&app, &format!("/sessions/{id}")).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn evppi_job_runs_to_completion() {
    let app = router(AppState::default());
    let (id, _) = create(&app, four_arm_body(300)).await;
    let r = send(
        &app,
        Method::POST,
        &format!("/sessions/{id}/evppi"),
        Some(json!({"params": ["p_effect"], "method": "regression"})),
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::ACCEPTED, "{}", r.raw);
    let job = r.body["job_id"].as_str().unwrap().to_string();
    let mut status = Value::Null;
    for _ in 0..200 {
        status = get(&app, &format!("/jobs/{job}")).await.body;
        if status["status"] != "running" {
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(25)).await;
    }
    assert_eq!(status["status"], "done", "{status}");
    let evppi = status["result"]["evppi"].as_array().unwrap();
    let evpi = status["result"]["evpi"].as_array().unwrap();
    assert_eq!(evppi.len(), status["result"]["k"].as_array().unwrap().len());
    for (p, e) in evppi.iter().zip(evpi) {
        assert!(p.as_f64().unwrap() <= e.as_f64().unwrap() + 1e-12);
    }

    let unknown = send(&app, Method::POST, &format!("/sessions/{id}/evppi"), Some(json!({"params": ["zzz"]})), None).await;
    assert_eq!(unknown.status, StatusCode::UNPROCESSABLE_ENTITY);
    let (tiny, _) = create(&app, tiny_body()).await;
    let none = send(&app, Method::POST, &format!("/sessions/{tiny}/evppi"), Some(json!({"params": ["a"]})), None).await;
    assert_eq!(none.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn archive_round_trip_and_svg() {
    let app = router(AppState::default());
    let (id, _) = create(&app, four_arm_body(100)).await;
    send(&app, Method::POST, &format!("/sessions/{id}/extensions"), Some(json!({"riskav": [0.001]})), None).await;
    let state = get(&app, &format!("/sessions/{id}")).await;
    let archive = get(&app, &format!("/sessions/{id}/archive")).await;
    assert_eq!(archive.status, StatusCode::OK);
    let (copy, restored) = create(&app, json!({"archive": archive.body})).await;
    assert_ne!(copy, id);
    assert_eq!(restored.body["payload_hash"], state.body["payload_hash"]);
    assert_eq!(restored.body["advisories"], json!([]));

    let a = get(&app, &format!("/sessions/{id}/plots/grid?format=svg")).await;
    let b = get(&app, &format!("/sessions/{copy}/plots/grid?format=svg")).await;
    assert!(a.raw.starts_with("<svg"));
    assert_eq!(a.raw, b.raw);
}

#[tokio::test]
async fn cors_preflight() {
    let app = router(AppState::default());
    let req = Request::builder()
        .method(Method::OPTIONS)
        .uri("/sessions")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "PATCH")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");
}

#[derive(Debug, Clone)]
enum Op {
    Kmax(u8),
    Comparisons(u8),
    Reference(u8),
    Shares,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (1u8..5).prop_map(Op::Kmax),
        (1u8..8).prop_map(Op::Comparisons),
        (1u8..5).prop_map(Op::Reference),
        Just(Op::Shares),
    ]
}

fn op_request(op: &Op) -> (Method, &'static str, Value) {
    match op {
        Op::Kmax(m) => (Method::PATCH, "", json!({"kmax": 100.0 * *m as f64})),
        Op::Reference(r) => (Method::PATCH, "", json!({"ref": r})),
        Op::Comparisons(mask) => {
            // subsets of {1, 2, 3} (reference starts at 4)
            let list: Vec<u8> = (0..3).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).collect();
            (Method::PATCH, "", json!({"comparisons": list}))
        }
        Op::Shares => (Method::POST, "/extensions", json!({"shares": [0.25, 0.25, 0.25, 0.25]})),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sessions_are_isolated(ops in proptest::collection::vec((any::<bool>(), op()), 1..10)) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async {
            let app = router(AppState::default());
            let (a, _) = create(&app, four_arm_body(40)).await;
            let (b, _) = create(&app, four_arm_body(40)).await;
            let solo = router(AppState::default());
            let (a_solo, _) = create(&solo, four_arm_body(40)).await;
            for (on_a, op) in &ops {
                let (method, suffix, body) = op_request(op);
                let target = if *on_a { &a } else { &b };
                let shared = send(&app, method.clone(), &format!("/sessions/{target}{suffix}"), Some(body.clone()), None).await;
                if *on_a {
                    let alone = send(&solo, method, &format!("/sessions/{a_solo}{suffix}"), Some(body), None).await;
                    assert_eq!(shared.status, alone.status);
                    assert_eq!(shared.body["payload_hash"], alone.body["payload_hash"]);
                }
            }
            let final_a = get(&app, &format!("/sessions/{a}")).await;
            let final_solo = get(&solo, &format!("/sessions/{a_solo}")).await;
            assert_eq!(final_a.body["payload_hash"], final_solo.body["payload_hash"]);
            assert_eq!(final_a.body["revision"], final_solo.body["revision"]);
        });
    }
}
