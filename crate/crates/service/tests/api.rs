use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use tabqa_core::fixtures;
use tabqa_service::{router, AppState, ServiceConfig};

fn app_with(config: ServiceConfig) -> Router {
    router(AppState::new(config))
}

fn app() -> Router {
    app_with(ServiceConfig::default())
}

async fn call(app: &Router, method: Method, uri: &str, body: Body, json_body: bool) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if json_body {
        req = req.header("content-type", "application/json");
    }
    let res = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into())) };
    (status, v)
}

async fn upload(app: &Router, csv: &str) -> (StatusCode, Value) {
    call(app, Method::POST, "/api/tables?name=cars", Body::from(csv.to_string()), false).await
}

async fn post_json(app: &Router, uri: &str, v: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Body::from(v.to_string()), true).await
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, Body::empty(), false).await
}

async fn cars_id(app: &Router) -> String {
    let (s, v) = upload(app, fixtures::CARS_CSV).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    v["table_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn upload_returns_schema_and_distinct_ids() {
    let app = app();
    let (s, v) = upload(&app, fixtures::CARS_CSV).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["schema"]["columns"].as_array().unwrap().len(), 4);
    assert_eq!(v["schema"]["row_count"], 275);
    let (_, w) = upload(&app, fixtures::CARS_CSV).await;
    assert_ne!(v["table_id"], w["table_id"]);

    let (s, preview) = get(&app, &format!("/api/tables/{}", v["table_id"].as_str().unwrap())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(preview["rows"].as_array().unwrap().len(), 20);
}

#[tokio::test]
async fn upload_errors() {
    let app = app();
    let (s, _) = upload(&app, "").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = upload(&app, "a,b\n1,2\n3\n").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["row"], 2);

    let small = app_with(ServiceConfig { max_upload: 64, ..Default::default() });
    let (s, _) = upload(&small, fixtures::CARS_CSV).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn suggestions_by_column() {
    let app = app();
    let id = cars_id(&app).await;
    let (s, v) = get(&app, &format!("/api/tables/{id}/suggestions?column=sales")).await;
    assert_eq!(s, StatusCode::OK);
    let qs: Vec<String> = serde_json::from_value(v).unwrap();
    assert!(qs.iter().any(|q| q.contains("trend") && q.contains("sales")));
    assert!(qs.iter().any(|q| q.contains("highest") && q.contains("sales")));
    assert_eq!(qs, tabqa_core::pipeline::suggestions(&fixtures::cars(), Some("sales")).unwrap());

    let (_, all) = get(&app, &format!("/api/tables/{id}/suggestions")).await;
    assert!(all.as_array().unwrap().len() <= 12);

    let (s, _) = get(&app, &format!("/api/tables/{id}/suggestions?column=nope")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = get(&app, "/api/tables/deadbeef/suggestions").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn ask_overview_dashboard_validates() {
    let app = app();
    let id = cars_id(&app).await;
    let (s, v) = post_json(&app, &format!("/api/tables/{id}/ask"), json!({"question": "How is the sales?"})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let sections = v["dashboard"]["sections"].as_array().unwrap();
    assert_eq!(sections.len(), 3);
    let types: Vec<&str> = sections.iter().map(|s| s["charts"][0]["chart"]["fact_type"].as_str().unwrap()).collect();
    for t in ["extreme", "trend", "value"] {
        assert!(types.contains(&t), "{types:?}");
    }
    let schema = tabqa_core::schema::schema("ask-response").unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    assert!(validator.is_valid(&v));

    // identical request, identical bytes
    let (_, again) = post_json(&app, &format!("/api/tables/{id}/ask"), json!({"question": "How is the sales?"})).await;
    assert_eq!(v.to_string(), again.to_string());
}

#[tokio::test]
async fn ask_errors() {
    let app = app();
    let id = cars_id(&app).await;
    let (s, _) = post_json(&app, &format!("/api/tables/{id}/ask"), json!({"question": "  "})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = post_json(&app, "/api/tables/nope/ask", json!({"question": "How is the sales?"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, v) = post_json(&app, &format!("/api/tables/{id}/ask"), json!({"question": "How is the sales?", "backend": "neural"})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    let (s, _) = post_json(&app, &format!("/api/tables/{id}/ask"), json!({"question": "How is the sales?", "beam_width": 0})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let (_, t) = upload(&app, "team,city\na,x\nb,y\n").await;
    let tid = t["table_id"].as_str().unwrap();
    let (s, v) = post_json(&app, &format!("/api/tables/{tid}/ask"), json!({"question": "What is the trend?"})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["reasons"].as_array().unwrap().iter().any(|r| r.as_str().unwrap().contains("no temporal column")), "{v}");
}

#[tokio::test]
async fn ask_past_deadline_is_504() {
    let app = app_with(ServiceConfig { deadline: Duration::from_nanos(1), ..Default::default() });
    let id = cars_id(&app).await;
    let (s, v) = post_json(&app, &format!("/api/tables/{id}/ask"), json!({"question": "does any brand sell a lot and have an increasing trend?"})).await;
    assert_eq!(s, StatusCode::GATEWAY_TIMEOUT);
    assert_eq!(v["error"], "deadline exceeded");
}

#[tokio::test]
async fn decompose_endpoint() {
    let app = app();
    let (_, v) = call(&app, Method::POST, "/api/tables?name=books", Body::from(fixtures::BOOKS_CSV), false).await;
    let id = v["table_id"].as_str().unwrap();
    let (s, tree) = post_json(
        &app,
        "/api/decompose",
        json!({"table_id": id, "question": "What is the distribution of reviews in the year with the highest reviews?"}),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{tree}");
    assert_eq!(tree["children"].as_array().unwrap().len(), 2);
    let (_, simple) = post_json(&app, "/api/decompose", json!({"table_id": id, "question": "Which year has the highest reviews?"})).await;
    assert_eq!(simple["children"].as_array().unwrap().len(), 0);
    let (s, _) = post_json(&app, "/api/decompose", json!({"table_id": "zz", "question": "x"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn health_and_schema() {
    let app = app();
    let (s, v) = get(&app, "/api/health").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert!(v["version"].is_string());
    let (_, idx) = get(&app, "/api/schema").await;
    assert_eq!(idx["version"], tabqa_core::SCHEMA_VERSION);
    assert!(idx["schemas"]["dashboard"].is_object());
    let (s, _) = get(&app, "/api/schema/chart-spec").await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = get(&app, "/api/schema/nope").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn cors_preflight_allowed() {
    let app = app();
    let req = Request::builder()
        .method(Method::OPTIONS)
        .uri("/api/health")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "GET")
        .body(Body::empty())
        .unwrap();
    let res = app.oneshot(req).await.unwrap();
    assert!(res.headers().contains_key("access-control-allow-origin"));
}

#[tokio::test]
async fn concurrent_asks_on_separate_sessions() {
    let app = app();
    let a = cars_id(&app).await;
    let (_, b) = call(&app, Method::POST, "/api/tables?name=books", Body::from(fixtures::BOOKS_CSV), false).await;
    let b = b["table_id"].as_str().unwrap().to_string();
    let (ua, ub) = (format!("/api/tables/{a}/ask"), format!("/api/tables/{b}/ask"));
    let qa = post_json(&app, &ua, json!({"question": "How is the sales?"}));
    let qb = post_json(&app, &ub, json!({"question": "Which year has the highest reviews?"}));
    let ((sa, va), (sb, vb)) = tokio::join!(qa, qb);
    assert_eq!((sa, sb), (StatusCode::OK, StatusCode::OK));
    assert_eq!(va["dashboard"]["title"], "How is the sales?");
    assert_eq!(vb["dashboard"]["title"], "Which year has the highest reviews?");
}
