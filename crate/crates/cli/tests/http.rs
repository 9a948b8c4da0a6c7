use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use http_body_util::BodyExt;
use newswatch_cli::server::{router, AppState, Shared};
use newswatch_core::channels::ProfileStore;
use newswatch_core::export::{validate_geojson, validate_kml};
use newswatch_core::linguistic::LinguisticResources;
use newswatch_core::pipeline::run_pipeline;
use newswatch_core::synthetic::{burst_corpus, long_body_articles, BurstSpec};
use newswatch_core::{AlertConfig, PipelineConfig, Store};
use serde_json::Value;
use tower::ServiceExt;

fn build_store() -> Store {
    let res = LinguisticResources::bundled();
    let cfg = PipelineConfig::default();
    let mut store = Store::in_memory();
    let (long, sources) = long_body_articles(1, 20, 120);
    run_pipeline(long, &sources, &cfg, &res, &mut store).unwrap();
    let corpus = burst_corpus(&BurstSpec::default());
    run_pipeline(corpus.articles, &corpus.sources, &cfg, &res, &mut store).unwrap();
    store
}

fn app(store: Store, profiles: Option<ProfileStore>) -> Shared {
    Arc::new(AppState { store, resources: LinguisticResources::bundled(), alerts: AlertConfig::default(), clock: None, profiles })
}

fn state() -> Shared {
    static STATE: OnceLock<Shared> = OnceLock::new();
    STATE.get_or_init(|| app(build_store(), None)).clone()
}

fn store() -> &'static Store {
    static STORE: OnceLock<Shared> = OnceLock::new();
    &STORE.get_or_init(state).store
}

async fn send(state: Shared, req: Request<Body>) -> (StatusCode, Option<String>, Vec<u8>) {
    let resp = router(state).oneshot(req).await.unwrap();
    let status = resp.status();
    let ctype = resp.headers().get(header::CONTENT_TYPE).map(|v| v.to_str().unwrap().to_string());
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, ctype, body)
}

async fn get(path: &str) -> (StatusCode, Option<String>, Vec<u8>) {
    send(state(), Request::get(path).body(Body::empty()).unwrap()).await
}

async fn get_json(path: &str) -> Value {
    let (status, ctype, body) = get(path).await;
    assert_eq!(status, StatusCode::OK, "{path}: {}", String::from_utf8_lossy(&body));
    assert_eq!(ctype.as_deref(), Some("application/json"), "{path}");
    serde_json::from_slice(&body).unwrap()
}

#[tokio::test]
async fn healthz() {
    let (status, _, body) = get("/healthz").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"ok");
}

#[tokio::test]
async fn alerts_board_and_drill_down() {
    let doc = get_json("/v1/alerts").await;
    assert_eq!(doc["clock"], "2024-06-16T00:00:00Z");
    let top = &doc["page"]["items"][0];
    assert_eq!((top["country"].as_str(), top["category_id"].as_str()), (Some("PL"), Some("flood")));
    let href = top["articles"].as_str().unwrap();
    let cell = get_json(href).await;
    assert_eq!(cell["total"], 10);
    let limited = get_json("/v1/alerts?limit=3&offset=1").await;
    assert_eq!(limited["page"]["items"].as_array().unwrap().len(), 3);
    assert_eq!(limited["page"]["items"][0], doc["page"]["items"][1]);
}

#[tokio::test]
async fn alerts_csv() {
    let (status, ctype, body) = get("/v1/alerts?format=csv").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some("text/csv; charset=utf-8"));
    let text = String::from_utf8(body).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("PL,flood,"), "{text}");
    let (status, _, _) = get("/v1/alerts?format=xml").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn alerts_without_history_is_unprocessable() {
    let (status, _, _) = get("/v1/alerts?clock=2024-03-02T00:00:00Z").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn top_stories_and_clusters() {
    let doc = get_json("/v1/top-stories?lang=en&n=5").await;
    let items = doc["page"]["items"].as_array().unwrap();
    assert_eq!(items.len(), 5);
    let id = items[0]["id"].as_u64().unwrap();
    let cluster = get_json(&format!("/v1/clusters/{id}")).await;
    assert_eq!(cluster["cluster"]["id"], id);
    let href = items[0]["articles"].as_str().unwrap();
    let members = get_json(href).await;
    assert_eq!(members["total"], items[0]["size"]);
    let (status, _, _) = get("/v1/clusters/999999999").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = get("/v1/top-stories").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn stories() {
    let s = store();
    let id = s.stories().next().unwrap().id;
    let doc = get_json(&format!("/v1/stories/{id}")).await;
    assert_eq!(doc["id"], id);
    let (status, _, _) = get("/v1/stories/999999999").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn series_and_distribution() {
    let doc = get_json("/v1/series?country=PL&category=flood&from=2024-06-01&to=2024-06-15").await;
    let points = doc["points"].as_array().unwrap();
    assert_eq!(points.len(), 15);
    assert_eq!(points.last().unwrap()["value"], 10.0);
    let dist = get_json("/v1/reports/distribution?dimension=country").await;
    let share: f64 = dist["rows"].as_array().unwrap().iter().map(|r| r["share"].as_f64().unwrap()).sum();
    assert!((share - 1.0).abs() < 1e-9);
    let (status, ctype, _) = get("/v1/reports/distribution?dimension=language&format=csv").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some("text/csv; charset=utf-8"));
}

#[tokio::test]
async fn entities_and_graphs() {
    let doc = get_json("/v1/entities/1?n=5").await;
    assert_eq!(doc["entity"]["canonical_name"], "Angela Merkel");
    assert!(doc["mentions"].as_u64().unwrap() > 0);
    assert!(!doc["quotes"].as_array().unwrap().is_empty());
    let (status, _, _) = get("/v1/entities/424242").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let g = get_json("/v1/graph/ego?seeds=1&n=3").await;
    assert!(g["graph"]["nodes"].as_array().unwrap().iter().any(|n| n["id"] == 1));
    let (status, _, _) = get("/v1/graph/ego?seeds=1,x").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let q = get_json("/v1/graph/quotes").await;
    assert!(q["graph"]["links"].is_array());
}

#[tokio::test]
async fn search_is_paged() {
    let doc = get_json("/v1/search?q=flood+Warsaw&limit=4").await;
    assert!(doc["total"].as_u64().unwrap() >= 10);
    assert_eq!(doc["items"].as_array().unwrap().len(), 4);
    let (status, _, _) = get("/v1/search?from=yesterday").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn channels_evaluate() {
    let expr = r#"{"kind":"intersection","of":[{"kind":"country_source","country":"PL"},{"kind":"category","id":"flood"}]}"#;
    let req = Request::post("/v1/channels/evaluate").body(Body::from(expr)).unwrap();
    let (status, _, body) = send(state(), req).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let doc: Value = serde_json::from_slice(&body).unwrap();
    assert!(doc["page"]["total"].as_u64().unwrap() >= 10);
    let req = Request::post("/v1/channels/evaluate").body(Body::from("{\"op\":\"nope\"}")).unwrap();
    let (status, _, _) = send(state(), req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn profiles_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let st = app(Store::in_memory(), Some(ProfileStore::new(dir.path())));
    let sets = r#"[{"name":"floods","channels":[{"name":"pl","expr":{"kind":"country_source","country":"PL"}}]}]"#;
    let (status, _, body) = send(st.clone(), Request::put("/v1/profiles/alice/channels").body(Body::from(sets)).unwrap()).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let (status, _, body) = send(st.clone(), Request::get("/v1/profiles/alice/channels").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let got: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(got, serde_json::from_str::<Value>(sets).unwrap());
    let (status, _, _) = send(st, Request::get("/v1/profiles/bob/channels").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = get("/v1/profiles/alice/channels").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn map_exports() {
    let (status, ctype, body) = get("/v1/export/map.kml").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some("application/vnd.google-earth.kml+xml"));
    validate_kml(std::str::from_utf8(&body).unwrap()).unwrap();
    let (status, ctype, body) = get("/v1/export/map.geojson?lang=en").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some("application/geo+json"));
    validate_geojson(std::str::from_utf8(&body).unwrap()).unwrap();
}

#[tokio::test]
async fn unknown_route_is_404() {
    let (status, _, _) = get("/v1/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
