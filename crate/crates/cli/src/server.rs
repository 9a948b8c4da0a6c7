//! Read-only HTTP service under `/v1`.

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::Deserialize;

use newswatch_core::alerting::{board_csv, AlertError};
use newswatch_core::api::{Paging, SearchParams, SeriesParams, Snapshot, DEFAULT_GRAPH_N, DEFAULT_TOP_N};
use newswatch_core::channels::{ChannelError, ChannelExpr, ChannelSet, ProfileStore};
use newswatch_core::export::MapFilter;
use newswatch_core::graphs::{distribution_csv, Dimension, GraphError};
use newswatch_core::linguistic::LinguisticResources;
use newswatch_core::{AlertConfig, CountryCode, EntityId, Error, Store};

/// Shared, immutable service state.
pub struct AppState {
    pub store: Store,
    pub resources: LinguisticResources,
    pub alerts: AlertConfig,
    /// Fixed clock; the store's default clock when unset.
    pub clock: Option<DateTime<Utc>>,
    pub profiles: Option<ProfileStore>,
}

impl AppState {
    fn snapshot(&self, clock: Option<DateTime<Utc>>) -> Snapshot<'_> {
        let s = Snapshot::new(&self.store, &self.resources, &self.alerts);
        match clock.or(self.clock) {
            Some(c) => s.at(c),
            None => s,
        }
    }
}

pub type Shared = Arc<AppState>;

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NotFound(_) | Error::UnknownEntity(_) | Error::Graph(GraphError::UnknownEntity(_)) => StatusCode::NOT_FOUND,
            Error::Alert(AlertError::IncompleteHistory { .. }) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Channel(ChannelError::UnknownProfile(_)) => StatusCode::NOT_FOUND,
            Error::Channel(_) | Error::Graph(_) | Error::Alert(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl From<ChannelError> for ApiError {
    fn from(e: ChannelError) -> Self {
        Error::from(e).into()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Default, Deserialize)]
struct ClockQuery {
    clock: Option<DateTime<Utc>>,
}

#[derive(Debug, Default, Deserialize)]
struct FormatQuery {
    format: Option<String>,
}

impl FormatQuery {
    fn csv(&self) -> ApiResult<bool> {
        match self.format.as_deref() {
            None | Some("json") => Ok(false),
            Some("csv") => Ok(true),
            Some(other) => Err(bad_request(format!("unsupported format {other:?}"))),
        }
    }
}

fn csv_response(body: String) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response()
}

/// Parses a comma-separated id list such as `1,2,3`.
pub fn parse_seeds(s: Option<&str>) -> Result<BTreeSet<EntityId>, String> {
    s.unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<EntityId>().map_err(|_| format!("invalid entity id {t:?}")))
        .collect()
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/top-stories", get(top_stories))
        .route("/v1/clusters/{id}", get(cluster))
        .route("/v1/clusters/{id}/articles", get(cluster_articles))
        .route("/v1/stories/{id}", get(story))
        .route("/v1/alerts", get(alerts))
        .route("/v1/alerts/cell", get(alert_cell))
        .route("/v1/series", get(series))
        .route("/v1/entities/{id}", get(entity))
        .route("/v1/graph/ego", get(ego_graph))
        .route("/v1/graph/quotes", get(quote_graph))
        .route("/v1/channels/evaluate", post(channel_evaluate))
        .route("/v1/profiles/{profile}/channels", get(get_profile).put(put_profile))
        .route("/v1/search", get(search))
        .route("/v1/reports/distribution", get(distribution))
        .route("/v1/export/map.kml", get(map_kml))
        .route("/v1/export/map.geojson", get(map_geojson))
        .with_state(state)
}

async fn healthz() -> &'static str {
    "ok"
}

#[derive(Debug, Deserialize)]
struct TopQuery {
    lang: String,
    n: Option<usize>,
}

async fn top_stories(State(s): State<Shared>, Query(q): Query<TopQuery>, Query(c): Query<ClockQuery>, Query(p): Query<Paging>) -> Response {
    Json(s.snapshot(c.clock).top_stories(&q.lang, q.n.unwrap_or(DEFAULT_TOP_N), p)).into_response()
}

async fn cluster(State(s): State<Shared>, Path(id): Path<u64>) -> ApiResult<Response> {
    Ok(Json(s.snapshot(None).cluster(id)?).into_response())
}

async fn cluster_articles(State(s): State<Shared>, Path(id): Path<u64>, Query(p): Query<Paging>) -> ApiResult<Response> {
    Ok(Json(s.snapshot(None).cluster_articles(id, p)?).into_response())
}

async fn story(State(s): State<Shared>, Path(id): Path<u64>) -> ApiResult<Response> {
    Ok(Json(s.snapshot(None).story(id)?).into_response())
}

async fn alerts(
    State(s): State<Shared>,
    Query(c): Query<ClockQuery>,
    Query(p): Query<Paging>,
    Query(f): Query<FormatQuery>,
) -> ApiResult<Response> {
    let doc = s.snapshot(c.clock).alerts(p)?;
    if f.csv()? {
        let cells: Vec<_> = doc.page.items.into_iter().map(|r| r.cell).collect();
        return Ok(csv_response(board_csv(&cells)));
    }
    Ok(Json(doc).into_response())
}

#[derive(Debug, Deserialize)]
struct CellQuery {
    country: CountryCode,
    category: String,
}

async fn alert_cell(
    State(s): State<Shared>,
    Query(q): Query<CellQuery>,
    Query(c): Query<ClockQuery>,
    Query(p): Query<Paging>,
) -> Response {
    Json(s.snapshot(c.clock).alert_cell_articles(q.country, &q.category, p)).into_response()
}

async fn series(State(s): State<Shared>, Query(q): Query<SeriesParams>, Query(c): Query<ClockQuery>) -> Response {
    Json(s.snapshot(c.clock).series(&q)).into_response()
}

#[derive(Debug, Deserialize)]
struct NQuery {
    n: Option<usize>,
}

async fn entity(State(s): State<Shared>, Path(id): Path<u64>, Query(q): Query<NQuery>) -> ApiResult<Response> {
    Ok(Json(s.snapshot(None).entity(id, q.n.unwrap_or(DEFAULT_GRAPH_N))?).into_response())
}

#[derive(Debug, Deserialize)]
struct SeedsQuery {
    seeds: Option<String>,
    n: Option<usize>,
}

async fn ego_graph(State(s): State<Shared>, Query(q): Query<SeedsQuery>) -> ApiResult<Response> {
    let seeds = parse_seeds(q.seeds.as_deref()).map_err(bad_request)?;
    Ok(Json(s.snapshot(None).ego_graph(&seeds, q.n.unwrap_or(DEFAULT_GRAPH_N))?).into_response())
}

async fn quote_graph(State(s): State<Shared>, Query(q): Query<SeedsQuery>) -> ApiResult<Response> {
    let seeds = parse_seeds(q.seeds.as_deref()).map_err(bad_request)?;
    Ok(Json(s.snapshot(None).quote_graph(&seeds)).into_response())
}

async fn channel_evaluate(
    State(s): State<Shared>,
    Query(c): Query<ClockQuery>,
    Query(p): Query<Paging>,
    body: String,
) -> ApiResult<Response> {
    let expr = ChannelExpr::from_json(&body)?;
    Ok(Json(s.snapshot(c.clock).channel(&expr, p)?).into_response())
}

fn profiles(s: &AppState) -> ApiResult<&ProfileStore> {
    s.profiles.as_ref().ok_or_else(|| ApiError(StatusCode::NOT_FOUND, "profiles are not enabled".into()))
}

async fn get_profile(State(s): State<Shared>, Path(profile): Path<String>) -> ApiResult<Response> {
    Ok(Json(profiles(&s)?.load(&profile)?).into_response())
}

async fn put_profile(State(s): State<Shared>, Path(profile): Path<String>, body: String) -> ApiResult<Response> {
    let sets: Vec<ChannelSet> = serde_json::from_str(&body).map_err(|e| bad_request(e.to_string()))?;
    profiles(&s)?.save(&profile, &sets)?;
    Ok(Json(sets).into_response())
}

async fn search(State(s): State<Shared>, Query(q): Query<SearchParams>, Query(p): Query<Paging>) -> Response {
    Json(s.snapshot(None).search(&q, p)).into_response()
}

#[derive(Debug, Deserialize)]
struct DimensionQuery {
    dimension: Dimension,
}

async fn distribution(
    State(s): State<Shared>,
    Query(d): Query<DimensionQuery>,
    Query(q): Query<SearchParams>,
    Query(f): Query<FormatQuery>,
) -> ApiResult<Response> {
    let doc = s.snapshot(None).distribution(&q, d.dimension);
    if f.csv()? {
        return Ok(csv_response(distribution_csv(&doc.rows).map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?));
    }
    Ok(Json(doc).into_response())
}

#[derive(Debug, Deserialize)]
struct MapQuery {
    lang: Option<String>,
    #[serde(default)]
    live_only: bool,
}

impl MapQuery {
    fn filter(self) -> MapFilter {
        MapFilter { language: self.lang, live_only: self.live_only }
    }
}

async fn map_kml(State(s): State<Shared>, Query(q): Query<MapQuery>) -> Response {
    let body = s.snapshot(None).map_kml(&q.filter());
    ([(header::CONTENT_TYPE, "application/vnd.google-earth.kml+xml")], body).into_response()
}

async fn map_geojson(State(s): State<Shared>, Query(q): Query<MapQuery>) -> Response {
    let body = s.snapshot(None).map_geojson(&q.filter()).to_string();
    ([(header::CONTENT_TYPE, "application/geo+json")], body).into_response()
}

pub async fn serve(addr: &str, state: Shared) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {addr}: {e}"))?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(state)).await?;
    Ok(())
}
