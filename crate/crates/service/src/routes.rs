use std::sync::Arc;

use axum::async_trait;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use detscope_core::correction::{class_proportions, write_export, EventPayload};
use detscope_core::dataset::DatasetPaths;
use detscope_core::ingest::Detection;
use detscope_core::metrics::{all_class_stats, all_clutter_scores, clutter_confidence_series, confidence_size_correlation, MetricsError};
use detscope_core::report::metrics_report;
use detscope_core::totem::{build_graph, enumerate_cliques, find_groups, similarity_matrix};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::store::{DatasetEntry, DatasetRecord, SessionEntry, Store};

pub const DEFAULT_PAGE_LIMIT: usize = 200;
pub const DEFAULT_EDGE_THRESHOLD: usize = 1;
pub const DEFAULT_MIN_CLIQUE: usize = 2;
pub const DEFAULT_GROUP_THRESHOLD: f64 = 0.8;
pub const DEFAULT_GROUP_SIZE: usize = 8;

type AppState = Arc<Store>;
type ApiResult<T> = Result<T, ApiError>;

/// `Json` whose rejection is an [`ApiError`].
pub struct ApiJson<T>(pub T);

#[async_trait]
impl<S, T> FromRequest<S> for ApiJson<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| ApiJson(v))
            .map_err(|r| ApiError::new("bad_request", r.body_text()))
    }
}

/// `Query` whose rejection is an [`ApiError`].
pub struct ApiQuery<T>(pub T);

#[async_trait]
impl<S, T> FromRequestParts<S> for ApiQuery<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|q| ApiQuery(q.0))
            .map_err(|r: QueryRejection| ApiError::new("bad_request", r.body_text()))
    }
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/datasets", post(add_dataset).get(list_datasets))
        .route("/datasets/:d", get(get_dataset))
        .route("/datasets/:d/classes", get(list_classes))
        .route("/datasets/:d/classes/:c/detections", get(list_detections))
        .route("/datasets/:d/metrics/class-stats", get(class_stats))
        .route("/datasets/:d/metrics/confidence-size", get(confidence_size))
        .route("/datasets/:d/metrics/clutter", get(clutter))
        .route("/datasets/:d/metrics/report", get(report))
        .route("/datasets/:d/class-proportions", get(proportions))
        .route("/datasets/:d/totem/graph", get(totem_graph))
        .route("/datasets/:d/totem/cliques", get(totem_cliques))
        .route("/datasets/:d/totem/similarity", get(totem_similarity))
        .route("/datasets/:d/totem/groups", get(totem_groups))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/:s", get(get_session))
        .route("/sessions/:s/events", post(append_event).get(list_events))
        .route("/sessions/:s/projection/:c", get(projection))
        .route("/sessions/:s/mapping/:i", get(mapping))
        .route("/sessions/:s/export", get(export))
        .route("/images/:i", get(image))
        .fallback(|| async { ApiError::not_found("no such route") })
        .with_state(store)
}

fn text(content_type: &'static str, body: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, content_type)], body).into_response()
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Format {
    #[default]
    Json,
    Csv,
    Jsonl,
    Tsv,
}

#[derive(Debug, Default, Deserialize)]
struct FormatQuery {
    #[serde(default)]
    format: Format,
}

fn unsupported(format: Format) -> ApiError {
    ApiError::new("bad_request", format!("format {format:?} is not available here").to_lowercase())
}

// ---- datasets ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AddDataset {
    /// Explicit file paths...
    paths: Option<DatasetPaths>,
    /// ...or a directory in the conventional layout.
    dir: Option<std::path::PathBuf>,
    #[serde(default)]
    lenient: bool,
}

#[derive(Serialize)]
struct DatasetView<'a> {
    #[serde(flatten)]
    record: &'a DatasetRecord,
    n_detections: usize,
    n_classes: usize,
    diagnostics: &'a [String],
}

fn dataset_view(e: &DatasetEntry) -> DatasetView<'_> {
    DatasetView {
        record: &e.record,
        n_detections: e.dataset.detections.len(),
        n_classes: e.dataset.vocabulary.len(),
        diagnostics: &e.diagnostics,
    }
}

async fn add_dataset(State(store): State<AppState>, ApiJson(body): ApiJson<AddDataset>) -> ApiResult<Response> {
    let paths = match (body.paths, body.dir) {
        (Some(p), None) => p,
        (None, Some(dir)) => DatasetPaths::from_dir(&dir),
        _ => return Err(ApiError::new("bad_request", "give exactly one of `paths` or `dir`")),
    };
    let (entry, created) = store.add_dataset(paths, body.lenient).await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(dataset_view(&entry))).into_response())
}

async fn list_datasets(State(store): State<AppState>) -> Json<Value> {
    let all = store.datasets().await;
    Json(json!(all.iter().map(|e| dataset_view(e)).collect::<Vec<_>>()))
}

async fn get_dataset(State(store): State<AppState>, Path(d): Path<String>) -> ApiResult<Json<Value>> {
    let e = store.dataset(&d).await?;
    Ok(Json(json!(dataset_view(&e))))
}

#[derive(Serialize)]
struct ClassView<'a> {
    class_label: &'a str,
    n_detections: usize,
}

async fn list_classes(State(store): State<AppState>, Path(d): Path<String>) -> ApiResult<Json<Value>> {
    let e = store.dataset(&d).await?;
    let ds = &e.dataset;
    let classes: Vec<ClassView> = ds
        .vocabulary
        .labels()
        .iter()
        .map(|c| ClassView {
            class_label: c,
            n_detections: ds.detections.of_class(c).count(),
        })
        .collect();
    Ok(Json(json!(classes)))
}

#[derive(Debug, Deserialize)]
struct Page {
    limit: Option<usize>,
    offset: Option<usize>,
}

#[derive(Serialize)]
struct PageView<'a> {
    total: usize,
    limit: usize,
    offset: usize,
    items: Vec<&'a Detection>,
}

async fn list_detections(
    State(store): State<AppState>,
    Path((d, c)): Path<(String, String)>,
    ApiQuery(page): ApiQuery<Page>,
) -> ApiResult<Json<Value>> {
    let e = store.dataset(&d).await?;
    if !e.dataset.vocabulary.contains(&c) {
        return Err(MetricsError::NoSuchClass(c).into());
    }
    let mut all: Vec<&Detection> = e.dataset.detections.of_class(&c).collect();
    all.sort_by(|a, b| a.id.cmp(&b.id));
    let limit = page.limit.unwrap_or(DEFAULT_PAGE_LIMIT);
    let offset = page.offset.unwrap_or(0);
    let view = PageView {
        total: all.len(),
        limit,
        offset,
        items: all.into_iter().skip(offset).take(limit).collect(),
    };
    Ok(Json(json!(view)))
}

// ---- metrics ----

async fn class_stats(State(store): State<AppState>, Path(d): Path<String>) -> ApiResult<Json<Value>> {
    let e = store.dataset(&d).await?;
    Ok(Json(json!(all_class_stats(&e.dataset.detections))))
}

async fn confidence_size(State(store): State<AppState>, Path(d): Path<String>) -> ApiResult<Json<Value>> {
    let e = store.dataset(&d).await?;
    Ok(Json(json!(confidence_size_correlation(&e.dataset.detections)?)))
}

async fn clutter(State(store): State<AppState>, Path(d): Path<String>) -> ApiResult<Json<Value>> {
    let e = store.dataset(&d).await?;
    let set = &e.dataset.detections;
    let scores = all_clutter_scores(set)?;
    let body = match clutter_confidence_series(set) {
        Ok(series) => json!({ "scores": scores, "series": series }),
        Err(MetricsError::InsufficientImages(n)) => json!({
            "scores": scores,
            "series": null,
            "series_unavailable": ApiError::from(MetricsError::InsufficientImages(n)),
        }),
        Err(other) => return Err(other.into()),
    };
    Ok(Json(body))
}

/// The full metrics report in the same bytes the CLI writes.
async fn report(
    State(store): State<AppState>,
    Path(d): Path<String>,
    ApiQuery(q): ApiQuery<FormatQuery>,
) -> ApiResult<Response> {
    let e = store.dataset(&d).await?;
    let rep = metrics_report(&e.dataset.detections)?;
    let mut buf = Vec::new();
    let internal = |e: &dyn std::fmt::Display| ApiError::internal(e.to_string());
    match q.format {
        Format::Csv | Format::Json => {
            rep.write_csv(&mut buf).map_err(|e| internal(&e))?;
            Ok(text("text/csv", buf))
        }
        Format::Jsonl => {
            rep.write_jsonl(&mut buf).map_err(|e| internal(&e))?;
            Ok(text("application/x-ndjson", buf))
        }
        other => Err(unsupported(other)),
    }
}

async fn proportions(State(store): State<AppState>, Path(d): Path<String>) -> ApiResult<Json<Value>> {
    let e = store.dataset(&d).await?;
    Ok(Json(json!(class_proportions(&e.dataset.detections)?)))
}

// ---- totem ----

#[derive(Debug, Deserialize)]
struct GraphQuery {
    threshold: Option<usize>,
    #[serde(default)]
    format: Format,
}

async fn totem_graph(
    State(store): State<AppState>,
    Path(d): Path<String>,
    ApiQuery(q): ApiQuery<GraphQuery>,
) -> ApiResult<Response> {
    let e = store.dataset(&d).await?;
    let graph = build_graph(&e.dataset.profiles(), q.threshold.unwrap_or(DEFAULT_EDGE_THRESHOLD))?;
    match q.format {
        Format::Json => Ok(Json(graph.to_node_link()).into_response()),
        Format::Tsv => {
            let mut buf = Vec::new();
            graph.write_edge_list(&mut buf).map_err(|e| ApiError::internal(e.to_string()))?;
            Ok(text("text/tab-separated-values", buf))
        }
        other => Err(unsupported(other)),
    }
}

#[derive(Debug, Deserialize)]
struct CliqueQuery {
    min_size: Option<usize>,
    threshold: Option<usize>,
}

async fn totem_cliques(
    State(store): State<AppState>,
    Path(d): Path<String>,
    ApiQuery(q): ApiQuery<CliqueQuery>,
) -> ApiResult<Json<Value>> {
    let e = store.dataset(&d).await?;
    let graph = build_graph(&e.dataset.profiles(), q.threshold.unwrap_or(DEFAULT_EDGE_THRESHOLD))?;
    Ok(Json(json!(enumerate_cliques(&graph, q.min_size.unwrap_or(DEFAULT_MIN_CLIQUE))?)))
}

async fn totem_similarity(
    State(store): State<AppState>,
    Path(d): Path<String>,
    ApiQuery(q): ApiQuery<FormatQuery>,
) -> ApiResult<Response> {
    let e = store.dataset(&d).await?;
    let matrix = similarity_matrix(&e.dataset.profiles())?;
    match q.format {
        Format::Json => Ok(Json(json!(matrix)).into_response()),
        Format::Csv => {
            let mut buf = Vec::new();
            matrix.write_csv(&mut buf).map_err(|e| ApiError::internal(e.to_string()))?;
            Ok(text("text/csv", buf))
        }
        other => Err(unsupported(other)),
    }
}

#[derive(Debug, Deserialize)]
struct GroupQuery {
    threshold: Option<f64>,
    size: Option<usize>,
}

async fn totem_groups(
    State(store): State<AppState>,
    Path(d): Path<String>,
    ApiQuery(q): ApiQuery<GroupQuery>,
) -> ApiResult<Json<Value>> {
    let e = store.dataset(&d).await?;
    let matrix = similarity_matrix(&e.dataset.profiles())?;
    let groups = find_groups(
        &matrix,
        q.threshold.unwrap_or(DEFAULT_GROUP_THRESHOLD),
        q.size.unwrap_or(DEFAULT_GROUP_SIZE),
    )?;
    Ok(Json(json!(groups)))
}

// ---- sessions ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    dataset_id: String,
}

async fn session_view(entry: &SessionEntry) -> Value {
    let s = entry.lock().await;
    json!({
        "session_id": s.session_id,
        "dataset_id": s.dataset_id,
        "created_at": s.created_at,
        "event_count": s.events().len(),
        "state": s.state(),
    })
}

async fn create_session(
    State(store): State<AppState>,
    ApiJson(body): ApiJson<CreateSession>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let entry = store.create_session(&body.dataset_id).await?;
    Ok((StatusCode::CREATED, Json(session_view(&entry).await)))
}

async fn list_sessions(State(store): State<AppState>) -> Json<Value> {
    Json(json!(store.session_ids().await))
}

async fn get_session(State(store): State<AppState>, Path(s): Path<String>) -> ApiResult<Json<Value>> {
    let entry = store.session(&s).await?;
    Ok(Json(session_view(&entry).await))
}

#[derive(Debug, Deserialize)]
struct NewEvent {
    #[serde(flatten)]
    payload: EventPayload,
    #[serde(default = "anonymous")]
    actor: String,
}

fn anonymous() -> String {
    "anonymous".to_string()
}

async fn append_event(
    State(store): State<AppState>,
    Path(s): Path<String>,
    ApiJson(body): ApiJson<Value>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let entry = store.session(&s).await?;
    let ev: NewEvent =
        serde_json::from_value(body).map_err(|e| ApiError::new("invalid_payload", format!("invalid event payload: {e}")))?;
    let event = entry.append(ev.payload, ev.actor, Utc::now()).await?;
    Ok((StatusCode::CREATED, Json(json!(event))))
}

async fn list_events(State(store): State<AppState>, Path(s): Path<String>) -> ApiResult<Json<Value>> {
    let entry = store.session(&s).await?;
    let session = entry.lock().await;
    Ok(Json(json!(session.events())))
}

async fn projection(State(store): State<AppState>, Path((s, c)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let entry = store.session(&s).await?;
    let session = entry.lock().await;
    Ok(Json(json!(session.projection_series(&entry.dataset.dataset, &c)?)))
}

async fn mapping(State(store): State<AppState>, Path((s, i)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let entry = store.session(&s).await?;
    let session = entry.lock().await;
    Ok(Json(json!(session.mapping(&entry.dataset.dataset, &i)?)))
}

/// Corrected annotations in ground-truth ingestion format.
async fn export(State(store): State<AppState>, Path(s): Path<String>) -> ApiResult<Response> {
    let entry = store.session(&s).await?;
    let records = entry.lock().await.export(&entry.dataset.dataset);
    let mut buf = Vec::new();
    write_export(&mut buf, &records).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(text("application/x-ndjson", buf))
}

// ---- images ----

const IMAGE_TYPES: &[(&str, &str)] = &[
    ("jpg", "image/jpeg"),
    ("jpeg", "image/jpeg"),
    ("png", "image/png"),
    ("gif", "image/gif"),
    ("webp", "image/webp"),
    ("bmp", "image/bmp"),
];

/// Serves `<image_dir>/<image_id>.<ext>` (or the bare id) as static bytes.
async fn image(State(store): State<AppState>, Path(i): Path<String>) -> ApiResult<Response> {
    let missing = || ApiError::new("unknown_image", format!("no image `{i}`"));
    let safe = !i.is_empty() && !i.starts_with('.') && !i.contains(['/', '\\', '\0']) && !i.contains("..");
    if !safe {
        return Err(missing());
    }
    let mut candidates: Vec<(std::path::PathBuf, &str)> = IMAGE_TYPES
        .iter()
        .map(|(ext, mime)| (store.image_dir.join(format!("{i}.{ext}")), *mime))
        .collect();
    let bare_mime = std::path::Path::new(&i)
        .extension()
        .and_then(|e| e.to_str())
        .and_then(|e| IMAGE_TYPES.iter().find(|(x, _)| x.eq_ignore_ascii_case(e)))
        .map_or("application/octet-stream", |(_, m)| *m);
    candidates.insert(0, (store.image_dir.join(&i), bare_mime));
    for (path, mime) in candidates {
        match tokio::fs::read(&path).await {
            Ok(bytes) => return Ok(text(mime, bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
            Err(e) if e.kind() == std::io::ErrorKind::IsADirectory => continue,
            Err(e) => return Err(ApiError::internal(e.to_string())),
        }
    }
    Err(missing())
}
