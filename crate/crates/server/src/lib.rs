//! HTTP API over a [`Store`]: browse, post and reply to performances, and
//! fetch their mixed audio, layered traces and a corpus report.

mod error;

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tinyjam_core::analytics::{build_report, ReportOptions};
use tinyjam_core::perf::{parse_events_csv, Instrument, Metadata, TinyPerformance, TouchEvent};
use tinyjam_core::synth::{encode_wav, render_layers, DEFAULT_SAMPLE_RATE, ENGINE_VERSION};
use tinyjam_core::trace::{render_layered, DEFAULT_TRACE_SIZE};
use tinyjam_store::{ArtifactKind, Page, Store, StoreError, DEFAULT_PAGE_SIZE};
use tower_http::cors::CorsLayer;

pub use error::ApiError;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("server i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Metadata supplied by a client. Ids are always assigned by the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewMetadata {
    #[serde(default)]
    pub performer: String,
    pub instrument: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
}

/// Request body of `POST /v1/performances` and `POST /v1/performances/{id}/reply`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewPerformance {
    pub metadata: NewMetadata,
    pub events_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceView {
    pub metadata: Metadata,
    pub created_at: DateTime<Utc>,
    pub events_csv: String,
    pub events: Vec<TouchEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainView {
    pub id: String,
    pub depth: usize,
    pub layers: Vec<Metadata>,
}

type RenderLocks = Mutex<HashMap<(String, ArtifactKind), Arc<tokio::sync::Mutex<()>>>>;

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
    in_flight: Arc<RenderLocks>,
    renders: Arc<AtomicUsize>,
}

impl AppState {
    pub fn new(store: Arc<Store>) -> Self {
        Self {
            store,
            in_flight: Arc::default(),
            renders: Arc::default(),
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    /// Number of artifacts rendered (cache misses) since start.
    pub fn render_count(&self) -> usize {
        self.renders.load(Ordering::SeqCst)
    }

    fn render_lock(&self, key: &(String, ArtifactKind)) -> Arc<tokio::sync::Mutex<()>> {
        self.in_flight.lock().unwrap().entry(key.clone()).or_default().clone()
    }

    fn release_lock(&self, key: &(String, ArtifactKind), lock: Arc<tokio::sync::Mutex<()>>) {
        let mut map = self.in_flight.lock().unwrap();
        drop(lock);
        if map.get(key).is_some_and(|l| Arc::strong_count(l) == 1) {
            map.remove(key);
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/performances", get(list).post(create))
        .route("/v1/performances/{id}", get(show))
        .route("/v1/performances/{id}/reply", post(reply))
        .route("/v1/performances/{id}/chain", get(chain))
        .route("/v1/performances/{id}/children", get(children))
        .route("/v1/performances/{id}/audio.wav", get(audio))
        .route("/v1/performances/{id}/trace.png", get(trace))
        .route("/v1/report", get(report))
        .fallback(|| async { ApiError::not_found("no such route") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed")
        })
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves `store` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    store: Arc<Store>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServerError> {
    let app = router(AppState::new(store));
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

/// Opens the store at `store_dir`, binds `addr` and serves until Ctrl-C.
pub async fn run(addr: SocketAddr, store_dir: PathBuf) -> Result<(), ServerError> {
    let store = tokio::task::spawn_blocking(move || Store::open(store_dir))
        .await
        .map_err(|e| std::io::Error::other(e.to_string()))??;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, records = store.len(), "listening");
    serve(listener, Arc::new(store), async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "engine_version": ENGINE_VERSION }))
}

fn parse_positive(query: &HashMap<String, String>, key: &str, default: usize) -> Result<usize, ApiError> {
    match query.get(key) {
        None => Ok(default),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(ApiError::bad_request(format!("{key} must be a positive integer, got {v:?}"))),
        },
    }
}

async fn list(
    State(state): State<AppState>,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Result<Json<Page>, ApiError> {
    let Query(query) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let page = parse_positive(&query, "page", 1)?;
    let page_size = parse_positive(&query, "page_size", DEFAULT_PAGE_SIZE)?;
    Ok(Json(state.store.list(page, page_size)))
}

fn decode_new(body: Result<Bytes, BytesRejection>) -> Result<TinyPerformance, ApiError> {
    let body = body.map_err(|e| ApiError::new(e.status(), "unreadable_body", e.body_text()))?;
    let req: NewPerformance =
        serde_json::from_slice(&body).map_err(|e| ApiError::malformed(format!("invalid request body: {e}")))?;
    let instrument: Instrument = req
        .metadata
        .instrument
        .parse()
        .map_err(|e: tinyjam_core::perf::UnknownInstrument| ApiError::bad_request(e.to_string()))?;
    let events = parse_events_csv(&req.events_csv).map_err(|e| ApiError::malformed(format!("events_csv: {e}")))?;
    let meta = Metadata {
        id: String::new(),
        performer: req.metadata.performer,
        instrument,
        date: req.metadata.date.unwrap_or_else(Utc::now),
        parent_id: req.metadata.parent_id,
    };
    Ok(TinyPerformance::new(meta, events))
}

async fn store_new(state: AppState, perf: TinyPerformance) -> Result<Response, ApiError> {
    let store = state.store.clone();
    let id = blocking(move || Ok(store.put(perf)?)).await?;
    let location = HeaderValue::from_str(&format!("/v1/performances/{id}")).expect("hex id is a valid header");
    Ok((StatusCode::CREATED, [(header::LOCATION, location)], Json(Created { id })).into_response())
}

async fn create(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> Result<Response, ApiError> {
    let perf = decode_new(body)?;
    store_new(state, perf).await
}

async fn reply(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    if !state.store.contains(&id) {
        return Err(ApiError::not_found(format!("no performance with id {id}")));
    }
    let mut perf = decode_new(body)?;
    if perf.meta.parent_id.as_ref().is_some_and(|p| *p != id) {
        return Err(ApiError::bad_request("body parent_id disagrees with the reply target"));
    }
    perf.meta.parent_id = Some(id);
    store_new(state, perf).await
}

async fn show(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<PerformanceView>, ApiError> {
    let store = state.store.clone();
    blocking(move || {
        let record = store.record(&id)?;
        let perf = store.get(&id)?;
        Ok(Json(PerformanceView {
            metadata: perf.meta.clone(),
            created_at: record.created_at,
            events_csv: perf.to_csv(),
            events: perf.events,
        }))
    })
    .await
}

async fn chain(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<ChainView>, ApiError> {
    let layers = state
        .store
        .lineage(&id)?
        .iter()
        .map(|i| state.store.metadata(i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Json(ChainView {
        id,
        depth: layers.len(),
        layers,
    }))
}

async fn children(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Vec<String>>, ApiError> {
    Ok(Json(state.store.children(&id)?))
}

fn render_artifact(store: &Store, id: &str, kind: ArtifactKind) -> Result<Vec<u8>, ApiError> {
    let chain = store.chain(id)?;
    match kind {
        ArtifactKind::Audio => render_layers(&chain, DEFAULT_SAMPLE_RATE)
            .and_then(|b| encode_wav(&b))
            .map_err(|e| ApiError::internal(e.to_string())),
        ArtifactKind::Trace => render_layered(&chain, DEFAULT_TRACE_SIZE)
            .and_then(|img| img.encode_png())
            .map_err(|e| ApiError::internal(e.to_string())),
    }
}

/// Cached artifact for the chain ending at `id`, rendering it on a miss.
/// Concurrent requests for the same artifact wait for a single render.
async fn artifact(state: &AppState, id: String, kind: ArtifactKind) -> Result<Vec<u8>, ApiError> {
    if !state.store.contains(&id) {
        return Err(ApiError::not_found(format!("no performance with id {id}")));
    }
    let key = (id, kind);
    let lock = state.render_lock(&key);
    let result = {
        let _guard = lock.lock().await;
        let store = state.store.clone();
        let renders = state.renders.clone();
        let id = key.0.clone();
        blocking(move || {
            if let Some(bytes) = store.read_artifact(&id, kind, ENGINE_VERSION)? {
                return Ok(bytes);
            }
            renders.fetch_add(1, Ordering::SeqCst);
            let bytes = render_artifact(&store, &id, kind)?;
            store.write_artifact(&id, kind, ENGINE_VERSION, &bytes)?;
            Ok(bytes)
        })
        .await
    };
    state.release_lock(&key, lock);
    result
}

fn binary(content_type: &'static str, bytes: Vec<u8>) -> Response {
    (
        [
            (header::CONTENT_TYPE, HeaderValue::from_static(content_type)),
            (
                header::HeaderName::from_static("x-engine-version"),
                HeaderValue::from_static(ENGINE_VERSION),
            ),
        ],
        bytes,
    )
        .into_response()
}

async fn audio(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(binary("audio/wav", artifact(&state, id, ArtifactKind::Audio).await?))
}

async fn trace(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(binary("image/png", artifact(&state, id, ArtifactKind::Trace).await?))
}

async fn report(State(state): State<AppState>) -> Result<Response, ApiError> {
    let store = state.store.clone();
    blocking(move || {
        let corpus = store.all()?;
        Ok(Json(build_report(&corpus, &ReportOptions::default())).into_response())
    })
    .await
}
