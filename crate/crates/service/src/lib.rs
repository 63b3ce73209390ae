//! HTTP API over a loaded corpus and an annotation store.
//!
//! Report endpoints return the same bytes as `--format records` on the
//! command line: one JSON object per line.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use emocarrier_core::annotation::{AnnotationSet, AnnotationStore, Span, StoreError};
use emocarrier_core::corpus::{attach_token_layers, load_corpus, Corpus, CorpusError, LexiconPaths, Polarity};
use emocarrier_core::query::{
    render_sentiment_query, render_stats_query, AgreementQuery, FillerQuery, QueryError, StrategyParams,
};
use emocarrier_core::report::OutputFormat;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: std::io::Error },
    #[error("corpus failed to load: {0}")]
    CorpusLoadFailure(#[from] CorpusError),
    #[error("annotation store failed to open: {0}")]
    StoreOpen(#[from] StoreError),
    #[error("auth table {path}: {reason}")]
    AuthTable { path: PathBuf, reason: String },
}

/// A bearer token bound to one annotator for the lifetime of the process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSession {
    pub annotator_id: String,
    /// Seconds since the Unix epoch.
    pub issued_at: u64,
    pub token: String,
}

/// Static token table read from a `token<TAB>annotator_id` file.
#[derive(Debug, Clone, Default)]
pub struct AuthTable {
    sessions: HashMap<String, ApiSession>,
}

impl AuthTable {
    pub fn parse(text: &str, issued_at: u64) -> Result<Self, String> {
        let mut sessions = HashMap::new();
        let mut annotators = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((token, annotator)) = line.split_once('\t') else {
                return Err(format!("line {}: expected token<TAB>annotator_id", i + 1));
            };
            let (token, annotator) = (token.trim().to_string(), annotator.trim().to_string());
            if let Some(prev) = annotators.insert(token.clone(), annotator.clone()) {
                return Err(format!("line {}: token reused (already bound to {prev:?})", i + 1));
            }
            sessions.insert(token.clone(), ApiSession { annotator_id: annotator, issued_at, token });
        }
        Ok(AuthTable { sessions })
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let err = |reason: String| ServiceError::AuthTable { path: path.to_path_buf(), reason };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::parse(&text, unix_now()).map_err(err)
    }

    pub fn session(&self, token: &str) -> Option<&ApiSession> {
        self.sessions.get(token)
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub struct AppState {
    pub corpus: Corpus,
    pub store: AnnotationStore,
    pub seed: u64,
    /// When absent, writes are unauthenticated.
    pub auth: Option<AuthTable>,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: String,
    pub corpus: PathBuf,
    pub sidecar: Option<PathBuf>,
    pub lexicons: LexiconPaths,
    pub store: PathBuf,
    pub seed: u64,
    pub auth: Option<PathBuf>,
}

impl ServiceConfig {
    /// Load the corpus and recover the store.
    pub fn load_state(&self) -> Result<AppState, ServiceError> {
        let mut corpus = load_corpus(&self.corpus, &self.lexicons)?;
        if let Some(sidecar) = &self.sidecar {
            corpus = attach_token_layers(corpus, sidecar)?;
        }
        let (store, report) = AnnotationStore::open(&self.store)?;
        for skipped in &report.skipped {
            eprintln!(
                "store: skipped line {}{}: {}",
                skipped.line,
                if skipped.torn { " (torn)" } else { "" },
                skipped.reason
            );
        }
        let auth = self.auth.as_deref().map(AuthTable::load).transpose()?;
        Ok(AppState { corpus, store, seed: self.seed, auth })
    }
}

/// Bind, serve until ctrl-c, then flush the store.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = Arc::new(config.load_state()?);
    let listener = tokio::net::TcpListener::bind(&config.bind)
        .await
        .map_err(|source| ServiceError::BindFailure { addr: config.bind.clone(), source })?;
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    eprintln!("listening on {}", addr.map_or(config.bind.clone(), |a| a.to_string()));
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| ServiceError::BindFailure { addr: config.bind.clone(), source })?;
    state.store.flush()?;
    Ok(())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/narratives", get(list_narratives))
        .route("/narratives/{id}", get(get_narrative))
        .route("/annotations/{annotator}/{narrative}", get(get_annotation).put(put_annotation))
        .route("/session", get(get_session))
        .route("/reports/agreement", get(agreement_report))
        .route("/reports/stats", get(stats_report))
        .route("/reports/sentiment", get(sentiment_report))
        .route("/reports/overlaps", get(overlaps_report))
        .route("/reports/fillers", get(fillers_report))
        .with_state(state)
}

type Shared = State<Arc<AppState>>;

fn error(status: StatusCode, name: &str, message: impl std::fmt::Display) -> Response {
    (status, Json(json!({ "error": name, "message": message.to_string() }))).into_response()
}

fn not_found(what: &str) -> Response {
    error(StatusCode::NOT_FOUND, "NotFound", what)
}

#[derive(Serialize)]
struct NarrativeSummary<'a> {
    id: &'a str,
    prompt_polarity: Polarity,
    token_count: usize,
    annotated_by: Vec<String>,
}

async fn list_narratives(State(state): Shared) -> Response {
    let list: Vec<NarrativeSummary<'_>> = state
        .corpus
        .narratives
        .values()
        .map(|n| NarrativeSummary {
            id: &n.id,
            prompt_polarity: n.prompt_polarity,
            token_count: n.token_count(),
            annotated_by: state.store.annotators_of(&n.id),
        })
        .collect();
    Json(list).into_response()
}

async fn get_narrative(State(state): Shared, UrlPath(id): UrlPath<String>) -> Response {
    match state.corpus.narrative(&id) {
        Some(n) => Json(n).into_response(),
        None => not_found(&format!("narrative {id:?}")),
    }
}

async fn get_annotation(State(state): Shared, UrlPath((annotator, narrative)): UrlPath<(String, String)>) -> Response {
    match state.store.get(&annotator, &narrative) {
        Some(set) => Json(set).into_response(),
        None => not_found(&format!("annotation set {annotator:?}/{narrative:?}")),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PutAnnotation {
    pub spans: Vec<Span>,
    #[serde(default)]
    pub expected_revision: u64,
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ").map(str::trim)
}

#[allow(clippy::result_large_err)]
fn authorize(state: &AppState, headers: &HeaderMap, annotator: &str) -> Result<(), Response> {
    let Some(auth) = &state.auth else { return Ok(()) };
    let Some(session) = bearer(headers).and_then(|t| auth.session(t)) else {
        return Err(error(StatusCode::UNAUTHORIZED, "Unauthorized", "missing or unknown bearer token"));
    };
    if session.annotator_id != annotator {
        return Err(error(StatusCode::FORBIDDEN, "Forbidden", format!("token belongs to {:?}", session.annotator_id)));
    }
    Ok(())
}

async fn get_session(State(state): Shared, headers: HeaderMap) -> Response {
    let session = state.auth.as_ref().zip(bearer(&headers)).and_then(|(a, t)| a.session(t));
    match session {
        Some(s) => Json(s).into_response(),
        None => error(StatusCode::UNAUTHORIZED, "Unauthorized", "missing or unknown bearer token"),
    }
}

async fn put_annotation(
    State(state): Shared,
    UrlPath((annotator, narrative_id)): UrlPath<(String, String)>,
    headers: HeaderMap,
    body: Result<Json<PutAnnotation>, axum::extract::rejection::JsonRejection>,
) -> Response {
    if let Err(r) = authorize(&state, &headers, &annotator) {
        return r;
    }
    let Json(body) = match body {
        Ok(b) => b,
        Err(e) => return error(e.status(), "BadRequest", e.body_text()),
    };
    if state.corpus.narrative(&narrative_id).is_none() {
        return not_found(&format!("narrative {narrative_id:?}"));
    }
    let set = AnnotationSet::new(annotator, narrative_id, body.spans);
    let expected = body.expected_revision;
    let worker = state.clone();
    // fsync on every write; keep it off the async workers
    let result = tokio::task::spawn_blocking(move || {
        let narrative = &worker.corpus.narratives[&set.narrative_id];
        worker.store.upsert(set, expected, narrative)
    })
    .await;
    match result {
        Ok(Ok(outcome)) => Json(outcome).into_response(),
        Ok(Err(StoreError::StaleRevision { stored, expected })) => {
            (StatusCode::CONFLICT, Json(json!({ "error": "StaleRevision", "stored": stored, "expected": expected })))
                .into_response()
        }
        Ok(Err(StoreError::ValidationError(v))) => (
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(json!({ "error": "ValidationError", "errors": v.errors, "warnings": v.warnings })),
        )
            .into_response(),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, "StoreError", e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "StoreError", e),
    }
}

fn records(result: Result<String, QueryError>) -> Response {
    match result {
        Ok(body) => ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response(),
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e.name(), e),
    }
}

fn bad_query(e: axum::extract::rejection::QueryRejection) -> Response {
    error(StatusCode::BAD_REQUEST, "BadRequest", e.body_text())
}

async fn agreement_report(
    State(state): Shared,
    q: Result<Query<AgreementQuery>, axum::extract::rejection::QueryRejection>,
) -> Response {
    match q {
        Ok(Query(q)) => records(q.render(&state.corpus, &state.store.snapshot(), OutputFormat::Records)),
        Err(e) => bad_query(e),
    }
}

async fn stats_report(State(state): Shared) -> Response {
    records(render_stats_query(&state.corpus, &state.store.snapshot(), OutputFormat::Records))
}

async fn sentiment_report(State(state): Shared) -> Response {
    records(render_sentiment_query(&state.corpus, &state.store.snapshot(), OutputFormat::Records))
}

async fn overlaps_report(
    State(state): Shared,
    q: Result<Query<StrategyParams>, axum::extract::rejection::QueryRejection>,
) -> Response {
    match q {
        Ok(Query(q)) => records(q.render_overlaps(&state.corpus, &state.store.snapshot(), OutputFormat::Records)),
        Err(e) => bad_query(e),
    }
}

async fn fillers_report(
    State(state): Shared,
    q: Result<Query<FillerQuery>, axum::extract::rejection::QueryRejection>,
) -> Response {
    match q {
        Ok(Query(q)) => records(q.render(&state.corpus, &state.store.snapshot(), state.seed, OutputFormat::Records)),
        Err(e) => bad_query(e),
    }
}
