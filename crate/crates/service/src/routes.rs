//! HTTP surface: one session per VR sitting, driven forward by uploads.
//!
//! ```text
//! POST /v1/sessions                     create          -> CREATED
//! POST /v1/sessions/{id}/gaze          CSV body         -> METRICS_READY
//! POST /v1/sessions/{id}/quiz                           -> QUIZ_READY
//! POST /v1/sessions/{id}/quiz/grade    {item_id, response}
//! POST /v1/sessions/{id}/chat          {text}
//! GET  /v1/sessions/{id}/chatquiz
//! ```
//!
//! Pipeline work runs on the blocking pool; requests for the same
//! session serialize on a per-session lock, distinct sessions proceed
//! concurrently.

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use uuid::Uuid;

use lectern_engine::confusion::{
    build_confusion_report, chat_log_line, chatquiz_plan, parse_chat_log, section_profiles, Author, ChatMessage,
    ConfusionReport,
};
use lectern_engine::geometry::GeometryError;
use lectern_engine::ingest::{parse_gaze_csv, IngestError, IngestOptions};
use lectern_engine::metrics::MetricsError;
use lectern_engine::model::stable_hash64;
use lectern_engine::quiz::{
    allocate_questions, allocate_random, generate_quiz, grade, grounding_from_descriptor, Difficulty, QuizError,
    QuizItem, QuizMode, QuizPlan,
};
use lectern_engine::retrieval::{build_grounded_prompt, search, RetrievalError, DEFAULT_GROUNDING_INSTRUCTIONS};
use lectern_engine::adapter::CompletionRequest;
use lectern_engine::{build_report, label_samples, AttentionReport, LectureDescriptor};

use crate::error::ApiError;
use crate::state::SharedState;
use crate::store::{
    SessionMeta, SessionState, CHATQUIZ_FILE, CHAT_FILE, GAZE_FILE, METRICS_FILE, QUIZ_FILE, QUIZ_PLAN_FILE,
};

pub fn build_router(state: SharedState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/gaze", post(upload_gaze))
        .route("/v1/sessions/{id}/quiz", post(create_quiz))
        .route("/v1/sessions/{id}/quiz/grade", post(grade_response))
        .route("/v1/sessions/{id}/chat", post(chat))
        .route("/v1/sessions/{id}/chatquiz", get(chatquiz))
        .with_state(state)
}

/// Binds and serves until the task is cancelled.
pub async fn run(state: SharedState, listen_addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen_addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, build_router(state)).await
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

async fn blocking<T: Send + 'static>(
    task: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(task)
        .await
        .map_err(|e| ApiError::internal(format!("task panicked: {e}")))?
}

fn canonical_json_response(status: StatusCode, bytes: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

// ---------------------------------------------------------------------------
// Error mapping
// ---------------------------------------------------------------------------

fn ingest_error(e: IngestError) -> ApiError {
    let detail = match &e {
        IngestError::Row { line, field, .. } => json!({"line": line, "field": field}),
        IngestError::Monotonicity { line } | IngestError::Encoding { line } => json!({"line": line}),
        IngestError::Header { column, .. } => json!({"column": column}),
    };
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "PARSE_ERROR", e.to_string()).with_detail(detail)
}

fn geometry_error(e: GeometryError) -> ApiError {
    let GeometryError::UnknownLabel { index, label } = &e;
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "UNKNOWN_LABEL", e.to_string())
        .with_detail(json!({"sample_index": index, "label": label}))
}

fn metrics_error(e: MetricsError) -> ApiError {
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "EMPTY_TRACE", e.to_string())
}

fn quiz_error(e: QuizError) -> ApiError {
    match &e {
        QuizError::Adapter(_) | QuizError::MalformedGeneration(_) | QuizError::MalformedGrade(_) => {
            ApiError::new(StatusCode::BAD_GATEWAY, "ADAPTER_ERROR", e.to_string())
        }
        QuizError::EmptyResponse => ApiError::new(StatusCode::BAD_REQUEST, "EMPTY_RESPONSE", e.to_string()),
        QuizError::MissingGrounding(section) => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "MISSING_GROUNDING", e.to_string())
                .with_detail(json!({"section_index": section}))
        }
        _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "QUIZ_ERROR", e.to_string()),
    }
}

fn retrieval_error(e: RetrievalError) -> ApiError {
    match e {
        RetrievalError::EmptyStore => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "KB_EMPTY", "knowledge base has no chunks")
        }
        other => ApiError::new(StatusCode::BAD_GATEWAY, "EMBEDDER_ERROR", other.to_string()),
    }
}

// ---------------------------------------------------------------------------
// Session helpers
// ---------------------------------------------------------------------------

struct SessionContext {
    meta: SessionMeta,
    state: SessionState,
    descriptor: Arc<LectureDescriptor>,
}

fn session_context(state: &SharedState, session_id: &str) -> Result<SessionContext, ApiError> {
    let meta = state.store.meta(session_id).ok_or_else(|| ApiError::session_not_found(session_id))?;
    let session_state = state
        .store
        .state_of(session_id)
        .ok_or_else(|| ApiError::session_not_found(session_id))?;
    let descriptor = state.lectures.get(&meta.lecture_id).cloned().ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "LECTURE_NOT_FOUND",
            format!("lecture {:?} is not loaded", meta.lecture_id),
        )
    })?;
    Ok(SessionContext { meta, state: session_state, descriptor })
}

// ---------------------------------------------------------------------------
// Artifact documents
// ---------------------------------------------------------------------------

/// Persisted `quiz.json` / HTTP response for the quiz endpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuizDocument {
    pub session_id: String,
    pub lecture_id: String,
    pub mode: QuizMode,
    pub difficulty: Difficulty,
    pub total: u32,
    pub items: Vec<QuizItem>,
}

/// Persisted `chatquiz.json`: the confusion report plus the quiz it drove.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatQuizDocument {
    pub session_id: String,
    pub lecture_id: String,
    pub confusion: ConfusionReport,
    pub plan: QuizPlan,
    pub items: Vec<QuizItem>,
}

// ---------------------------------------------------------------------------
// Handlers
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct CreateSessionBody {
    lecture_id: String,
    group_mode: String,
}

async fn create_session(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    blocking(move || {
        let body: CreateSessionBody = serde_json::from_slice(&body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BAD_JSON", e.to_string()))?;
        let group_mode = match body.group_mode.as_str() {
            "ATTENTIVE" => QuizMode::Attentive,
            "RANDOM" => QuizMode::Random,
            other => {
                return Err(ApiError::new(
                    StatusCode::BAD_REQUEST,
                    "BAD_MODE",
                    format!("group_mode {other:?}; expected ATTENTIVE or RANDOM"),
                ))
            }
        };
        if !state.lectures.contains_key(&body.lecture_id) {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "LECTURE_NOT_FOUND",
                format!("lecture {:?} is not loaded", body.lecture_id),
            ));
        }
        let meta = SessionMeta {
            session_id: Uuid::new_v4().to_string(),
            lecture_id: body.lecture_id,
            group_mode,
            created_at_ms: now_ms(),
        };
        state.store.create(&meta)?;
        Ok((StatusCode::CREATED, Json(json!({"session_id": meta.session_id}))).into_response())
    })
    .await
}

async fn upload_gaze(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    blocking(move || {
        let lock = state.store.lock(&id);
        let _guard = lock.lock().expect("session lock poisoned");

        let ctx = session_context(&state, &id)?;
        if ctx.state != SessionState::Created {
            return Err(ApiError::wrong_state("CREATED", ctx.state.as_str()));
        }

        // Full pipeline first; the directory is only touched on success.
        let report = compute_report(&id, &body, &ctx.descriptor, &state)?;
        let canonical = report.to_canonical_json();
        state.store.write_artifact(&id, GAZE_FILE, &body)?;
        state.store.write_artifact(&id, METRICS_FILE, canonical.as_bytes())?;
        Ok(canonical_json_response(StatusCode::OK, canonical.into_bytes()))
    })
    .await
}

fn compute_report(
    session_id: &str,
    csv: &[u8],
    descriptor: &LectureDescriptor,
    state: &SharedState,
) -> Result<AttentionReport, ApiError> {
    let (samples, _stats) = parse_gaze_csv(csv, IngestOptions::default()).map_err(ingest_error)?;
    let aois = descriptor.aoi_set();
    let labeled = label_samples(&samples, &aois).map_err(geometry_error)?;
    let learning = aois.learning_labels().into_iter().collect();
    let timeline = descriptor.timeline();
    build_report(session_id, &labeled, &timeline, &learning, &state.engine).map_err(metrics_error)
}

async fn create_quiz(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    blocking(move || {
        let lock = state.store.lock(&id);
        let _guard = lock.lock().expect("session lock poisoned");

        let ctx = session_context(&state, &id)?;
        if ctx.state != SessionState::MetricsReady {
            return Err(ApiError::wrong_state("METRICS_READY", ctx.state.as_str()));
        }

        let report_text = state.store.artifact_string(&id, METRICS_FILE)?;
        let report = AttentionReport::from_json(&report_text)
            .map_err(|e| ApiError::internal(format!("stored report unreadable: {e}")))?;

        let plan = match ctx.meta.group_mode {
            QuizMode::Attentive => allocate_questions(&report, &state.engine).map_err(quiz_error)?,
            QuizMode::Random => {
                allocate_random(&id, &ctx.descriptor.timeline(), &state.engine, stable_hash64(id.as_bytes()))
            }
        };
        let grounding = grounding_from_descriptor(&plan, &ctx.descriptor);
        let items = generate_quiz(&plan, &ctx.descriptor, &grounding, state.adapter.as_ref()).map_err(quiz_error)?;

        let document = QuizDocument {
            session_id: id.clone(),
            lecture_id: ctx.meta.lecture_id.clone(),
            mode: plan.mode,
            difficulty: plan.difficulty,
            total: plan.total,
            items,
        };
        let bytes = serde_json::to_vec_pretty(&document).expect("document serialization is infallible");
        state.store.write_artifact(&id, QUIZ_PLAN_FILE, plan.to_json().as_bytes())?;
        state.store.write_artifact(&id, QUIZ_FILE, &bytes)?;
        Ok(canonical_json_response(StatusCode::OK, bytes))
    })
    .await
}

#[derive(Deserialize)]
struct GradeBody {
    item_id: String,
    response: String,
}

async fn grade_response(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    blocking(move || {
        let body: GradeBody = serde_json::from_slice(&body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BAD_JSON", e.to_string()))?;
        let lock = state.store.lock(&id);
        let _guard = lock.lock().expect("session lock poisoned");

        let ctx = session_context(&state, &id)?;
        if ctx.state != SessionState::QuizReady {
            return Err(ApiError::new(StatusCode::CONFLICT, "QUIZ_NOT_READY", "generate the quiz first"));
        }
        let quiz_text = state.store.artifact_string(&id, QUIZ_FILE)?;
        let document: QuizDocument = serde_json::from_str(&quiz_text)
            .map_err(|e| ApiError::internal(format!("stored quiz unreadable: {e}")))?;
        let item = document
            .items
            .iter()
            .find(|i| i.id == body.item_id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UNKNOWN_ITEM", format!("no item {}", body.item_id)))?;

        let result = grade(item, &body.response, state.adapter.as_ref()).map_err(quiz_error)?;
        Ok((StatusCode::OK, Json(result)).into_response())
    })
    .await
}

#[derive(Deserialize)]
struct ChatBody {
    text: String,
}

async fn chat(State(state): State<SharedState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    blocking(move || {
        let body: ChatBody = serde_json::from_slice(&body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BAD_JSON", e.to_string()))?;
        if body.text.trim().is_empty() {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "EMPTY_TEXT", "message text is empty"));
        }
        let lock = state.store.lock(&id);
        let _guard = lock.lock().expect("session lock poisoned");
        let ctx = session_context(&state, &id)?;

        let hits = search(&body.text, &state.kb, state.embedder.as_ref(), state.chat_top_k)
            .map_err(retrieval_error)?;
        let chunks: Vec<_> = hits.iter().map(|h| h.chunk).collect();
        let chunk_ids: Vec<String> = chunks.iter().map(|c| c.id.clone()).collect();
        let prompt = build_grounded_prompt(&body.text, &chunks, DEFAULT_GROUNDING_INSTRUCTIONS);
        let answer = state
            .adapter
            .complete(&CompletionRequest { prompt })
            .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "ADAPTER_ERROR", e.to_string()))?
            .answer;

        let t_ms = now_ms().saturating_sub(ctx.meta.created_at_ms);
        let mut lines = chat_log_line(&ChatMessage { t_ms, author: Author::User, text: body.text.clone() });
        lines.push('\n');
        lines.push_str(&chat_log_line(&ChatMessage { t_ms, author: Author::Assistant, text: answer.clone() }));
        lines.push('\n');
        state.store.append_chat(&id, &lines)?;

        Ok((StatusCode::OK, Json(json!({"answer": answer, "grounding_chunk_ids": chunk_ids}))).into_response())
    })
    .await
}

async fn chatquiz(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    blocking(move || {
        let lock = state.store.lock(&id);
        let _guard = lock.lock().expect("session lock poisoned");
        let ctx = session_context(&state, &id)?;

        let messages = if state.store.has_artifact(&id, CHAT_FILE) {
            let text = state.store.artifact_string(&id, CHAT_FILE)?;
            parse_chat_log(&text).map_err(|e| ApiError::internal(format!("stored chat log unreadable: {e}")))?
        } else {
            Vec::new()
        };

        let profiles = section_profiles(&ctx.descriptor, state.embedder.as_ref()).map_err(retrieval_error)?;
        let confusion = build_confusion_report(&id, &messages, &profiles, state.embedder.as_ref(), &state.lexicon)
            .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "EMBEDDER_ERROR", e.to_string()))?;
        let plan = chatquiz_plan(&confusion, &ctx.descriptor.timeline(), &state.engine);
        let grounding = grounding_from_descriptor(&plan, &ctx.descriptor);
        let items = generate_quiz(&plan, &ctx.descriptor, &grounding, state.adapter.as_ref()).map_err(quiz_error)?;

        let document = ChatQuizDocument {
            session_id: id.clone(),
            lecture_id: ctx.meta.lecture_id.clone(),
            confusion,
            plan,
            items,
        };
        let bytes = serde_json::to_vec_pretty(&document).expect("document serialization is infallible");
        state.store.write_artifact(&id, CHATQUIZ_FILE, &bytes)?;
        Ok(canonical_json_response(StatusCode::OK, bytes))
    })
    .await
}
