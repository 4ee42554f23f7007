use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use crewroom_core::conversation::ConversationRecord;
use crewroom_core::engine::{Engine, NewConversation, RoundEvent};
use crewroom_core::orchestrator::ModePolicy;
use crewroom_core::scenario::{Scenario, ScenarioTag, SCENARIOS};
use crewroom_core::studio::{AgentPersona, PersonaSeed};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::mpsc;

use crate::ApiError;

type AppState = Arc<Engine>;

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/api/agents", post(create_agent).get(list_agents))
        .route("/api/agents/{id}", delete(delete_agent))
        .route("/api/agents/{id}/knowledge", post(upload_knowledge))
        .route("/api/scenarios", get(list_scenarios))
        .route("/api/conversations", post(create_conversation))
        .route("/api/conversations/{id}", get(get_conversation))
        .route("/api/conversations/{id}/messages", post(post_message))
        .route("/api/conversations/{id}/transcript", get(transcript))
        .with_state(engine)
}

async fn create_agent(
    State(engine): State<AppState>,
    body: Result<Json<PersonaSeed>, JsonRejection>,
) -> Result<(StatusCode, Json<AgentPersona>), ApiError> {
    let Json(seed) = body?;
    Ok((StatusCode::CREATED, Json(engine.create_agent(seed).await?)))
}

async fn list_agents(State(engine): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "agents": engine.list_agents() }))
}

async fn delete_agent(
    State(engine): State<AppState>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    engine.delete_agent(&id).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnowledgeUpload {
    pub doc_id: String,
    pub text: String,
}

async fn upload_knowledge(
    State(engine): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<KnowledgeUpload>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let Json(upload) = body?;
    let chunks = engine
        .upload_knowledge(&id, &upload.doc_id, &upload.text)
        .await?;
    Ok(Json(
        json!({ "agent_id": id, "doc_id": upload.doc_id, "chunks": chunks }),
    ))
}

async fn list_scenarios() -> Json<serde_json::Value> {
    Json(json!({ "scenarios": SCENARIOS }))
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateConversation {
    #[serde(default)]
    roster: Vec<String>,
    #[serde(default)]
    scenario_tag: Option<String>,
    #[serde(default)]
    baseline: bool,
}

/// Conversation header as returned by the API. The scenario vignette is
/// for the human participant only.
#[derive(Debug, Clone, Serialize)]
pub struct ConversationView {
    #[serde(flatten)]
    pub record: ConversationRecord,
    pub active_roster: Vec<String>,
    pub round_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
}

fn view(engine: &Engine, id: &str) -> Result<ConversationView, ApiError> {
    let conversation = engine.conversation(id)?;
    Ok(ConversationView {
        active_roster: conversation.roster().to_vec(),
        round_count: conversation.round_count(),
        scenario: conversation.record.scenario_tag.map(|t| *t.scenario()),
        record: conversation.record,
    })
}

async fn create_conversation(
    State(engine): State<AppState>,
    body: Result<Json<CreateConversation>, JsonRejection>,
) -> Result<(StatusCode, Json<ConversationView>), ApiError> {
    let Json(request) = body?;
    let scenario_tag = match request.scenario_tag.as_deref() {
        None | Some("none") | Some("") => None,
        Some(tag) => Some(
            tag.parse::<ScenarioTag>()
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e))?,
        ),
    };
    let record = engine.create_conversation(NewConversation {
        roster: request.roster,
        scenario_tag,
        baseline: request.baseline,
    })?;
    Ok((
        StatusCode::CREATED,
        Json(view(&engine, &record.conversation_id)?),
    ))
}

async fn get_conversation(
    State(engine): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ConversationView>, ApiError> {
    Ok(Json(view(&engine, &id)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostMessage {
    pub text: String,
    #[serde(default)]
    pub mode: ModePolicy,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn sse_event(event: &RoundEvent) -> Result<Event, Infallible> {
    Ok(Event::default()
        .event(event.event.as_str())
        .data(serde_json::to_string(event).expect("events serialize")))
}

/// Streams the round as server-sent events. The round runs to completion
/// and is committed even if the client goes away mid-stream.
async fn post_message(
    State(engine): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<PostMessage>, JsonRejection>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let Json(message) = body?;
    if message.text.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_request",
            "message text must not be empty",
        ));
    }
    let conversation = engine.conversation(&id)?;
    if !conversation.record.baseline
        && !conversation
            .roster()
            .iter()
            .any(|agent| engine.agent(agent).is_ok())
    {
        return Err(crewroom_core::engine::EngineError::EmptyRoster(id).into());
    }

    let (tx, rx) = mpsc::unbounded_channel::<RoundEvent>();
    tokio::spawn(async move {
        let mut sink = |event: RoundEvent| {
            let _ = tx.send(event);
        };
        if let Err(e) = engine
            .post_message(&id, &message.text, message.mode, message.seed, &mut sink)
            .await
        {
            tracing::warn!(conversation = %id, error = %e, "round did not commit");
        }
    });
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        let event = rx.recv().await?;
        Some((sse_event(&event), rx))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

#[derive(Debug, Deserialize)]
struct TranscriptQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn transcript(
    State(engine): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<TranscriptQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(query) = query?;
    match query.format.as_deref().unwrap_or("structured") {
        "text" => Ok((
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            engine.export_text(&id)?,
        )
            .into_response()),
        "structured" => Ok((
            [(header::CONTENT_TYPE, "application/json")],
            engine.export_structured(&id)?,
        )
            .into_response()),
        other => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_request",
            format!("unknown transcript format {other:?} (expected text or structured)"),
        )),
    }
}
