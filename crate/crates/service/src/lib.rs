//! HTTP API over a crewroom [`Engine`].
//!
//! | Method | Path | Body | Reply |
//! |---|---|---|---|
//! | POST | `/api/agents` | persona seed | 201, agent |
//! | GET | `/api/agents` | | `{agents}` |
//! | DELETE | `/api/agents/{id}` | | 204 |
//! | POST | `/api/agents/{id}/knowledge` | `{doc_id, text}` | `{agent_id, doc_id, chunks}` |
//! | GET | `/api/scenarios` | | `{scenarios}` |
//! | POST | `/api/conversations` | `{roster, scenario_tag, baseline}` | 201, conversation |
//! | GET | `/api/conversations/{id}` | | conversation |
//! | POST | `/api/conversations/{id}/messages` | `{text, mode, seed}` | event stream |
//! | GET | `/api/conversations/{id}/transcript?format=text\|structured` | | transcript |
//!
//! Errors are `{"code": ..., "message": ...}` with a matching status.

mod config;
mod error;
mod routes;

pub use config::{build_engine, ConfigError, ProviderMode, ServiceConfig};
pub use error::ApiError;
pub use routes::{router, ConversationView, KnowledgeUpload, PostMessage};

pub async fn serve(
    engine: std::sync::Arc<crewroom_core::engine::Engine>,
    addr: std::net::SocketAddr,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(engine)).await
}
