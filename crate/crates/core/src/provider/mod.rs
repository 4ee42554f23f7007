//! Language-model provider boundary.
//!
//! Everything that talks to a model goes through [`Gateway`], which pairs a
//! [`ChatProvider`] with an [`Embedder`]. Two backends ship: a live client
//! for the chat-completions HTTP protocol and a [`ScriptedProvider`] whose
//! replies are a pure function of the rendered request.

mod embed;
mod live;
mod retry;
mod scripted;

use std::fmt::Write as _;
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

pub(crate) use embed::fnv1a;
pub use embed::HashEmbedder;
pub use live::{
    LiveChat, LiveConfig, LiveEmbedder, ENV_EMBED_DIM, ENV_EMBED_KEY, ENV_EMBED_MODEL,
    ENV_EMBED_URL, ENV_LLM_KEY, ENV_LLM_MODEL, ENV_LLM_URL,
};
pub use retry::RetryPolicy;
pub use scripted::{FailKind, MatchRule, ScriptedBehavior, ScriptedProvider};

use crate::knowledge::EmbeddingVector;

/// Sampling temperature used when generating in-character replies.
pub const RESPONSE_TEMPERATURE: f32 = 0.7;
/// Sampling temperature used for relevance gating.
pub const GATING_TEMPERATURE: f32 = 0.0;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ProviderError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    /// Network-level failure. The only retryable kind.
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Authentication(String),
    #[error("malformed provider response ({reason}): {excerpt}")]
    Malformed { reason: String, excerpt: String },
    #[error("cannot embed empty text")]
    EmptyInput,
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("provider script error: {0}")]
    Script(String),
    #[error("missing provider configuration: environment variable {0} is not set")]
    MissingConfig(&'static str),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Transport(_))
    }

    pub(crate) fn malformed(reason: impl Into<String>, raw: &str) -> Self {
        ProviderError::Malformed {
            reason: reason.into(),
            excerpt: excerpt(raw, 240),
        }
    }
}

fn excerpt(raw: &str, max_chars: usize) -> String {
    let mut out: String = raw.chars().take(max_chars).collect();
    if raw.chars().count() > max_chars {
        out.push('…');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeakerRole {
    User,
    Agent,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub role: SpeakerRole,
    pub name: String,
    pub content: String,
}

impl Turn {
    pub fn user(name: impl Into<String>, content: impl Into<String>) -> Self {
        Turn {
            role: SpeakerRole::User,
            name: name.into(),
            content: content.into(),
        }
    }

    pub fn agent(name: impl Into<String>, content: impl Into<String>) -> Self {
        Turn {
            role: SpeakerRole::Agent,
            name: name.into(),
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Turn {
            role: SpeakerRole::System,
            name: "system".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub turns: Vec<Turn>,
    pub temperature: f32,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(system_prompt: impl Into<String>) -> Self {
        ChatRequest {
            system_prompt: system_prompt.into(),
            turns: Vec::new(),
            temperature: RESPONSE_TEMPERATURE,
            max_tokens: 1024,
        }
    }

    pub fn with_turn(mut self, turn: Turn) -> Self {
        self.turns.push(turn);
        self
    }

    pub fn with_temperature(mut self, temperature: f32) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.turns.is_empty() && self.system_prompt.is_empty() {
            return Err(ProviderError::InvalidRequest(
                "request has neither a system prompt nor any turns".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(ProviderError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        if let Some(turn) = self
            .turns
            .iter()
            .find(|t| t.role == SpeakerRole::Agent && t.name.is_empty())
        {
            return Err(ProviderError::InvalidRequest(format!(
                "agent turn without a speaker name: {:?}",
                excerpt(&turn.content, 40)
            )));
        }
        Ok(())
    }

    /// Canonical text form of the request. Scripted rules match against
    /// this, so its layout is part of the script-file contract:
    ///
    /// ```text
    /// ### system
    /// <system prompt>
    /// ### user: <name>
    /// <content>
    /// ### agent: <name>
    /// <content>
    /// ```
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(
            self.system_prompt.len()
                + self
                    .turns
                    .iter()
                    .map(|t| t.content.len() + 32)
                    .sum::<usize>(),
        );
        out.push_str("### system\n");
        out.push_str(&self.system_prompt);
        out.push('\n');
        for turn in &self.turns {
            let role = match turn.role {
                SpeakerRole::User => "user",
                SpeakerRole::Agent => "agent",
                SpeakerRole::System => "system",
            };
            let _ = writeln!(out, "### {role}: {}", turn.name);
            out.push_str(&turn.content);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishState {
    Complete,
    Truncated,
    Refused,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub content: String,
    pub finish_state: FinishState,
    pub usage: Usage,
}

#[async_trait]
pub trait ChatProvider: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError>;
}

#[async_trait]
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    /// Raw backend output. [`Gateway::embed`] normalizes and checks it.
    async fn embed_raw(&self, text: &str) -> Result<Vec<f32>, ProviderError>;
}

/// Shared handle over a chat backend and an embedding backend.
#[derive(Clone)]
pub struct Gateway {
    chat: Arc<dyn ChatProvider>,
    embedder: Arc<dyn Embedder>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("dimension", &self.embedder.dimension())
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(chat: Arc<dyn ChatProvider>, embedder: Arc<dyn Embedder>) -> Self {
        Gateway { chat, embedder }
    }

    /// Scripted chat plus the token-hash embedder at the script's dimension.
    pub fn scripted(behavior: ScriptedBehavior) -> Result<Self, ProviderError> {
        let dim = behavior.embedding_dim;
        let chat = ScriptedProvider::new(behavior)?;
        Ok(Gateway::new(
            Arc::new(chat),
            Arc::new(HashEmbedder::new(dim)),
        ))
    }

    /// Live chat-completions and embedding clients.
    pub fn live(config: &LiveConfig) -> Self {
        Gateway::new(
            Arc::new(LiveChat::new(config)),
            Arc::new(LiveEmbedder::new(config)),
        )
    }

    pub fn dimension(&self) -> usize {
        self.embedder.dimension()
    }

    pub async fn complete(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError> {
        request.validate()?;
        self.chat.complete(request).await
    }

    pub async fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let raw = self.embedder.embed_raw(text).await?;
        let expected = self.embedder.dimension();
        if raw.len() != expected {
            return Err(ProviderError::DimensionMismatch {
                expected,
                got: raw.len(),
            });
        }
        EmbeddingVector::normalized(raw)
            .ok_or_else(|| ProviderError::malformed("embedding has zero or non-finite norm", text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_request_is_invalid() {
        let req = ChatRequest::new("");
        assert!(matches!(
            req.validate(),
            Err(ProviderError::InvalidRequest(_))
        ));
        let req = ChatRequest::new("").with_turn(Turn::user("You", "hi"));
        assert!(req.validate().is_ok());
        let req = ChatRequest::new("sys");
        assert!(req.validate().is_ok());
    }

    #[test]
    fn agent_turn_needs_a_name() {
        let req = ChatRequest::new("sys").with_turn(Turn::agent("", "hello"));
        assert!(req.validate().is_err());
    }

    #[test]
    fn temperature_bounds() {
        let req = ChatRequest::new("sys").with_temperature(2.5);
        assert!(req.validate().is_err());
        let req = ChatRequest::new("sys").with_temperature(2.0);
        assert!(req.validate().is_ok());
    }

    #[test]
    fn render_layout() {
        let req = ChatRequest::new("be kind")
            .with_turn(Turn::user("You", "Hey Alice"))
            .with_turn(Turn::agent("Alice", "Hi!"));
        assert_eq!(
            req.render(),
            "### system\nbe kind\n### user: You\nHey Alice\n### agent: Alice\nHi!\n"
        );
    }

    #[test]
    fn excerpt_truncates() {
        let long = "x".repeat(500);
        let e = excerpt(&long, 10);
        assert_eq!(e.chars().count(), 11);
    }
}
