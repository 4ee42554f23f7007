//! Live backends speaking the hosted chat-completions and embeddings
//! HTTP protocols.

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{
    ChatProvider, ChatReply, ChatRequest, Embedder, FinishState, ProviderError, RetryPolicy,
    SpeakerRole, Usage,
};

pub const ENV_LLM_URL: &str = "CREWROOM_LLM_URL";
pub const ENV_LLM_KEY: &str = "CREWROOM_LLM_KEY";
pub const ENV_EMBED_URL: &str = "CREWROOM_EMBED_URL";
pub const ENV_EMBED_KEY: &str = "CREWROOM_EMBED_KEY";
pub const ENV_LLM_MODEL: &str = "CREWROOM_LLM_MODEL";
pub const ENV_EMBED_MODEL: &str = "CREWROOM_EMBED_MODEL";
pub const ENV_EMBED_DIM: &str = "CREWROOM_EMBED_DIM";

#[derive(Debug, Clone, PartialEq)]
pub struct LiveConfig {
    pub llm_url: String,
    pub llm_key: String,
    pub llm_model: String,
    pub embed_url: String,
    pub embed_key: String,
    pub embed_model: String,
    pub embed_dim: usize,
}

impl LiveConfig {
    pub fn from_env() -> Result<Self, ProviderError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ProviderError> {
        let required = |name: &'static str| {
            lookup(name)
                .filter(|v| !v.trim().is_empty())
                .ok_or(ProviderError::MissingConfig(name))
        };
        let embed_dim = match lookup(ENV_EMBED_DIM) {
            Some(v) => v.trim().parse().map_err(|_| {
                ProviderError::InvalidRequest(format!("{ENV_EMBED_DIM}={v:?} is not an integer"))
            })?,
            None => 1536,
        };
        Ok(LiveConfig {
            llm_url: required(ENV_LLM_URL)?,
            llm_key: required(ENV_LLM_KEY)?,
            llm_model: lookup(ENV_LLM_MODEL).unwrap_or_else(|| "gpt-4o".into()),
            embed_url: required(ENV_EMBED_URL)?,
            embed_key: required(ENV_EMBED_KEY)?,
            embed_model: lookup(ENV_EMBED_MODEL).unwrap_or_else(|| "text-embedding-3-small".into()),
            embed_dim,
        })
    }
}

fn classify_send_error(e: reqwest::Error) -> ProviderError {
    ProviderError::Transport(e.to_string())
}

/// Maps an HTTP status to an error, or `None` when the body should be parsed.
fn classify_status(status: reqwest::StatusCode, body: &str) -> Option<ProviderError> {
    if status.is_success() {
        return None;
    }
    Some(match status.as_u16() {
        401 | 403 => ProviderError::Authentication(format!("HTTP {status}")),
        408 | 429 | 502 | 503 | 504 => ProviderError::Transport(format!("HTTP {status}")),
        _ => ProviderError::malformed(format!("HTTP {status}"), body),
    })
}

async fn post_json(
    client: &reqwest::Client,
    url: &str,
    key: &str,
    body: &Value,
) -> Result<String, ProviderError> {
    let resp = client
        .post(url)
        .bearer_auth(key)
        .json(body)
        .send()
        .await
        .map_err(classify_send_error)?;
    let status = resp.status();
    let text = resp.text().await.map_err(classify_send_error)?;
    match classify_status(status, &text) {
        Some(err) => Err(err),
        None => Ok(text),
    }
}

pub struct LiveChat {
    client: reqwest::Client,
    url: String,
    key: String,
    model: String,
    retry: RetryPolicy,
}

impl LiveChat {
    pub fn new(config: &LiveConfig) -> Self {
        LiveChat {
            client: reqwest::Client::new(),
            url: config.llm_url.clone(),
            key: config.llm_key.clone(),
            model: config.llm_model.clone(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn body(&self, request: &ChatRequest) -> Value {
        let mut messages = Vec::with_capacity(request.turns.len() + 1);
        if !request.system_prompt.is_empty() {
            messages.push(json!({"role": "system", "content": request.system_prompt}));
        }
        for turn in &request.turns {
            messages.push(match turn.role {
                SpeakerRole::User => json!({"role": "user", "content": turn.content}),
                SpeakerRole::System => json!({"role": "system", "content": turn.content}),
                SpeakerRole::Agent => {
                    json!({"role": "assistant", "content": format!("[{}] {}", turn.name, turn.content)})
                }
            });
        }
        json!({
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<UsageBody>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    refusal: Option<String>,
}

#[derive(Deserialize)]
struct UsageBody {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

pub(crate) fn parse_completion(raw: &str) -> Result<ChatReply, ProviderError> {
    let body: CompletionBody =
        serde_json::from_str(raw).map_err(|e| ProviderError::malformed(e.to_string(), raw))?;
    let choice = body
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| ProviderError::malformed("no choices", raw))?;
    let usage = body
        .usage
        .map(|u| Usage {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
        })
        .unwrap_or_default();
    let content = choice.message.content.unwrap_or_default();
    let finish_state = match (choice.finish_reason.as_deref(), &choice.message.refusal) {
        (_, Some(_)) | (Some("content_filter"), _) => FinishState::Refused,
        (Some("length"), _) => FinishState::Truncated,
        _ if content.is_empty() => {
            return Err(ProviderError::malformed("empty completion content", raw))
        }
        _ => FinishState::Complete,
    };
    Ok(ChatReply {
        content,
        finish_state,
        usage,
    })
}

#[async_trait]
impl ChatProvider for LiveChat {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError> {
        let body = self.body(request);
        let raw = self
            .retry
            .run(|_| post_json(&self.client, &self.url, &self.key, &body))
            .await?;
        parse_completion(&raw)
    }
}

pub struct LiveEmbedder {
    client: reqwest::Client,
    url: String,
    key: String,
    model: String,
    dimension: usize,
    retry: RetryPolicy,
}

impl LiveEmbedder {
    pub fn new(config: &LiveConfig) -> Self {
        LiveEmbedder {
            client: reqwest::Client::new(),
            url: config.embed_url.clone(),
            key: config.embed_key.clone(),
            model: config.embed_model.clone(),
            dimension: config.embed_dim,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }
}

pub(crate) fn parse_embedding(raw: &str) -> Result<Vec<f32>, ProviderError> {
    #[derive(Deserialize)]
    struct Body {
        data: Vec<Item>,
    }
    #[derive(Deserialize)]
    struct Item {
        embedding: Vec<f32>,
    }
    let body: Body =
        serde_json::from_str(raw).map_err(|e| ProviderError::malformed(e.to_string(), raw))?;
    body.data
        .into_iter()
        .next()
        .map(|item| item.embedding)
        .ok_or_else(|| ProviderError::malformed("no embedding data", raw))
}

#[async_trait]
impl Embedder for LiveEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    async fn embed_raw(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let body = json!({"model": self.model, "input": text});
        let raw = self
            .retry
            .run(|_| post_json(&self.client, &self.url, &self.key, &body))
            .await?;
        parse_embedding(&raw)
    }
}
