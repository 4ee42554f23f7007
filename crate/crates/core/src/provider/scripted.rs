//! Deterministic provider driven by an ordered rule list.
//!
//! Script files are TOML:
//!
//! ```toml
//! default_reply = "VERDICT: DECLINE SCORE: 0.10 REASON: not my area"
//! embedding_dim = 16
//!
//! [[rule]]
//! pattern = "Hey Alice"
//! reply = "VERDICT: RESPOND SCORE: 0.95 REASON: addressed"
//! delay_ms = 0
//!
//! [[rule]]
//! pattern = '(?s)Name: (\w+).*'
//! regex = true
//! reply = "$1 is a veteran safety specialist."
//! ```
//!
//! Rules are tried in order against [`ChatRequest::render`]; the first match
//! wins. Regex rules may reference capture groups in `reply` (`$1`,
//! `${name}`; write `$$` for a literal dollar sign).

use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatReply, ChatRequest, FinishState, ProviderError, Usage};

fn default_dim() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailKind {
    Transport,
    Authentication,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRule {
    pub pattern: String,
    #[serde(default)]
    pub regex: bool,
    #[serde(default)]
    pub reply: String,
    #[serde(default)]
    pub delay_ms: u64,
    /// When set the rule produces this error instead of a reply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail: Option<FailKind>,
}

impl MatchRule {
    pub fn substring(pattern: impl Into<String>, reply: impl Into<String>) -> Self {
        MatchRule {
            pattern: pattern.into(),
            regex: false,
            reply: reply.into(),
            delay_ms: 0,
            fail: None,
        }
    }

    pub fn regex(pattern: impl Into<String>, reply: impl Into<String>) -> Self {
        MatchRule {
            regex: true,
            ..MatchRule::substring(pattern, reply)
        }
    }

    pub fn delayed(mut self, delay_ms: u64) -> Self {
        self.delay_ms = delay_ms;
        self
    }

    pub fn failing(mut self, kind: FailKind) -> Self {
        self.fail = Some(kind);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedBehavior {
    #[serde(default, rename = "rule")]
    pub rules: Vec<MatchRule>,
    pub default_reply: String,
    /// Dimension of the token-hash embedder paired with this script.
    #[serde(default = "default_dim")]
    pub embedding_dim: usize,
}

impl ScriptedBehavior {
    pub fn new(default_reply: impl Into<String>) -> Self {
        ScriptedBehavior {
            rules: Vec::new(),
            default_reply: default_reply.into(),
            embedding_dim: default_dim(),
        }
    }

    pub fn rule(mut self, rule: MatchRule) -> Self {
        self.rules.push(rule);
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, ProviderError> {
        toml::from_str(text).map_err(|e| ProviderError::Script(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Script(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

#[derive(Debug)]
enum Matcher {
    Substring(String),
    Regex(Regex),
}

#[derive(Debug)]
struct CompiledRule {
    matcher: Matcher,
    reply: String,
    delay: Duration,
    fail: Option<FailKind>,
}

#[derive(Debug)]
pub struct ScriptedProvider {
    rules: Vec<CompiledRule>,
    default_reply: String,
}

impl ScriptedProvider {
    pub fn new(behavior: ScriptedBehavior) -> Result<Self, ProviderError> {
        let rules = behavior
            .rules
            .into_iter()
            .map(|rule| {
                let matcher = if rule.regex {
                    Regex::new(&rule.pattern).map(Matcher::Regex).map_err(|e| {
                        ProviderError::Script(format!("rule {:?}: {e}", rule.pattern))
                    })?
                } else {
                    Matcher::Substring(rule.pattern)
                };
                Ok(CompiledRule {
                    matcher,
                    reply: rule.reply,
                    delay: Duration::from_millis(rule.delay_ms),
                    fail: rule.fail,
                })
            })
            .collect::<Result<Vec<_>, ProviderError>>()?;
        Ok(ScriptedProvider {
            rules,
            default_reply: behavior.default_reply,
        })
    }

    /// Resolves the reply text and delay without sleeping.
    fn resolve(&self, rendered: &str) -> (Result<String, ProviderError>, Duration) {
        for rule in &self.rules {
            let reply = match &rule.matcher {
                Matcher::Substring(needle) => rendered
                    .contains(needle.as_str())
                    .then(|| rule.reply.clone()),
                Matcher::Regex(re) => re.captures(rendered).map(|caps| {
                    let mut out = String::new();
                    caps.expand(&rule.reply, &mut out);
                    out
                }),
            };
            if let Some(reply) = reply {
                let result = match &rule.fail {
                    None => Ok(reply),
                    Some(FailKind::Transport) => Err(ProviderError::Transport(
                        "scripted transport failure".into(),
                    )),
                    Some(FailKind::Authentication) => Err(ProviderError::Authentication(
                        "scripted authentication failure".into(),
                    )),
                    Some(FailKind::Malformed) => Err(ProviderError::malformed(
                        "scripted malformed response",
                        &reply,
                    )),
                };
                return (result, rule.delay);
            }
        }
        (Ok(self.default_reply.clone()), Duration::ZERO)
    }
}

#[async_trait]
impl ChatProvider for ScriptedProvider {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError> {
        let rendered = request.render();
        let (result, delay) = self.resolve(&rendered);
        if !delay.is_zero() {
            tokio::time::sleep(delay).await;
        }
        let content = result?;
        let finish_state = if content.is_empty() {
            FinishState::Refused
        } else {
            FinishState::Complete
        };
        Ok(ChatReply {
            usage: Usage {
                prompt_tokens: rendered.split_whitespace().count() as u64,
                completion_tokens: content.split_whitespace().count() as u64,
            },
            content,
            finish_state,
        })
    }
}
