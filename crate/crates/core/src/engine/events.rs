use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::orchestrator::{
    ConversationRound, ExecutionMode, Message, RelevanceVerdict, ReplyOutcome,
};
use crate::studio::AgentPersona;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundEventKind {
    RoundStarted,
    AgentSelected,
    AgentReply,
    AgentFailed,
    RoundComplete,
}

impl RoundEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RoundEventKind::RoundStarted => "round_started",
            RoundEventKind::AgentSelected => "agent_selected",
            RoundEventKind::AgentReply => "agent_reply",
            RoundEventKind::AgentFailed => "agent_failed",
            RoundEventKind::RoundComplete => "round_complete",
        }
    }
}

/// One step of a round as streamed to clients.
///
/// Payloads by kind:
/// - `round_started`: `{ user_message }`
/// - `agent_selected`: `{ position, agent_name, mode, verdict }`
/// - `agent_reply` / `agent_failed`: `{ position, message, context }`
/// - `round_complete`: `{ failed, reply_count, seq, error }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundEvent {
    pub event: RoundEventKind,
    pub round_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_id: Option<String>,
    pub payload: Value,
}

impl RoundEvent {
    pub(super) fn round_started(user_message: &Message) -> Self {
        RoundEvent {
            event: RoundEventKind::RoundStarted,
            round_id: user_message.round_id.clone(),
            agent_id: None,
            payload: json!({ "user_message": user_message }),
        }
    }

    pub(super) fn agent_selected(
        round_id: &str,
        position: usize,
        agent: &AgentPersona,
        verdict: &RelevanceVerdict,
        mode: ExecutionMode,
    ) -> Self {
        RoundEvent {
            event: RoundEventKind::AgentSelected,
            round_id: round_id.to_string(),
            agent_id: Some(agent.agent_id.clone()),
            payload: json!({
                "position": position,
                "agent_name": agent.name(),
                "mode": mode,
                "verdict": verdict,
            }),
        }
    }

    pub(super) fn reply(outcome: &ReplyOutcome<'_>) -> Self {
        RoundEvent {
            event: if outcome.message.failed {
                RoundEventKind::AgentFailed
            } else {
                RoundEventKind::AgentReply
            },
            round_id: outcome.message.round_id.clone(),
            agent_id: Some(outcome.message.author.clone()),
            payload: json!({
                "position": outcome.position,
                "message": outcome.message,
                "context": outcome.context,
            }),
        }
    }

    pub(super) fn complete(
        round: &ConversationRound,
        seq: Option<u64>,
        error: Option<String>,
    ) -> Self {
        RoundEvent {
            event: RoundEventKind::RoundComplete,
            round_id: round.round_id.clone(),
            agent_id: None,
            payload: json!({
                "failed": error.is_some(),
                "reply_count": round.replies.iter().filter(|m| !m.failed).count(),
                "seq": seq,
                "error": error,
            }),
        }
    }

    /// The committed message carried by a reply or failure event.
    pub fn message(&self) -> Option<Message> {
        match self.event {
            RoundEventKind::AgentReply | RoundEventKind::AgentFailed => {
                serde_json::from_value(self.payload.get("message")?.clone()).ok()
            }
            _ => None,
        }
    }
}
