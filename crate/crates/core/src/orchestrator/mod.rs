//! Turn-taking engine: who responds to a user message, in what order, and
//! with which context.
//!
//! A round runs in three steps:
//!
//! 1. [`gate_relevance`]: agents named in the message respond exclusively;
//!    otherwise each agent's gating prompt yields a [`RelevanceVerdict`].
//! 2. [`build_plan`]: responders are the agents that said yes (or the best
//!    scoring one if nobody did), shuffled with a seeded Fisher–Yates.
//! 3. [`execute_round`]: each responder gets the shared history, the user
//!    message, in sequential mode the earlier replies of this round, and
//!    the top-k chunks from its own collection.

mod address;
mod gate;
mod plan;
mod round;

use serde::{Deserialize, Serialize};

pub use address::detect_direct_address;
pub use gate::{gate_relevance, gating_request, parse_verdict, ParsedVerdict};
pub use plan::{build_plan, seeded_shuffle, AUTO_PARALLEL_THRESHOLD};
pub use round::{execute_round, response_request, ReplyOutcome, RoundSettings};

/// Author value used for messages written by the human participant.
pub const USER_AUTHOR: &str = "user";
/// Display name of the human participant in prompts and transcripts.
pub const USER_DISPLAY_NAME: &str = "User";
pub const HISTORY_WINDOW: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("no active agents to orchestrate")]
    EmptyRoster,
    #[error("plan names agent {0:?} which is not in the roster")]
    UnknownAgent(String),
    #[error("every responder failed in round {}", .0.round_id)]
    AllFailed(Box<ConversationRound>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictSource {
    DirectAddress,
    ModelGate,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceVerdict {
    pub agent_id: String,
    pub respond: bool,
    pub score: f64,
    pub reason: String,
    pub source: VerdictSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModePolicy {
    Sequential,
    Parallel,
    #[default]
    Auto,
}

impl std::str::FromStr for ModePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sequential" => Ok(ModePolicy::Sequential),
            "parallel" => Ok(ModePolicy::Parallel),
            "auto" => Ok(ModePolicy::Auto),
            other => Err(format!(
                "unknown mode {other:?} (expected sequential, parallel or auto)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestrationPlan {
    pub round_id: String,
    pub responders: Vec<String>,
    pub mode: ExecutionMode,
    pub rng_seed: u64,
    /// One verdict per active agent; a fallback pick is recorded here with
    /// `source = fallback`.
    pub verdicts: Vec<RelevanceVerdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub message_id: String,
    pub conversation_id: String,
    /// [`USER_AUTHOR`] or an agent id.
    pub author: String,
    pub author_name: String,
    pub text: String,
    pub timestamp: u64,
    pub round_id: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub failed: bool,
}

impl Message {
    pub fn is_user(&self) -> bool {
        self.author == USER_AUTHOR
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplyContext {
    pub message_id: String,
    pub agent_id: String,
    pub injected_chunk_ids: Vec<String>,
    pub visible_reply_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationRound {
    pub round_id: String,
    pub conversation_id: String,
    pub user_message: Message,
    pub plan: OrchestrationPlan,
    pub replies: Vec<Message>,
    pub per_reply_context: Vec<ReplyContext>,
}

impl ConversationRound {
    pub fn all_failed(&self) -> bool {
        self.replies.iter().all(|m| m.failed)
    }
}

/// Message id of the `index`-th message in a round (0 = user message).
pub fn message_id(round_id: &str, index: usize) -> String {
    format!("{round_id}-m{index}")
}
