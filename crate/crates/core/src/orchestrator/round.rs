use futures::stream::{FuturesOrdered, StreamExt};

use super::{
    message_id, ConversationRound, ExecutionMode, Message, OrchestrationPlan, OrchestratorError,
    ReplyContext, HISTORY_WINDOW, USER_DISPLAY_NAME,
};
use crate::clock::Clock;
use crate::knowledge::{EmbeddingVector, KnowledgeBase, Retrieved, DEFAULT_TOP_K};
use crate::provider::{ChatRequest, Gateway, ProviderError, Turn};
use crate::studio::AgentPersona;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundSettings {
    pub top_k: usize,
    pub history_window: usize,
}

impl Default for RoundSettings {
    fn default() -> Self {
        RoundSettings {
            top_k: DEFAULT_TOP_K,
            history_window: HISTORY_WINDOW,
        }
    }
}

/// A reply as it is committed, handed to the round observer in plan order.
#[derive(Debug, Clone, Copy)]
pub struct ReplyOutcome<'a> {
    pub position: usize,
    pub message: &'a Message,
    pub context: &'a ReplyContext,
}

/// Converts the most recent `window` messages into prompt turns.
/// Failed placeholders carry no text and are skipped.
pub(crate) fn history_turns(history: &[Message], window: usize) -> Vec<Turn> {
    let start = history.len().saturating_sub(window);
    history[start..]
        .iter()
        .filter(|m| !m.failed)
        .map(|m| {
            if m.is_user() {
                Turn::user(USER_DISPLAY_NAME, &m.text)
            } else {
                Turn::agent(&m.author_name, &m.text)
            }
        })
        .collect()
}

/// Request for one responder. `earlier_replies` is empty in parallel mode.
/// A persona with no response prompt gets an empty system prompt and no
/// reference notes.
pub fn response_request(
    agent: &AgentPersona,
    history: &[Message],
    user_message: &Message,
    earlier_replies: &[Message],
    chunks: &[Retrieved],
    history_window: usize,
) -> ChatRequest {
    let system = if agent.stage_prompts.response_prompt.is_empty() {
        String::new()
    } else {
        let mut system = format!(
            "Agent: {}\nStage: respond\n\n{}",
            agent.name(),
            agent.stage_prompts.response_prompt
        );
        if !chunks.is_empty() {
            system.push_str("\n\nReference notes:");
            for chunk in chunks {
                system.push_str("\n---\n");
                system.push_str(&chunk.text);
            }
        }
        system
    };
    let mut request = ChatRequest::new(system);
    request.turns.extend(history_turns(history, history_window));
    request
        .turns
        .push(Turn::user(USER_DISPLAY_NAME, &user_message.text));
    for reply in earlier_replies.iter().filter(|m| !m.failed) {
        request
            .turns
            .push(Turn::agent(&reply.author_name, &reply.text));
    }
    request
}

fn uses_retrieval(agent: &AgentPersona) -> bool {
    agent.collection_id.is_some() && !agent.stage_prompts.response_prompt.is_empty()
}

fn retrieve(
    knowledge: &KnowledgeBase,
    agent: &AgentPersona,
    query: Option<&EmbeddingVector>,
    top_k: usize,
) -> Vec<Retrieved> {
    let (Some(collection), Some(query)) = (agent.collection_id.as_deref(), query) else {
        return Vec::new();
    };
    if !uses_retrieval(agent) || top_k == 0 {
        return Vec::new();
    }
    match knowledge.search(collection, query, top_k) {
        Ok(hits) => hits,
        Err(e) => {
            tracing::warn!(agent = %agent.agent_id, error = %e, "retrieval failed; replying without notes");
            Vec::new()
        }
    }
}

fn reply_message(
    agent: &AgentPersona,
    user_message: &Message,
    position: usize,
    outcome: Result<String, ProviderError>,
    clock: &dyn Clock,
) -> Message {
    let (text, failed) = match outcome {
        Ok(text) => (text, false),
        Err(e) => {
            tracing::warn!(agent = %agent.agent_id, error = %e, "reply failed");
            (String::new(), true)
        }
    };
    Message {
        message_id: message_id(&user_message.round_id, position + 1),
        conversation_id: user_message.conversation_id.clone(),
        author: agent.agent_id.clone(),
        author_name: agent.name().to_string(),
        text,
        timestamp: clock.now_ms(),
        round_id: user_message.round_id.clone(),
        failed,
    }
}

/// Runs every responder in `plan` and assembles the round record.
///
/// `history` is the conversation before `user_message`. `observer` sees
/// each reply as it is committed, always in plan order.
#[allow(clippy::too_many_arguments)]
pub async fn execute_round(
    gateway: &Gateway,
    knowledge: &KnowledgeBase,
    clock: &dyn Clock,
    roster: &[AgentPersona],
    history: &[Message],
    user_message: Message,
    plan: OrchestrationPlan,
    settings: RoundSettings,
    observer: &mut (dyn FnMut(ReplyOutcome<'_>) + Send),
) -> Result<ConversationRound, OrchestratorError> {
    let agents: Vec<&AgentPersona> = plan
        .responders
        .iter()
        .map(|id| {
            roster
                .iter()
                .find(|a| &a.agent_id == id)
                .ok_or_else(|| OrchestratorError::UnknownAgent(id.clone()))
        })
        .collect::<Result<_, _>>()?;

    let query = if agents.iter().any(|a| uses_retrieval(a)) && settings.top_k > 0 {
        match gateway.embed(&user_message.text).await {
            Ok(v) => Some(v),
            Err(e) => {
                tracing::warn!(error = %e, "could not embed user message; skipping retrieval");
                None
            }
        }
    } else {
        None
    };
    let notes: Vec<Vec<Retrieved>> = agents
        .iter()
        .map(|a| retrieve(knowledge, a, query.as_ref(), settings.top_k))
        .collect();

    let mut replies: Vec<Message> = Vec::with_capacity(agents.len());
    let mut contexts: Vec<ReplyContext> = Vec::with_capacity(agents.len());
    let context_for = |position: usize, agent: &AgentPersona, visible: Vec<String>| ReplyContext {
        message_id: message_id(&user_message.round_id, position + 1),
        agent_id: agent.agent_id.clone(),
        injected_chunk_ids: notes[position].iter().map(|c| c.chunk_id.clone()).collect(),
        visible_reply_ids: visible,
    };

    match plan.mode {
        ExecutionMode::Sequential => {
            for (position, agent) in agents.iter().enumerate() {
                let request = response_request(
                    agent,
                    history,
                    &user_message,
                    &replies,
                    &notes[position],
                    settings.history_window,
                );
                let outcome = gateway.complete(&request).await.map(|r| r.content);
                let message = reply_message(agent, &user_message, position, outcome, clock);
                let visible = replies.iter().map(|m| m.message_id.clone()).collect();
                contexts.push(context_for(position, agent, visible));
                replies.push(message);
                observer(ReplyOutcome {
                    position,
                    message: &replies[position],
                    context: &contexts[position],
                });
            }
        }
        ExecutionMode::Parallel => {
            let mut pending: FuturesOrdered<_> = agents
                .iter()
                .enumerate()
                .map(|(position, agent)| {
                    let request = response_request(
                        agent,
                        history,
                        &user_message,
                        &[],
                        &notes[position],
                        settings.history_window,
                    );
                    async move { gateway.complete(&request).await.map(|r| r.content) }
                })
                .collect();
            let mut position = 0;
            while let Some(outcome) = pending.next().await {
                let agent = agents[position];
                replies.push(reply_message(
                    agent,
                    &user_message,
                    position,
                    outcome,
                    clock,
                ));
                contexts.push(context_for(position, agent, Vec::new()));
                observer(ReplyOutcome {
                    position,
                    message: &replies[position],
                    context: &contexts[position],
                });
                position += 1;
            }
        }
    }

    let round = ConversationRound {
        round_id: user_message.round_id.clone(),
        conversation_id: user_message.conversation_id.clone(),
        user_message,
        plan,
        replies,
        per_reply_context: contexts,
    };
    if round.all_failed() {
        return Err(OrchestratorError::AllFailed(Box::new(round)));
    }
    Ok(round)
}
