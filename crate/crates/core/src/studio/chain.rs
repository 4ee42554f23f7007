//! Two-tier persona generation.
//!
//! Tier 1 expands the keyword seed into a long-form description. Tier 2
//! turns that description (never the seed alone) into the gating and
//! response prompts in a single call whose reply is split on
//! [`RESPONSE_DELIMITER`]. The template wording below is original to this
//! project.

use super::{
    AgentPersona, PersonaSeed, StagePrompts, StudioError, GATING_CLAUSE, NO_CITATION_CLAUSE,
    VERDICT_GRAMMAR,
};
use crate::provider::{ChatRequest, Gateway, Turn, GATING_TEMPERATURE, RESPONSE_TEMPERATURE};

pub const RESPONSE_DELIMITER: &str = "=====RESPONSE=====";

const TIER1_SYSTEM: &str =
    "You write character briefs for conversational agents that take part in a group chat \
supporting construction workers. Keep every brief consistent in structure and tone.";

const TIER2_SYSTEM: &str =
    "You turn character briefs into operating prompts for conversational agents. \
Follow the requested layout exactly.";

fn or_unspecified(v: &str) -> &str {
    if v.trim().is_empty() {
        "(unspecified)"
    } else {
        v.trim()
    }
}

pub fn tier1_request(seed: &PersonaSeed) -> ChatRequest {
    let body = format!(
        "Write a persona brief from these keywords.\n\
         Name: {name}\n\
         Occupation: {occupation}\n\
         Personality: {personality}\n\
         Conversation goals: {goals}\n\n\
         Write two short paragraphs in the third person that begin with the name {name}. \
         Cover the persona's expertise, speaking style, and how they help a worker in a group conversation \
         alongside other specialists.",
        name = seed.name.trim(),
        occupation = or_unspecified(&seed.occupation),
        personality = or_unspecified(&seed.personality),
        goals = or_unspecified(&seed.conversation_goals),
    );
    ChatRequest::new(TIER1_SYSTEM)
        .with_turn(Turn::user("studio", body))
        .with_temperature(RESPONSE_TEMPERATURE)
}

pub fn tier2_request(description: &str, seed: &PersonaSeed) -> ChatRequest {
    let name = seed.name.trim();
    let body = format!(
        "Persona brief for {name}:\n\n{description}\n\n\
         Write two prompts for {name}, separated by a line containing only {RESPONSE_DELIMITER}\n\
         1. A gating prompt. It tells {name} to read the latest group-chat message and decide whether their \
         expertise is relevant enough to reply, and to answer in the format {VERDICT_GRAMMAR}\n\
         2. A response prompt. It tells {name} to reply in character, briefly and warmly, building on what \
         other participants said. {NO_CITATION_CLAUSE}"
    );
    ChatRequest::new(TIER2_SYSTEM)
        .with_turn(Turn::user("studio", body))
        .with_temperature(GATING_TEMPERATURE)
}

/// Tier 1. A reply that does not mention the agent's name is rejected and
/// retried once.
pub async fn generate_description(
    gateway: &Gateway,
    seed: &PersonaSeed,
) -> Result<String, StudioError> {
    seed.validate()?;
    let request = tier1_request(seed);
    let name = seed.name.trim().to_lowercase();
    let mut last = String::new();
    for _ in 0..2 {
        let reply = gateway.complete(&request).await?;
        let text = reply.content.trim().to_string();
        if text.to_lowercase().contains(&name) {
            return Ok(text);
        }
        last = text;
    }
    Err(StudioError::MissingName {
        name: seed.name.clone(),
        excerpt: last.chars().take(200).collect(),
    })
}

fn ensure_clause(prompt: &str, marker: &str, clause: &str) -> String {
    let prompt = prompt.trim();
    if prompt.contains(marker) {
        prompt.to_string()
    } else if prompt.is_empty() {
        clause.to_string()
    } else {
        format!("{prompt}\n\n{clause}")
    }
}

/// Splits a tier-2 reply and guarantees both wire clauses are present.
pub(crate) fn split_stage_reply(reply: &str) -> Result<StagePrompts, StudioError> {
    let mut gate = Vec::new();
    let mut lines = reply.lines();
    let mut found = false;
    for line in lines.by_ref() {
        if line.trim() == RESPONSE_DELIMITER {
            found = true;
            break;
        }
        gate.push(line);
    }
    if !found {
        return Err(StudioError::Unsplittable {
            delimiter: RESPONSE_DELIMITER,
            excerpt: reply.chars().take(200).collect(),
        });
    }
    let response: Vec<&str> = lines.collect();
    Ok(StagePrompts {
        gating_prompt: ensure_clause(&gate.join("\n"), VERDICT_GRAMMAR, GATING_CLAUSE),
        response_prompt: ensure_clause(
            &response.join("\n"),
            NO_CITATION_CLAUSE,
            NO_CITATION_CLAUSE,
        ),
    })
}

/// Tier 2.
pub async fn generate_stage_prompts(
    gateway: &Gateway,
    description: &str,
    seed: &PersonaSeed,
) -> Result<StagePrompts, StudioError> {
    if description.trim().is_empty() {
        return Err(StudioError::InvalidSeed(
            "description must not be empty".into(),
        ));
    }
    let reply = gateway.complete(&tier2_request(description, seed)).await?;
    split_stage_reply(&reply.content)
}

/// Runs the full chain for one agent. Tier 2 starts only after tier 1 has
/// produced the description it consumes.
pub async fn create_persona(
    gateway: &Gateway,
    agent_id: impl Into<String>,
    seed: PersonaSeed,
) -> Result<AgentPersona, StudioError> {
    let description = generate_description(gateway, &seed).await?;
    let stage_prompts = generate_stage_prompts(gateway, &description, &seed).await?;
    Ok(AgentPersona {
        agent_id: agent_id.into(),
        seed,
        description,
        stage_prompts,
        collection_id: None,
    })
}
