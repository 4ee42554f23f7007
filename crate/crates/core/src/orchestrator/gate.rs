use std::sync::LazyLock;

use regex::Regex;

use super::round::history_turns;
use super::{detect_direct_address, Message, RelevanceVerdict, VerdictSource, HISTORY_WINDOW};
use crate::provider::{ChatRequest, Gateway, Turn, GATING_TEMPERATURE};
use crate::studio::AgentPersona;

static VERDICT_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*VERDICT:\s*(RESPOND|DECLINE)\s+SCORE:\s*([0-9]+(?:\.[0-9]+)?|\.[0-9]+)\s+REASON:\s*(.*?)\s*$")
        .unwrap()
});

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedVerdict {
    pub respond: bool,
    pub score: f64,
    pub reason: String,
}

/// Finds the first line of `reply` that follows the verdict grammar.
/// Scores outside `[0, 1]` make the line unparseable.
pub fn parse_verdict(reply: &str) -> Option<ParsedVerdict> {
    reply.lines().find_map(|line| {
        let caps = VERDICT_LINE.captures(line)?;
        let score: f64 = caps[2].parse().ok()?;
        if !(0.0..=1.0).contains(&score) {
            return None;
        }
        Some(ParsedVerdict {
            respond: caps[1].eq_ignore_ascii_case("RESPOND"),
            score,
            reason: caps[3].to_string(),
        })
    })
}

pub fn gating_request(agent: &AgentPersona, history: &[Message], user_text: &str) -> ChatRequest {
    let system = format!(
        "Agent: {}\nStage: gate\n\n{}",
        agent.name(),
        agent.stage_prompts.gating_prompt
    );
    let mut request = ChatRequest::new(system).with_temperature(GATING_TEMPERATURE);
    request.max_tokens = 128;
    request.turns.extend(history_turns(history, HISTORY_WINDOW));
    request.with_turn(Turn::user(super::USER_DISPLAY_NAME, user_text))
}

/// One verdict per agent, in roster order. Provider failures and
/// unparseable replies decline without aborting the round. An agent with
/// an empty gating prompt always responds and costs no call.
pub async fn gate_relevance(
    gateway: &Gateway,
    user_text: &str,
    agents: &[AgentPersona],
    history: &[Message],
) -> Vec<RelevanceVerdict> {
    let addressed = detect_direct_address(user_text, agents);
    if !addressed.is_empty() {
        return agents
            .iter()
            .map(|agent| {
                let hit = addressed.contains(&agent.agent_id);
                RelevanceVerdict {
                    agent_id: agent.agent_id.clone(),
                    respond: hit,
                    score: if hit { 1.0 } else { 0.0 },
                    reason: if hit {
                        "addressed by name"
                    } else {
                        "another agent was addressed"
                    }
                    .into(),
                    source: VerdictSource::DirectAddress,
                }
            })
            .collect();
    }

    let calls = agents.iter().map(|agent| async move {
        if agent.stage_prompts.gating_prompt.is_empty() {
            return RelevanceVerdict {
                agent_id: agent.agent_id.clone(),
                respond: true,
                score: 1.0,
                reason: "ungated".into(),
                source: VerdictSource::ModelGate,
            };
        }
        let request = gating_request(agent, history, user_text);
        let (respond, score, reason) = match gateway.complete(&request).await {
            Ok(reply) => match parse_verdict(&reply.content) {
                Some(v) => (v.respond, v.score, v.reason),
                None => (false, 0.0, "unparseable".to_string()),
            },
            Err(e) => {
                tracing::warn!(agent = %agent.agent_id, error = %e, "gating call failed; declining");
                (false, 0.0, format!("provider error: {e}"))
            }
        };
        RelevanceVerdict {
            agent_id: agent.agent_id.clone(),
            respond,
            score,
            reason,
            source: VerdictSource::ModelGate,
        }
    });
    futures::future::join_all(calls).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{FailKind, MatchRule, ScriptedBehavior};
    use crate::studio::{PersonaSeed, StagePrompts};

    fn agent(id: &str, name: &str) -> AgentPersona {
        AgentPersona {
            agent_id: id.into(),
            seed: PersonaSeed::new(name).occupation("x"),
            description: String::new(),
            stage_prompts: StagePrompts {
                gating_prompt: format!("Decide if {name} should speak."),
                response_prompt: "r".into(),
            },
            collection_id: None,
        }
    }

    fn block_on<F: std::future::Future>(f: F) -> F::Output {
        tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap()
            .block_on(f)
    }

    #[test]
    fn parse_grammar() {
        let v = parse_verdict("VERDICT: RESPOND SCORE: 0.90 REASON: safety question").unwrap();
        assert_eq!(
            v,
            ParsedVerdict {
                respond: true,
                score: 0.90,
                reason: "safety question".into()
            }
        );
        let v = parse_verdict("Sure!\nverdict: decline score: 0.2 reason: not mine\n").unwrap();
        assert!(!v.respond);
        assert_eq!(v.score, 0.2);
        assert!(parse_verdict("VERDICT: RESPOND SCORE: 1.5 REASON: x").is_none());
        assert!(parse_verdict("VERDICT: MAYBE SCORE: 0.5 REASON: x").is_none());
        assert!(parse_verdict("I'd love to help!").is_none());
        assert_eq!(
            parse_verdict("VERDICT: RESPOND SCORE: 1 REASON: ")
                .unwrap()
                .score,
            1.0
        );
    }

    #[test]
    fn direct_address_overrides_gates() {
        // Gates would make Bob respond, but the name wins without any call.
        let gw = Gateway::scripted(
            ScriptedBehavior::new("VERDICT: RESPOND SCORE: 0.99 REASON: x")
                .rule(MatchRule::substring("", "").failing(FailKind::Authentication)),
        )
        .unwrap();
        let agents = [agent("alice", "Alice"), agent("bob", "Bob")];
        let v = block_on(gate_relevance(
            &gw,
            "Hey Alice, what do you think?",
            &agents,
            &[],
        ));
        assert_eq!(v.len(), 2);
        assert!(v[0].respond && v[0].score == 1.0 && v[0].source == VerdictSource::DirectAddress);
        assert!(!v[1].respond);
    }

    #[test]
    fn model_gates_parse_and_fail_closed() {
        let gw = Gateway::scripted(
            ScriptedBehavior::new("garbage")
                .rule(MatchRule::substring(
                    "Agent: Alice\n",
                    "VERDICT: RESPOND SCORE: 0.90 REASON: mine",
                ))
                .rule(MatchRule::substring(
                    "Agent: Bob\n",
                    "VERDICT: DECLINE SCORE: 0.20 REASON: not mine",
                ))
                .rule(MatchRule::substring("Agent: Cara\n", "").failing(FailKind::Transport)),
        )
        .unwrap();
        let agents = [
            agent("alice", "Alice"),
            agent("bob", "Bob"),
            agent("cara", "Cara"),
            agent("dan", "Dan"),
        ];
        let v = block_on(gate_relevance(
            &gw,
            "What do you think of this idea?",
            &agents,
            &[],
        ));
        assert_eq!((v[0].respond, v[0].score), (true, 0.90));
        assert_eq!((v[1].respond, v[1].score), (false, 0.20));
        assert_eq!((v[2].respond, v[2].score), (false, 0.0));
        assert!(v[2].reason.starts_with("provider error"));
        assert_eq!(
            (v[3].respond, v[3].score, v[3].reason.as_str()),
            (false, 0.0, "unparseable")
        );
        assert!(v.iter().all(|x| x.source == VerdictSource::ModelGate));
    }
}
