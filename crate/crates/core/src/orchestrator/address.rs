use std::collections::BTreeSet;

use crate::studio::AgentPersona;

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Agents whose full name appears in `user_text` as a case-insensitive,
/// whole-word match. Multi-word names must appear as consecutive words.
pub fn detect_direct_address(user_text: &str, agents: &[AgentPersona]) -> BTreeSet<String> {
    let text = words(user_text);
    agents
        .iter()
        .filter(|agent| {
            let name = words(agent.name());
            !name.is_empty() && text.windows(name.len()).any(|w| w == name.as_slice())
        })
        .map(|agent| agent.agent_id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::studio::{PersonaSeed, StagePrompts};

    fn agent(id: &str, name: &str) -> AgentPersona {
        AgentPersona {
            agent_id: id.into(),
            seed: PersonaSeed::new(name).occupation("x"),
            description: format!("{name} persona"),
            stage_prompts: StagePrompts {
                gating_prompt: "g".into(),
                response_prompt: "r".into(),
            },
            collection_id: None,
        }
    }

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn hey_alice() {
        let agents = [agent("alice", "Alice"), agent("bob", "Bob")];
        assert_eq!(
            detect_direct_address("Hey Alice, what do you think?", &agents),
            set(&["alice"])
        );
    }

    #[test]
    fn general_question_names_nobody() {
        let agents = [agent("alice", "Alice"), agent("bob", "Bob")];
        assert!(detect_direct_address("What do you think of this idea?", &agents).is_empty());
    }

    #[test]
    fn whole_words_only() {
        let agents = [agent("alice", "Alice")];
        assert!(detect_direct_address("Alicex is wrong", &agents).is_empty());
        assert_eq!(
            detect_direct_address("ALICE's take?", &agents),
            set(&["alice"])
        );
    }

    #[test]
    fn multi_word_names() {
        let agents = [agent("osh", "OSH Specialist"), agent("peer", "Worker Peer")];
        assert_eq!(
            detect_direct_address("osh specialist and worker peer, thoughts?", &agents),
            set(&["osh", "peer"])
        );
        assert!(detect_direct_address("a specialist worker", &agents).is_empty());
    }
}
