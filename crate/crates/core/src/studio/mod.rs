//! Agent personas: keyword seeds, the two-tier generation chain, and the
//! bundled presets.

mod chain;
mod presets;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use chain::{
    create_persona, generate_description, generate_stage_prompts, tier1_request, tier2_request,
    RESPONSE_DELIMITER,
};
pub use presets::{bundled_presets, load_presets, Preset};

use crate::provider::ProviderError;

/// Output grammar every gating prompt must demand.
pub const VERDICT_GRAMMAR: &str = "VERDICT: RESPOND|DECLINE SCORE: <0.00-1.00> REASON: <text>";

/// Appended to a gating prompt that does not already carry [`VERDICT_GRAMMAR`].
pub const GATING_CLAUSE: &str = "Answer with exactly one line in this format and nothing else:\n\
VERDICT: RESPOND|DECLINE SCORE: <0.00-1.00> REASON: <text>";

/// Appended to a response prompt that does not already carry it verbatim.
pub const NO_CITATION_CLAUSE: &str =
    "Use any reference notes you are given while maintaining natural dialogue flow, \
and never mention, cite, or name the source of that knowledge.";

#[derive(Debug, thiserror::Error)]
pub enum StudioError {
    #[error("invalid persona seed: {0}")]
    InvalidSeed(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("generated description never mentions {name:?}: {excerpt}")]
    MissingName { name: String, excerpt: String },
    #[error("stage prompt reply has no {delimiter:?} line: {excerpt}")]
    Unsplittable {
        delimiter: &'static str,
        excerpt: String,
    },
    #[error("preset fixture {path}: {reason}")]
    Fixture { path: PathBuf, reason: String },
    #[error("persona file {path}: {reason}")]
    Record { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaSeed {
    pub name: String,
    #[serde(default)]
    pub occupation: String,
    #[serde(default)]
    pub personality: String,
    #[serde(default)]
    pub conversation_goals: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avatar_ref: Option<String>,
}

impl PersonaSeed {
    pub fn new(name: impl Into<String>) -> Self {
        PersonaSeed {
            name: name.into(),
            occupation: String::new(),
            personality: String::new(),
            conversation_goals: String::new(),
            avatar_ref: None,
        }
    }

    pub fn occupation(mut self, v: impl Into<String>) -> Self {
        self.occupation = v.into();
        self
    }

    pub fn personality(mut self, v: impl Into<String>) -> Self {
        self.personality = v.into();
        self
    }

    pub fn goals(mut self, v: impl Into<String>) -> Self {
        self.conversation_goals = v.into();
        self
    }

    pub fn validate(&self) -> Result<(), StudioError> {
        if self.name.trim().is_empty() {
            return Err(StudioError::InvalidSeed("name must not be empty".into()));
        }
        if [
            &self.occupation,
            &self.personality,
            &self.conversation_goals,
        ]
        .iter()
        .all(|f| f.trim().is_empty())
        {
            return Err(StudioError::InvalidSeed(
                "at least one of occupation, personality, conversation_goals is required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePrompts {
    pub gating_prompt: String,
    pub response_prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentPersona {
    pub agent_id: String,
    pub seed: PersonaSeed,
    pub description: String,
    pub stage_prompts: StagePrompts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collection_id: Option<String>,
}

impl AgentPersona {
    pub fn name(&self) -> &str {
        &self.seed.name
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, StudioError> {
        let path = dir.join(format!("{}.json", self.agent_id));
        let record = |reason: String| StudioError::Record {
            path: path.clone(),
            reason,
        };
        let body = serde_json::to_string_pretty(self).map_err(|e| record(e.to_string()))?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, body + "\n").map_err(|e| record(e.to_string()))?;
        std::fs::rename(&tmp, &path).map_err(|e| record(e.to_string()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, StudioError> {
        let record = |reason: String| StudioError::Record {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| record(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| record(e.to_string()))
    }
}

/// Lowercase ASCII slug used for agent and collection ids.
pub fn slugify(name: &str) -> String {
    let mut slug = String::with_capacity(name.len());
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            slug.push(c.to_ascii_lowercase());
        } else if !slug.ends_with('-') && !slug.is_empty() {
            slug.push('-');
        }
    }
    let slug = slug.trim_end_matches('-').to_string();
    if slug.is_empty() {
        "agent".into()
    } else {
        slug
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_validation() {
        assert!(PersonaSeed::new("").occupation("x").validate().is_err());
        assert!(PersonaSeed::new("Alice").validate().is_err());
        assert!(PersonaSeed::new("Alice")
            .personality("calm")
            .validate()
            .is_ok());
    }

    #[test]
    fn slugs() {
        assert_eq!(slugify("OSH Specialist"), "osh-specialist");
        assert_eq!(slugify("  Worker  Peer! "), "worker-peer");
        assert_eq!(slugify("Zoë"), "zo");
        assert_eq!(slugify("***"), "agent");
    }

    #[test]
    fn persona_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let persona = AgentPersona {
            agent_id: "alice".into(),
            seed: PersonaSeed {
                avatar_ref: Some("avatars/alice.png".into()),
                ..PersonaSeed::new("Alice")
                    .occupation("safety lead")
                    .goals("keep \"crews\" safe\n\ttabs")
            },
            description: "Alice is …  unicode ✓ and trailing space ".into(),
            stage_prompts: StagePrompts {
                gating_prompt: format!("gate\n{GATING_CLAUSE}"),
                response_prompt: format!("resp\n{NO_CITATION_CLAUSE}"),
            },
            collection_id: Some("alice".into()),
        };
        let path = persona.save(dir.path()).unwrap();
        assert_eq!(AgentPersona::load(&path).unwrap(), persona);
    }

    #[test]
    fn gating_clause_carries_grammar() {
        assert!(GATING_CLAUSE.contains(VERDICT_GRAMMAR));
        assert!(NO_CITATION_CLAUSE.contains("while maintaining natural dialogue flow"));
    }
}
