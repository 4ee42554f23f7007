//! Headless scripted conversations.
//!
//! A replay file names a provider script, a seed, the agents to create and
//! the user messages to send:
//!
//! ```toml
//! seed = 42
//! mode = "auto"
//! provider_script = "room.script.toml"   # relative to this file
//!
//! [[agents]]
//! preset = "OSH Specialist"
//!
//! [[agents]]
//! name = "Alice"
//! occupation = "site supervisor"
//! knowledge = "alice-notes.txt"          # optional, relative to this file
//!
//! [[messages]]
//! text = "Hey Alice, what do you think?"
//! mode = "sequential"                    # optional per-message override
//! ```
//!
//! Runs use a logical clock and seeds derived from `seed`, so the same
//! file always produces the same transcript.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::clock::LogicalClock;
use crate::engine::{Engine, EngineConfig, EngineError, NewConversation, SeedSource};
use crate::orchestrator::ModePolicy;
use crate::provider::{Gateway, ScriptedBehavior};
use crate::scenario::ScenarioTag;
use crate::studio::{bundled_presets, PersonaSeed, Preset};

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("replay file {path}: {reason}")]
    File { path: PathBuf, reason: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayAgent {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub occupation: String,
    #[serde(default)]
    pub personality: String,
    #[serde(default)]
    pub conversation_goals: String,
    #[serde(default)]
    pub knowledge: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayMessage {
    pub text: String,
    #[serde(default)]
    pub mode: Option<ModePolicy>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayFile {
    pub seed: u64,
    #[serde(default)]
    pub mode: ModePolicy,
    pub provider_script: PathBuf,
    #[serde(default)]
    pub baseline: bool,
    #[serde(default)]
    pub scenario: Option<ScenarioTag>,
    #[serde(default)]
    pub agents: Vec<ReplayAgent>,
    pub messages: Vec<ReplayMessage>,
}

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub conversation_id: String,
    pub text: String,
    pub structured: String,
}

impl ReplayFile {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ReplayError> {
        let file_err = |reason: String| ReplayError::File {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
        let replay: ReplayFile = toml::from_str(&text).map_err(|e| file_err(e.to_string()))?;
        if replay.messages.is_empty() {
            return Err(file_err("no messages to replay".into()));
        }
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok((replay, base))
    }
}

fn resolve_agent(agent: &ReplayAgent, base: &Path, presets: &[Preset]) -> Result<Preset, String> {
    match (&agent.preset, &agent.name) {
        (Some(name), None) => presets
            .iter()
            .find(|p| p.seed.name == *name)
            .cloned()
            .ok_or_else(|| format!("unknown preset {name:?}")),
        (None, Some(name)) => {
            let knowledge_text = match &agent.knowledge {
                Some(rel) => std::fs::read_to_string(base.join(rel))
                    .map_err(|e| format!("{}: {e}", rel.display()))?,
                None => String::new(),
            };
            let knowledge_doc_id = agent
                .knowledge
                .as_ref()
                .and_then(|p| p.file_stem())
                .and_then(|s| s.to_str())
                .unwrap_or("notes")
                .to_string();
            Ok(Preset {
                seed: PersonaSeed {
                    name: name.clone(),
                    occupation: agent.occupation.clone(),
                    personality: agent.personality.clone(),
                    conversation_goals: agent.conversation_goals.clone(),
                    avatar_ref: None,
                },
                knowledge_doc_id,
                knowledge_text,
            })
        }
        _ => Err("each agent needs exactly one of `preset` or `name`".into()),
    }
}

/// Runs `path` in a fresh data directory under `data_dir`.
pub async fn run_replay(path: &Path, data_dir: &Path) -> Result<ReplayOutput, ReplayError> {
    let (replay, base) = ReplayFile::load(path)?;
    let file_err = |reason: String| ReplayError::File {
        path: path.to_path_buf(),
        reason,
    };
    let behavior = ScriptedBehavior::load(&base.join(&replay.provider_script))
        .map_err(|e| file_err(e.to_string()))?;
    let gateway = Gateway::scripted(behavior).map_err(|e| file_err(e.to_string()))?;
    let mut config = EngineConfig::new(data_dir, gateway, Arc::new(LogicalClock::default()));
    config.seeds = SeedSource::Fixed(replay.seed);
    let engine = Engine::open(config)?;

    let presets = bundled_presets();
    let mut roster = Vec::new();
    for agent in &replay.agents {
        let preset = resolve_agent(agent, &base, &presets).map_err(file_err)?;
        let persona = engine.create_agent(preset.seed.clone()).await?;
        if !preset.knowledge_text.trim().is_empty() {
            engine
                .upload_knowledge(
                    &persona.agent_id,
                    &preset.knowledge_doc_id,
                    &preset.knowledge_text,
                )
                .await?;
        }
        roster.push(persona.agent_id);
    }
    let record = engine.create_conversation(NewConversation {
        roster: if replay.baseline { Vec::new() } else { roster },
        scenario_tag: replay.scenario,
        baseline: replay.baseline,
    })?;
    let id = record.conversation_id;
    for message in &replay.messages {
        let policy = message.mode.unwrap_or(replay.mode);
        match engine
            .post_message(&id, &message.text, policy, None, &mut |_| {})
            .await
        {
            Ok(_) | Err(EngineError::RoundFailed(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(ReplayOutput {
        text: engine.export_text(&id)?,
        structured: engine.export_structured(&id)?,
        conversation_id: id,
    })
}
