//! Application facade over agents, knowledge, conversations and rounds.
//!
//! Data directory layout:
//!
//! ```text
//! <data>/agents/<agent_id>.json
//! <data>/agents/retired.json
//! <data>/knowledge/<collection_id>.jsonl
//! <data>/conversations/index.json
//! <data>/conversations/<conversation_id>.log
//! ```

mod events;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

pub use events::{RoundEvent, RoundEventKind};

use crate::clock::Clock;
use crate::conversation::{Conversation, ConversationRecord, ConversationStore, StoreError};
use crate::knowledge::{ChunkParams, KnowledgeBase, KnowledgeError};
use crate::orchestrator::{
    build_plan, execute_round, gate_relevance, ConversationRound, Message, ModePolicy,
    OrchestratorError, RoundSettings, USER_AUTHOR, USER_DISPLAY_NAME,
};
use crate::provider::Gateway;
use crate::scenario::ScenarioTag;
use crate::studio::{
    create_persona, slugify, AgentPersona, PersonaSeed, Preset, StagePrompts, StudioError,
};

/// Id of the built-in personaless agent used by baseline conversations.
pub const BASELINE_AGENT_ID: &str = "assistant";
pub const BASELINE_AGENT_NAME: &str = "Assistant";

const RETIRED_FILE: &str = "retired.json";

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("{kind} {id:?} not found")]
    NotFound { kind: &'static str, id: String },
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
    #[error("conversation {0:?} has no active agents")]
    EmptyRoster(String),
    #[error("every agent failed to reply in round {0}")]
    RoundFailed(String),
    #[error(transparent)]
    Studio(StudioError),
    #[error(transparent)]
    Knowledge(KnowledgeError),
    #[error(transparent)]
    Store(StoreError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl EngineError {
    /// Stable machine-readable code for API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::NotFound { .. } => "not_found",
            EngineError::Conflict(_) => "conflict",
            EngineError::Invalid(_) => "invalid_request",
            EngineError::EmptyRoster(_) => "empty_roster",
            EngineError::RoundFailed(_) => "round_failed",
            EngineError::Studio(StudioError::InvalidSeed(_)) => "invalid_request",
            EngineError::Studio(StudioError::Provider(_)) => "provider_error",
            EngineError::Studio(
                StudioError::MissingName { .. } | StudioError::Unsplittable { .. },
            ) => "generation_failed",
            EngineError::Knowledge(KnowledgeError::DuplicateDocument(_)) => "conflict",
            EngineError::Knowledge(KnowledgeError::InvalidChunking { .. }) => "invalid_request",
            EngineError::Knowledge(KnowledgeError::Embedding(_)) => "provider_error",
            _ => "internal",
        }
    }
}

impl From<StudioError> for EngineError {
    fn from(e: StudioError) -> Self {
        EngineError::Studio(e)
    }
}

impl From<KnowledgeError> for EngineError {
    fn from(e: KnowledgeError) -> Self {
        EngineError::Knowledge(e)
    }
}

impl From<StoreError> for EngineError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownConversation(id) => EngineError::NotFound {
                kind: "conversation",
                id,
            },
            other => EngineError::Store(other),
        }
    }
}

/// Where per-round shuffle seeds come from when a message carries none.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSource {
    /// Derived from this base, the conversation id and the round number.
    Fixed(u64),
    Random,
}

pub struct EngineConfig {
    pub data_dir: PathBuf,
    pub gateway: Gateway,
    pub clock: Arc<dyn Clock>,
    pub seeds: SeedSource,
    pub round: RoundSettings,
    pub chunking: ChunkParams,
}

impl EngineConfig {
    pub fn new(data_dir: impl Into<PathBuf>, gateway: Gateway, clock: Arc<dyn Clock>) -> Self {
        EngineConfig {
            data_dir: data_dir.into(),
            gateway,
            clock,
            seeds: SeedSource::Random,
            round: RoundSettings::default(),
            chunking: ChunkParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewConversation {
    pub roster: Vec<String>,
    pub scenario_tag: Option<ScenarioTag>,
    pub baseline: bool,
}

pub struct Engine {
    data_dir: PathBuf,
    gateway: Gateway,
    clock: Arc<dyn Clock>,
    seeds: SeedSource,
    round: RoundSettings,
    chunking: ChunkParams,
    knowledge: KnowledgeBase,
    store: ConversationStore,
    agents: RwLock<BTreeMap<String, AgentPersona>>,
    retired: Mutex<BTreeSet<String>>,
    /// Serializes agent creation so name checks and id allocation agree.
    registry: tokio::sync::Mutex<()>,
    round_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("data_dir", &self.data_dir)
            .finish_non_exhaustive()
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-round seed for [`SeedSource::Fixed`].
pub fn derive_round_seed(base: u64, conversation_id: &str, round_no: u64) -> u64 {
    mix64(base ^ mix64(crate::provider::fnv1a(conversation_id.as_bytes()) ^ mix64(round_no)))
}

pub fn baseline_agent() -> AgentPersona {
    AgentPersona {
        agent_id: BASELINE_AGENT_ID.into(),
        seed: PersonaSeed::new(BASELINE_AGENT_NAME),
        description: String::new(),
        stage_prompts: StagePrompts {
            gating_prompt: String::new(),
            response_prompt: String::new(),
        },
        collection_id: None,
    }
}

impl Engine {
    pub fn open(config: EngineConfig) -> Result<Self, EngineError> {
        let data_dir = config.data_dir;
        let agents_dir = data_dir.join("agents");
        std::fs::create_dir_all(&agents_dir)?;
        let knowledge = KnowledgeBase::open(data_dir.join("knowledge"))?;
        let store = ConversationStore::open(data_dir.join("conversations"))?;

        let mut agents = BTreeMap::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&agents_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
            .filter(|p| p.file_name().and_then(|n| n.to_str()) != Some(RETIRED_FILE))
            .collect();
        paths.sort();
        for path in paths {
            let agent = AgentPersona::load(&path)?;
            agents.insert(agent.agent_id.clone(), agent);
        }
        let retired = match std::fs::read_to_string(agents_dir.join(RETIRED_FILE)) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| StudioError::Record {
                path: agents_dir.join(RETIRED_FILE),
                reason: e.to_string(),
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeSet::new(),
            Err(e) => return Err(e.into()),
        };
        Ok(Engine {
            data_dir,
            gateway: config.gateway,
            clock: config.clock,
            seeds: config.seeds,
            round: config.round,
            chunking: config.chunking,
            knowledge,
            store,
            agents: RwLock::new(agents),
            retired: Mutex::new(retired),
            registry: tokio::sync::Mutex::new(()),
            round_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn knowledge(&self) -> &KnowledgeBase {
        &self.knowledge
    }

    pub fn store(&self) -> &ConversationStore {
        &self.store
    }

    fn agents_dir(&self) -> PathBuf {
        self.data_dir.join("agents")
    }

    pub fn list_agents(&self) -> Vec<AgentPersona> {
        self.agents.read().unwrap().values().cloned().collect()
    }

    pub fn agent(&self, agent_id: &str) -> Result<AgentPersona, EngineError> {
        self.agents
            .read()
            .unwrap()
            .get(agent_id)
            .cloned()
            .ok_or_else(|| EngineError::NotFound {
                kind: "agent",
                id: agent_id.to_string(),
            })
    }

    fn allocate_id(&self, name: &str) -> String {
        let agents = self.agents.read().unwrap();
        let retired = self.retired.lock().unwrap();
        let taken = |id: &str| {
            id == USER_AUTHOR
                || id == BASELINE_AGENT_ID
                || agents.contains_key(id)
                || retired.contains(id)
        };
        let base = slugify(name);
        if !taken(&base) {
            return base;
        }
        (2..)
            .map(|n| format!("{base}-{n}"))
            .find(|id| !taken(id))
            .unwrap()
    }

    /// Runs the persona chain and registers the agent with an empty
    /// private collection. Names are unique among active agents.
    pub async fn create_agent(&self, seed: PersonaSeed) -> Result<AgentPersona, EngineError> {
        seed.validate()?;
        let _guard = self.registry.lock().await;
        let wanted = seed.name.trim().to_lowercase();
        if wanted == USER_DISPLAY_NAME.to_lowercase()
            || wanted == BASELINE_AGENT_NAME.to_lowercase()
        {
            return Err(EngineError::Conflict(format!(
                "the name {:?} is reserved",
                seed.name.trim()
            )));
        }
        if self
            .agents
            .read()
            .unwrap()
            .values()
            .any(|a| a.name().trim().to_lowercase() == wanted)
        {
            return Err(EngineError::Conflict(format!(
                "an agent named {:?} already exists",
                seed.name.trim()
            )));
        }
        let agent_id = self.allocate_id(&seed.name);
        let mut persona = create_persona(&self.gateway, agent_id.clone(), seed).await?;
        self.knowledge
            .create(&agent_id, &agent_id, self.gateway.dimension())?;
        persona.collection_id = Some(agent_id.clone());
        if let Err(e) = persona.save(&self.agents_dir()) {
            let _ = self.knowledge.remove(&agent_id);
            return Err(e.into());
        }
        self.agents
            .write()
            .unwrap()
            .insert(agent_id, persona.clone());
        Ok(persona)
    }

    /// Removes the agent from every roster going forward. Past rounds keep
    /// their messages and the id is never reused.
    pub async fn delete_agent(&self, agent_id: &str) -> Result<(), EngineError> {
        let _guard = self.registry.lock().await;
        let agent = self.agent(agent_id)?;
        {
            let mut retired = self.retired.lock().unwrap();
            retired.insert(agent_id.to_string());
            let body = serde_json::to_string_pretty(&*retired).expect("ids serialize");
            std::fs::write(self.agents_dir().join(RETIRED_FILE), body + "\n")?;
        }
        std::fs::remove_file(self.agents_dir().join(format!("{agent_id}.json")))?;
        self.agents.write().unwrap().remove(agent_id);
        if let Some(collection) = &agent.collection_id {
            if let Err(e) = self.knowledge.remove(collection) {
                tracing::warn!(collection, error = %e, "could not remove collection of deleted agent");
            }
        }
        for id in self.store.ids() {
            let conversation = self.store.get(&id)?;
            if conversation.roster().iter().any(|a| a == agent_id) {
                let roster = conversation
                    .roster()
                    .iter()
                    .filter(|a| *a != agent_id)
                    .cloned()
                    .collect();
                self.store.change_roster(&id, roster, self.clock.now_ms())?;
            }
        }
        Ok(())
    }

    pub async fn upload_knowledge(
        &self,
        agent_id: &str,
        doc_id: &str,
        text: &str,
    ) -> Result<usize, EngineError> {
        if doc_id.trim().is_empty() {
            return Err(EngineError::Invalid("doc_id must not be empty".into()));
        }
        let agent = self.agent(agent_id)?;
        let collection = agent
            .collection_id
            .as_deref()
            .ok_or_else(|| EngineError::NotFound {
                kind: "collection for agent",
                id: agent_id.to_string(),
            })?;
        Ok(self
            .knowledge
            .ingest(&self.gateway, collection, doc_id, text, self.chunking)
            .await?)
    }

    /// Creates each preset agent and ingests its document. Presets whose
    /// name is already active are returned unchanged.
    pub async fn install_presets(
        &self,
        presets: &[Preset],
    ) -> Result<Vec<AgentPersona>, EngineError> {
        let mut installed = Vec::with_capacity(presets.len());
        for preset in presets {
            let wanted = preset.seed.name.trim().to_lowercase();
            let existing = self
                .agents
                .read()
                .unwrap()
                .values()
                .find(|a| a.name().trim().to_lowercase() == wanted)
                .cloned();
            let agent = match existing {
                Some(agent) => agent,
                None => {
                    let agent = self.create_agent(preset.seed.clone()).await?;
                    self.upload_knowledge(
                        &agent.agent_id,
                        &preset.knowledge_doc_id,
                        &preset.knowledge_text,
                    )
                    .await?;
                    agent
                }
            };
            installed.push(agent);
        }
        Ok(installed)
    }

    pub fn create_conversation(
        &self,
        request: NewConversation,
    ) -> Result<ConversationRecord, EngineError> {
        let roster = if request.baseline {
            if !request.roster.is_empty() && request.roster != [BASELINE_AGENT_ID] {
                return Err(EngineError::Invalid(
                    "a baseline conversation takes no roster".into(),
                ));
            }
            vec![BASELINE_AGENT_ID.to_string()]
        } else {
            if request.roster.is_empty() {
                return Err(EngineError::Invalid(
                    "roster must name at least one agent".into(),
                ));
            }
            let agents = self.agents.read().unwrap();
            let mut names = BTreeSet::new();
            for (i, id) in request.roster.iter().enumerate() {
                let agent = agents.get(id).ok_or_else(|| EngineError::NotFound {
                    kind: "agent",
                    id: id.clone(),
                })?;
                if request.roster[..i].contains(id) {
                    return Err(EngineError::Conflict(format!(
                        "agent {id:?} is listed twice"
                    )));
                }
                if !names.insert(agent.name().trim().to_lowercase()) {
                    return Err(EngineError::Conflict(format!(
                        "two agents named {:?} in one roster",
                        agent.name()
                    )));
                }
            }
            request.roster
        };
        let ids = self.store.ids();
        let conversation_id = (ids.len() + 1..)
            .map(|n| format!("conv-{n:04}"))
            .find(|id| !ids.contains(id))
            .unwrap();
        let record = ConversationRecord {
            conversation_id,
            created_at: self.clock.now_ms(),
            scenario_tag: request.scenario_tag,
            roster,
            baseline: request.baseline,
        };
        self.store.create(record.clone())?;
        Ok(record)
    }

    pub fn conversation(&self, conversation_id: &str) -> Result<Conversation, EngineError> {
        Ok(self.store.get(conversation_id)?)
    }

    pub fn export_text(&self, conversation_id: &str) -> Result<String, EngineError> {
        Ok(self.store.export_text(conversation_id)?)
    }

    pub fn export_structured(&self, conversation_id: &str) -> Result<String, EngineError> {
        Ok(self.store.export_structured(conversation_id)?)
    }

    fn round_lock(&self, conversation_id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.round_locks
            .lock()
            .unwrap()
            .entry(conversation_id.to_string())
            .or_default()
            .clone()
    }

    fn active_roster(&self, conversation: &Conversation) -> Vec<AgentPersona> {
        if conversation.record.baseline {
            return vec![baseline_agent()];
        }
        let agents = self.agents.read().unwrap();
        conversation
            .roster()
            .iter()
            .filter_map(|id| agents.get(id).cloned())
            .collect()
    }

    fn round_seed(&self, conversation_id: &str, round_no: u64) -> u64 {
        match self.seeds {
            SeedSource::Fixed(base) => derive_round_seed(base, conversation_id, round_no),
            SeedSource::Random => rand::random(),
        }
    }

    /// Gates, plans, executes and commits one round. `sink` receives the
    /// round's events in protocol order. Rounds of one conversation run one
    /// at a time; later calls wait their turn.
    pub async fn post_message(
        &self,
        conversation_id: &str,
        text: &str,
        policy: ModePolicy,
        seed: Option<u64>,
        sink: &mut (dyn FnMut(RoundEvent) + Send),
    ) -> Result<ConversationRound, EngineError> {
        if text.trim().is_empty() {
            return Err(EngineError::Invalid(
                "message text must not be empty".into(),
            ));
        }
        let lock = self.round_lock(conversation_id);
        let _turn = lock.lock().await;

        let conversation = self.store.get(conversation_id)?;
        let roster = self.active_roster(&conversation);
        if roster.is_empty() {
            return Err(EngineError::EmptyRoster(conversation_id.to_string()));
        }
        let round_no = conversation.round_count() as u64 + 1;
        let round_id = format!("{conversation_id}-r{round_no}");
        let rng_seed = seed.unwrap_or_else(|| self.round_seed(conversation_id, round_no));
        let history = conversation.messages();
        let user_message = Message {
            message_id: crate::orchestrator::message_id(&round_id, 0),
            conversation_id: conversation_id.to_string(),
            author: USER_AUTHOR.into(),
            author_name: USER_DISPLAY_NAME.into(),
            text: text.to_string(),
            timestamp: self.clock.now_ms(),
            round_id: round_id.clone(),
            failed: false,
        };
        sink(RoundEvent::round_started(&user_message));

        let verdicts = gate_relevance(&self.gateway, text, &roster, &history).await;
        let plan = build_plan(&round_id, verdicts, policy, rng_seed).map_err(|e| match e {
            OrchestratorError::EmptyRoster => EngineError::EmptyRoster(conversation_id.to_string()),
            other => EngineError::Invalid(other.to_string()),
        })?;
        for (position, agent_id) in plan.responders.iter().enumerate() {
            let agent = roster
                .iter()
                .find(|a| &a.agent_id == agent_id)
                .expect("plan uses roster ids");
            let verdict = plan
                .verdicts
                .iter()
                .find(|v| &v.agent_id == agent_id)
                .expect("verdict per agent");
            sink(RoundEvent::agent_selected(
                &round_id, position, agent, verdict, plan.mode,
            ));
        }

        let mut observer =
            |outcome: crate::orchestrator::ReplyOutcome<'_>| sink(RoundEvent::reply(&outcome));
        let result = execute_round(
            &self.gateway,
            &self.knowledge,
            self.clock.as_ref(),
            &roster,
            &history,
            user_message,
            plan,
            self.round,
            &mut observer,
        )
        .await;
        match result {
            Ok(round) => {
                let seq = self.store.append_round(conversation_id, &round);
                match seq {
                    Ok(seq) => {
                        sink(RoundEvent::complete(&round, Some(seq), None));
                        Ok(round)
                    }
                    Err(e) => {
                        sink(RoundEvent::complete(&round, None, Some(e.to_string())));
                        Err(e.into())
                    }
                }
            }
            Err(OrchestratorError::AllFailed(round)) => {
                sink(RoundEvent::complete(
                    &round,
                    None,
                    Some("every agent failed to reply".into()),
                ));
                Err(EngineError::RoundFailed(round.round_id))
            }
            Err(e) => Err(EngineError::Invalid(e.to_string())),
        }
    }
}
