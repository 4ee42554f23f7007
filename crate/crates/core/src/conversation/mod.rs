//! Durable conversation history.
//!
//! Each conversation is one append-only file `<id>.log` of framed records:
//!
//! ```text
//! [u32 LE payload length][u32 LE crc32 of payload][payload: JSON]
//! ```
//!
//! Every payload is `{"v":1,"seq":N,"entry":{...}}`. A round (user message,
//! replies and plan) is a single record, so it is either fully on disk or
//! absent. A torn or corrupt tail is dropped when the log is reopened.
//! `index.json` lists the known conversations.

mod export;
mod log;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::orchestrator::{ConversationRound, Message};
use crate::scenario::ScenarioTag;

pub use export::{
    export_structured, export_text, transcript, Transcript, TranscriptEvent, TRANSCRIPT_FORMAT,
};
pub use log::{LogRecord, RECORD_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown conversation {0:?}")]
    UnknownConversation(String),
    #[error("conversation {0:?} already exists")]
    ConversationExists(String),
    #[error("round {0:?} was already committed")]
    DuplicateRound(String),
    #[error("round belongs to conversation {got:?}, not {expected:?}")]
    WrongConversation { expected: String, got: String },
    #[error("corrupt log {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("storage write failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationRecord {
    pub conversation_id: String,
    pub created_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_tag: Option<ScenarioTag>,
    pub roster: Vec<String>,
    #[serde(default)]
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum LogEntry {
    Created { record: ConversationRecord },
    Round { round: ConversationRound },
    RosterChange { roster: Vec<String>, timestamp: u64 },
}

/// In-memory image of one committed log.
#[derive(Debug, Clone, PartialEq)]
pub struct Conversation {
    pub record: ConversationRecord,
    pub entries: Vec<(u64, LogEntry)>,
}

impl Conversation {
    pub fn id(&self) -> &str {
        &self.record.conversation_id
    }

    /// Roster after every logged change.
    pub fn roster(&self) -> &[String] {
        self.entries
            .iter()
            .rev()
            .find_map(|(_, e)| match e {
                LogEntry::RosterChange { roster, .. } => Some(roster.as_slice()),
                _ => None,
            })
            .unwrap_or(&self.record.roster)
    }

    pub fn rounds(&self) -> impl Iterator<Item = &ConversationRound> {
        self.entries.iter().filter_map(|(_, e)| match e {
            LogEntry::Round { round } => Some(round),
            _ => None,
        })
    }

    pub fn round_count(&self) -> usize {
        self.rounds().count()
    }

    /// Shared history: every user message and reply in commit order.
    pub fn messages(&self) -> Vec<Message> {
        self.rounds()
            .flat_map(|r| std::iter::once(&r.user_message).chain(r.replies.iter()))
            .cloned()
            .collect()
    }

    pub fn last_seq(&self) -> u64 {
        self.entries.last().map(|(s, _)| *s).unwrap_or(0)
    }
}

#[derive(Debug)]
struct Slot {
    conversation: RwLock<Conversation>,
    writer: Mutex<log::LogWriter>,
}

/// Simulated crash for the next append: the first `keep_bytes` bytes of the
/// framed record reach the file and the append reports failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TornWrite {
    pub keep_bytes: usize,
}

#[derive(Debug)]
pub struct ConversationStore {
    dir: PathBuf,
    slots: RwLock<BTreeMap<String, Arc<Slot>>>,
    fault: Mutex<Option<TornWrite>>,
}

const INDEX_FILE: &str = "index.json";

#[derive(Serialize, Deserialize)]
struct Index {
    conversations: Vec<String>,
}

impl ConversationStore {
    /// Opens (creating if needed) the store rooted at `dir` and replays
    /// every indexed log.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let index_path = dir.join(INDEX_FILE);
        let ids = match std::fs::read_to_string(&index_path) {
            Ok(text) => {
                serde_json::from_str::<Index>(&text)
                    .map_err(|e| StoreError::Corrupt {
                        path: index_path.clone(),
                        reason: e.to_string(),
                    })?
                    .conversations
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let mut slots = BTreeMap::new();
        for id in ids {
            let path = log_path(&dir, &id);
            let (conversation, writer) = log::recover(&path)?;
            slots.insert(
                id,
                Arc::new(Slot {
                    conversation: RwLock::new(conversation),
                    writer: Mutex::new(writer),
                }),
            );
        }
        Ok(ConversationStore {
            dir,
            slots: RwLock::new(slots),
            fault: Mutex::new(None),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Test hook: arm a torn write for the next append.
    pub fn inject_torn_write(&self, fault: TornWrite) {
        *self.fault.lock().unwrap() = Some(fault);
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, StoreError> {
        self.slots
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownConversation(id.to_string()))
    }

    fn write_index(&self, ids: Vec<String>) -> Result<(), StoreError> {
        let path = self.dir.join(INDEX_FILE);
        let tmp = self.dir.join("index.json.tmp");
        let body =
            serde_json::to_string_pretty(&Index { conversations: ids }).expect("index serializes");
        std::fs::write(&tmp, body + "\n")?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn create(&self, record: ConversationRecord) -> Result<Conversation, StoreError> {
        let mut slots = self.slots.write().unwrap();
        let id = record.conversation_id.clone();
        if slots.contains_key(&id) {
            return Err(StoreError::ConversationExists(id));
        }
        let path = log_path(&self.dir, &id);
        if path.exists() {
            // Orphan from a create that never reached the index.
            std::fs::remove_file(&path)?;
        }
        let mut writer = log::LogWriter::create(&path)?;
        let entry = LogEntry::Created {
            record: record.clone(),
        };
        writer.append(1, &entry, None)?;
        let conversation = Conversation {
            record,
            entries: vec![(1, entry)],
        };
        let mut ids: Vec<String> = slots.keys().cloned().collect();
        ids.push(id.clone());
        if let Err(e) = self.write_index(ids) {
            let _ = std::fs::remove_file(&path);
            return Err(e);
        }
        slots.insert(
            id,
            Arc::new(Slot {
                conversation: RwLock::new(conversation.clone()),
                writer: Mutex::new(writer),
            }),
        );
        Ok(conversation)
    }

    fn append(&self, id: &str, entry: LogEntry) -> Result<u64, StoreError> {
        let slot = self.slot(id)?;
        let mut writer = slot.writer.lock().unwrap();
        let seq = slot.conversation.read().unwrap().last_seq() + 1;
        let fault = self.fault.lock().unwrap().take();
        writer.append(seq, &entry, fault)?;
        slot.conversation
            .write()
            .unwrap()
            .entries
            .push((seq, entry));
        Ok(seq)
    }

    /// Commits a round as one record and returns its sequence number.
    pub fn append_round(&self, id: &str, round: &ConversationRound) -> Result<u64, StoreError> {
        if round.conversation_id != id {
            return Err(StoreError::WrongConversation {
                expected: id.to_string(),
                got: round.conversation_id.clone(),
            });
        }
        if self
            .slot(id)?
            .conversation
            .read()
            .unwrap()
            .rounds()
            .any(|r| r.round_id == round.round_id)
        {
            return Err(StoreError::DuplicateRound(round.round_id.clone()));
        }
        self.append(
            id,
            LogEntry::Round {
                round: round.clone(),
            },
        )
    }

    pub fn change_roster(
        &self,
        id: &str,
        roster: Vec<String>,
        timestamp: u64,
    ) -> Result<u64, StoreError> {
        self.append(id, LogEntry::RosterChange { roster, timestamp })
    }

    /// Snapshot of the committed state.
    pub fn get(&self, id: &str) -> Result<Conversation, StoreError> {
        Ok(self.slot(id)?.conversation.read().unwrap().clone())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.slots.read().unwrap().contains_key(id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.slots.read().unwrap().keys().cloned().collect()
    }

    pub fn export_text(&self, id: &str) -> Result<String, StoreError> {
        Ok(export_text(&self.get(id)?))
    }

    pub fn export_structured(&self, id: &str) -> Result<String, StoreError> {
        Ok(export_structured(&self.get(id)?))
    }
}

fn log_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.log"))
}
