use serde::{Deserialize, Serialize};

use super::{Conversation, ConversationRecord, LogEntry};
use crate::orchestrator::ConversationRound;

pub const TRANSCRIPT_FORMAT: &str = "crewroom.transcript";

/// Structured export: the conversation header plus every log event after
/// creation, in sequence order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub format: String,
    pub format_version: u32,
    pub conversation: ConversationRecord,
    pub roster: Vec<String>,
    pub events: Vec<TranscriptEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum TranscriptEvent {
    Round {
        seq: u64,
        round: ConversationRound,
    },
    RosterChange {
        seq: u64,
        roster: Vec<String>,
        timestamp: u64,
    },
}

impl Transcript {
    pub fn rounds(&self) -> impl Iterator<Item = &ConversationRound> {
        self.events.iter().filter_map(|e| match e {
            TranscriptEvent::Round { round, .. } => Some(round),
            _ => None,
        })
    }
}

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\")
        .replace('\r', "\\r")
        .replace('\n', "\\n")
}

/// One `[author] text` line per message. Line breaks inside a message are
/// escaped; a failed reply reads `(no reply)`.
pub fn export_text(conversation: &Conversation) -> String {
    let mut out = String::new();
    for message in conversation.messages() {
        let text = if message.failed {
            "(no reply)".to_string()
        } else {
            escape(&message.text)
        };
        out.push_str(&format!("[{}] {}\n", message.author_name, text));
    }
    out
}

pub fn transcript(conversation: &Conversation) -> Transcript {
    let events = conversation
        .entries
        .iter()
        .filter_map(|(seq, entry)| match entry {
            LogEntry::Created { .. } => None,
            LogEntry::Round { round } => Some(TranscriptEvent::Round {
                seq: *seq,
                round: round.clone(),
            }),
            LogEntry::RosterChange { roster, timestamp } => Some(TranscriptEvent::RosterChange {
                seq: *seq,
                roster: roster.clone(),
                timestamp: *timestamp,
            }),
        })
        .collect();
    Transcript {
        format: TRANSCRIPT_FORMAT.into(),
        format_version: 1,
        conversation: conversation.record.clone(),
        roster: conversation.roster().to_vec(),
        events,
    }
}

/// Pretty JSON of [`transcript`], newline-terminated.
pub fn export_structured(conversation: &Conversation) -> String {
    serde_json::to_string_pretty(&transcript(conversation)).expect("transcript serializes") + "\n"
}
