use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Conversation, LogEntry, StoreError, TornWrite};

pub const RECORD_VERSION: u32 = 1;
const HEADER: usize = 8;
const MAX_RECORD: usize = 64 << 20;

/// Payload of one framed record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub v: u32,
    pub seq: u64,
    pub entry: LogEntry,
}

#[derive(Debug)]
pub(super) struct LogWriter {
    file: File,
    len: u64,
}

fn frame(payload: &[u8]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER + payload.len());
    buf.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    buf.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    buf.extend_from_slice(payload);
    buf
}

impl LogWriter {
    pub(super) fn create(path: &Path) -> Result<Self, StoreError> {
        let file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(path)?;
        Ok(LogWriter { file, len: 0 })
    }

    pub(super) fn append(
        &mut self,
        seq: u64,
        entry: &LogEntry,
        fault: Option<TornWrite>,
    ) -> Result<(), StoreError> {
        let record = LogRecord {
            v: RECORD_VERSION,
            seq,
            entry: entry.clone(),
        };
        let payload = serde_json::to_vec(&record).expect("log records serialize");
        let bytes = frame(&payload);
        if self.file.metadata()?.len() != self.len {
            // Leftover from an earlier failed append.
            self.file.set_len(self.len)?;
        }
        if let Some(TornWrite { keep_bytes }) = fault {
            let keep = keep_bytes.min(bytes.len().saturating_sub(1));
            self.file.write_all(&bytes[..keep])?;
            self.file.sync_data()?;
            return Err(StoreError::Io(std::io::Error::other("injected torn write")));
        }
        let result = self
            .file
            .write_all(&bytes)
            .and_then(|_| self.file.sync_data());
        if let Err(e) = result {
            let _ = self.file.set_len(self.len);
            return Err(e.into());
        }
        self.len += bytes.len() as u64;
        Ok(())
    }
}

/// Reads every intact record, truncates any torn tail and reopens the
/// file for appending.
pub(super) fn recover(path: &Path) -> Result<(Conversation, LogWriter), StoreError> {
    let corrupt = |reason: String| StoreError::Corrupt {
        path: path.to_path_buf(),
        reason,
    };
    let mut file = OpenOptions::new().read(true).append(true).open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;

    let mut offset = 0usize;
    let mut records = Vec::new();
    while bytes.len() - offset >= HEADER {
        let len = u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()) as usize;
        let crc = u32::from_le_bytes(bytes[offset + 4..offset + 8].try_into().unwrap());
        let end = offset + HEADER + len;
        if len > MAX_RECORD || end > bytes.len() {
            break;
        }
        let payload = &bytes[offset + HEADER..end];
        if crc32fast::hash(payload) != crc {
            break;
        }
        let record: LogRecord = match serde_json::from_slice(payload) {
            Ok(r) => r,
            Err(e) => return Err(corrupt(format!("record at byte {offset}: {e}"))),
        };
        if record.v != RECORD_VERSION {
            return Err(corrupt(format!("unsupported record version {}", record.v)));
        }
        records.push(record);
        offset = end;
    }
    if offset < bytes.len() {
        tracing::warn!(path = %path.display(), dropped = bytes.len() - offset, "dropping torn log tail");
        file.set_len(offset as u64)?;
    }

    let mut iter = records.into_iter();
    let record = match iter.next() {
        Some(LogRecord {
            entry: LogEntry::Created { record },
            ..
        }) => record,
        _ => return Err(corrupt("log does not start with a created entry".into())),
    };
    let mut entries = vec![(
        1,
        LogEntry::Created {
            record: record.clone(),
        },
    )];
    for r in iter {
        if r.seq != entries.last().unwrap().0 + 1 {
            return Err(corrupt(format!("sequence gap before {}", r.seq)));
        }
        entries.push((r.seq, r.entry));
    }
    let writer = LogWriter {
        file,
        len: offset as u64,
    };
    Ok((Conversation { record, entries }, writer))
}
