//! Per-agent private knowledge: chunking, embedding, a flat cosine index
//! and top-k retrieval.
//!
//! Collections persist as JSON Lines (one encoding for the whole repo):
//!
//! ```text
//! {"format":"crewroom.collection","format_version":1,"collection_id":"..","owner_agent_id":"..","dimension":16}
//! {"chunk_id":"..","doc_id":"..","ordinal":0,"char_start":0,"char_end":800,"text":"..","embedding":[0.25,...]}
//! ...
//! ```
//!
//! Embeddings are written as decimal arrays of 32-bit floats using the
//! shortest representation that round-trips exactly.

mod chunk;
mod store;

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use chunk::{chunk_document, ChunkParams, ChunkSpan};
pub use store::{KnowledgeBase, Retrieved};

use crate::provider::ProviderError;

pub const DEFAULT_TOP_K: usize = 4;
pub const COLLECTION_FORMAT: &str = "crewroom.collection";
pub const COLLECTION_FORMAT_VERSION: u32 = 1;
const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum KnowledgeError {
    #[error("invalid chunking: overlap {overlap} must be smaller than chunk size {chunk_size} (and size > 0)")]
    InvalidChunking { chunk_size: usize, overlap: usize },
    #[error("document {0:?} is already in the collection")]
    DuplicateDocument(String),
    #[error("dimension mismatch: collection has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown collection {0:?}")]
    UnknownCollection(String),
    #[error("collection {0:?} already exists")]
    CollectionExists(String),
    #[error("k must be positive")]
    ZeroK,
    #[error("embedding failed: {0}")]
    Embedding(#[from] ProviderError),
    #[error("collection file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Unit-norm embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Scales `raw` to unit L2 norm. `None` for zero or non-finite input.
    pub fn normalized(raw: Vec<f32>) -> Option<Self> {
        let norm = raw
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        Some(EmbeddingVector(
            raw.into_iter().map(|v| (v as f64 / norm) as f32).collect(),
        ))
    }

    /// Accepts values that are already unit-norm (within 1e-6).
    pub fn from_unit(values: Vec<f32>) -> Option<Self> {
        let v = EmbeddingVector(values);
        ((v.norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE).then_some(v)
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// Cosine similarity of two unit vectors, clamped to `[-1, 1]`.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        let dot: f64 = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum();
        dot.clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeChunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub ordinal: u32,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
    pub embedding: EmbeddingVector,
}

#[derive(Debug, Clone, Copy)]
pub struct ScoredChunk<'a> {
    pub chunk: &'a KnowledgeChunk,
    pub score: f64,
}

impl ScoredChunk<'_> {
    /// Higher score first, then `(doc_id, ordinal)` ascending.
    fn rank(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then_with(|| {
            (&other.chunk.doc_id, other.chunk.ordinal)
                .cmp(&(&self.chunk.doc_id, self.chunk.ordinal))
        })
    }
}

impl PartialEq for ScoredChunk<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.rank(other) == Ordering::Equal
    }
}
impl Eq for ScoredChunk<'_> {}
impl PartialOrd for ScoredChunk<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ScoredChunk<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank(other)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CollectionHeader {
    format: String,
    format_version: u32,
    collection_id: String,
    owner_agent_id: String,
    dimension: usize,
}

/// A flat exact-scan vector index owned by exactly one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    collection_id: String,
    owner_agent_id: String,
    dimension: usize,
    chunks: Vec<KnowledgeChunk>,
}

impl Collection {
    pub fn new(
        collection_id: impl Into<String>,
        owner_agent_id: impl Into<String>,
        dimension: usize,
    ) -> Self {
        Collection {
            collection_id: collection_id.into(),
            owner_agent_id: owner_agent_id.into(),
            dimension,
            chunks: Vec::new(),
        }
    }

    pub fn collection_id(&self) -> &str {
        &self.collection_id
    }

    pub fn owner_agent_id(&self) -> &str {
        &self.owner_agent_id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn chunks(&self) -> &[KnowledgeChunk] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn contains_document(&self, doc_id: &str) -> bool {
        self.chunks.iter().any(|c| c.doc_id == doc_id)
    }

    /// Appends one document's chunks. All-or-nothing: nothing is added if
    /// any embedding has the wrong dimension or the document already exists.
    pub fn add_document(
        &mut self,
        doc_id: &str,
        spans: Vec<ChunkSpan>,
        embeddings: Vec<EmbeddingVector>,
    ) -> Result<usize, KnowledgeError> {
        if self.contains_document(doc_id) {
            return Err(KnowledgeError::DuplicateDocument(doc_id.to_string()));
        }
        assert_eq!(spans.len(), embeddings.len(), "one embedding per span");
        if let Some(bad) = embeddings.iter().find(|e| e.dimension() != self.dimension) {
            return Err(KnowledgeError::DimensionMismatch {
                expected: self.dimension,
                got: bad.dimension(),
            });
        }
        let added = spans.len();
        for (ordinal, (span, embedding)) in spans.into_iter().zip(embeddings).enumerate() {
            self.chunks.push(KnowledgeChunk {
                chunk_id: format!("{}:{}:{}", self.collection_id, doc_id, ordinal),
                doc_id: doc_id.to_string(),
                ordinal: ordinal as u32,
                char_start: span.char_start,
                char_end: span.char_end,
                text: span.text,
                embedding,
            });
        }
        Ok(added)
    }

    fn truncate(&mut self, len: usize) {
        self.chunks.truncate(len);
    }

    /// Exact top-`k` by cosine similarity, scores descending, ties by
    /// `(doc_id, ordinal)` ascending.
    pub fn search(
        &self,
        query: &EmbeddingVector,
        k: usize,
    ) -> Result<Vec<ScoredChunk<'_>>, KnowledgeError> {
        if k == 0 {
            return Err(KnowledgeError::ZeroK);
        }
        if query.dimension() != self.dimension {
            return Err(KnowledgeError::DimensionMismatch {
                expected: self.dimension,
                got: query.dimension(),
            });
        }
        // min-heap of the best k seen so far
        let mut heap: BinaryHeap<Reverse<ScoredChunk<'_>>> = BinaryHeap::with_capacity(k + 1);
        for chunk in &self.chunks {
            heap.push(Reverse(ScoredChunk {
                chunk,
                score: query.cosine(&chunk.embedding),
            }));
            if heap.len() > k {
                heap.pop();
            }
        }
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|Reverse(s)| s)
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<(), KnowledgeError> {
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut out = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            let header = CollectionHeader {
                format: COLLECTION_FORMAT.into(),
                format_version: COLLECTION_FORMAT_VERSION,
                collection_id: self.collection_id.clone(),
                owner_agent_id: self.owner_agent_id.clone(),
                dimension: self.dimension,
            };
            serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
            for chunk in &self.chunks {
                serde_json::to_writer(&mut out, chunk).map_err(std::io::Error::from)?;
                out.write_all(b"\n")?;
            }
            out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, KnowledgeError> {
        let fail = |reason: String| KnowledgeError::Format {
            path: path.display().to_string(),
            reason,
        };
        let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
        let header_line = lines.next().ok_or_else(|| fail("empty file".into()))??;
        let header: CollectionHeader =
            serde_json::from_str(&header_line).map_err(|e| fail(format!("header: {e}")))?;
        if header.format != COLLECTION_FORMAT || header.format_version != COLLECTION_FORMAT_VERSION
        {
            return Err(fail(format!(
                "unsupported format {:?} version {}",
                header.format, header.format_version
            )));
        }
        let mut collection = Collection::new(
            header.collection_id,
            header.owner_agent_id,
            header.dimension,
        );
        let mut next_ordinal: BTreeMap<String, u32> = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let chunk: KnowledgeChunk =
                serde_json::from_str(&line).map_err(|e| fail(format!("record {}: {e}", i + 1)))?;
            if chunk.embedding.dimension() != collection.dimension {
                return Err(fail(format!(
                    "record {}: embedding dimension {}",
                    i + 1,
                    chunk.embedding.dimension()
                )));
            }
            if (chunk.embedding.norm() - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(fail(format!(
                    "record {}: embedding is not unit norm",
                    i + 1
                )));
            }
            if chunk.char_start >= chunk.char_end
                || chunk.text.chars().count() != chunk.char_end - chunk.char_start
            {
                return Err(fail(format!("record {}: inconsistent offsets", i + 1)));
            }
            let expected = next_ordinal.entry(chunk.doc_id.clone()).or_insert(0);
            if chunk.ordinal != *expected {
                return Err(fail(format!(
                    "record {}: ordinal {} out of sequence",
                    i + 1,
                    chunk.ordinal
                )));
            }
            *expected += 1;
            collection.chunks.push(chunk);
        }
        Ok(collection)
    }
}
