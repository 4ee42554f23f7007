use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::chunk::chunk_with;
use super::{ChunkParams, Collection, EmbeddingVector, KnowledgeError};
use crate::provider::Gateway;

/// Owned search hit, detached from the collection lock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieved {
    pub collection_id: String,
    pub chunk_id: String,
    pub doc_id: String,
    pub ordinal: u32,
    pub text: String,
    pub score: f64,
}

/// All collections under one data directory.
///
/// Each collection sits behind its own lock: searches share it, ingest
/// takes it exclusively, and distinct collections never contend.
#[derive(Debug)]
pub struct KnowledgeBase {
    dir: PathBuf,
    collections: RwLock<HashMap<String, Arc<RwLock<Collection>>>>,
}

impl KnowledgeBase {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, KnowledgeError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut collections = HashMap::new();
        let mut entries: Vec<_> = std::fs::read_dir(&dir)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            let collection = Collection::load(&path)?;
            collections.insert(
                collection.collection_id().to_string(),
                Arc::new(RwLock::new(collection)),
            );
        }
        Ok(KnowledgeBase {
            dir,
            collections: RwLock::new(collections),
        })
    }

    fn path_for(&self, collection_id: &str) -> PathBuf {
        self.dir.join(format!("{collection_id}.jsonl"))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn get(&self, collection_id: &str) -> Result<Arc<RwLock<Collection>>, KnowledgeError> {
        self.collections
            .read()
            .unwrap()
            .get(collection_id)
            .cloned()
            .ok_or_else(|| KnowledgeError::UnknownCollection(collection_id.to_string()))
    }

    pub fn create(
        &self,
        collection_id: &str,
        owner_agent_id: &str,
        dimension: usize,
    ) -> Result<(), KnowledgeError> {
        let mut map = self.collections.write().unwrap();
        if map.contains_key(collection_id) {
            return Err(KnowledgeError::CollectionExists(collection_id.to_string()));
        }
        let collection = Collection::new(collection_id, owner_agent_id, dimension);
        collection.save(&self.path_for(collection_id))?;
        map.insert(collection_id.to_string(), Arc::new(RwLock::new(collection)));
        Ok(())
    }

    pub fn remove(&self, collection_id: &str) -> Result<(), KnowledgeError> {
        let removed = self.collections.write().unwrap().remove(collection_id);
        if removed.is_none() {
            return Err(KnowledgeError::UnknownCollection(collection_id.to_string()));
        }
        match std::fs::remove_file(self.path_for(collection_id)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, collection_id: &str) -> bool {
        self.collections.read().unwrap().contains_key(collection_id)
    }

    pub fn chunk_count(&self, collection_id: &str) -> Result<usize, KnowledgeError> {
        Ok(self.get(collection_id)?.read().unwrap().len())
    }

    pub fn snapshot(&self, collection_id: &str) -> Result<Collection, KnowledgeError> {
        Ok(self.get(collection_id)?.read().unwrap().clone())
    }

    /// Chunks, embeds and appends one document, then persists the
    /// collection. Nothing is kept if embedding or the write fails.
    pub async fn ingest(
        &self,
        gateway: &Gateway,
        collection_id: &str,
        doc_id: &str,
        source_text: &str,
        params: ChunkParams,
    ) -> Result<usize, KnowledgeError> {
        let handle = self.get(collection_id)?;
        {
            let collection = handle.read().unwrap();
            if collection.contains_document(doc_id) {
                return Err(KnowledgeError::DuplicateDocument(doc_id.to_string()));
            }
            if gateway.dimension() != collection.dimension() {
                return Err(KnowledgeError::DimensionMismatch {
                    expected: collection.dimension(),
                    got: gateway.dimension(),
                });
            }
        }
        let spans = chunk_with(source_text, params);
        if spans.is_empty() {
            return Ok(0);
        }
        let mut embeddings = Vec::with_capacity(spans.len());
        for span in &spans {
            embeddings.push(gateway.embed(&span.text).await?);
        }

        let mut collection = handle.write().unwrap();
        let before = collection.len();
        let added = collection.add_document(doc_id, spans, embeddings)?;
        if let Err(e) = collection.save(&self.path_for(collection_id)) {
            collection.truncate(before);
            return Err(e);
        }
        Ok(added)
    }

    pub fn search(
        &self,
        collection_id: &str,
        query: &EmbeddingVector,
        k: usize,
    ) -> Result<Vec<Retrieved>, KnowledgeError> {
        let handle = self.get(collection_id)?;
        let collection = handle.read().unwrap();
        Ok(collection
            .search(query, k)?
            .into_iter()
            .map(|hit| Retrieved {
                collection_id: collection.collection_id().to_string(),
                chunk_id: hit.chunk.chunk_id.clone(),
                doc_id: hit.chunk.doc_id.clone(),
                ordinal: hit.chunk.ordinal,
                text: hit.chunk.text.clone(),
                score: hit.score,
            })
            .collect())
    }
}
