use serde::{Deserialize, Serialize};

use super::KnowledgeError;

/// Character-window chunking parameters. Sizes count Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkParams {
    pub chunk_size: usize,
    pub overlap: usize,
}

impl Default for ChunkParams {
    fn default() -> Self {
        ChunkParams {
            chunk_size: 800,
            overlap: 200,
        }
    }
}

impl ChunkParams {
    pub fn new(chunk_size: usize, overlap: usize) -> Result<Self, KnowledgeError> {
        if chunk_size == 0 || overlap >= chunk_size {
            return Err(KnowledgeError::InvalidChunking {
                chunk_size,
                overlap,
            });
        }
        Ok(ChunkParams {
            chunk_size,
            overlap,
        })
    }

    pub fn stride(&self) -> usize {
        self.chunk_size - self.overlap
    }
}

/// One window of the source. `char_start`/`char_end` are character
/// offsets; `text` is exactly the characters in `[char_start, char_end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSpan {
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

/// Splits `source` into windows starting at multiples of the stride.
///
/// Emission stops at the first window reaching the end of the text, so a
/// trailing window that would sit entirely inside its predecessor is never
/// produced.
pub fn chunk_document(
    source: &str,
    chunk_size: usize,
    overlap: usize,
) -> Result<Vec<ChunkSpan>, KnowledgeError> {
    let params = ChunkParams::new(chunk_size, overlap)?;
    Ok(chunk_with(source, params))
}

pub(crate) fn chunk_with(source: &str, params: ChunkParams) -> Vec<ChunkSpan> {
    // byte offset of every char boundary, plus the end
    let boundaries: Vec<usize> = source
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(source.len()))
        .collect();
    let len = boundaries.len() - 1;
    let stride = params.stride();

    let mut spans = Vec::new();
    let mut start = 0;
    while start < len {
        let end = (start + params.chunk_size).min(len);
        spans.push(ChunkSpan {
            char_start: start,
            char_end: end,
            text: source[boundaries[start]..boundaries[end]].to_string(),
        });
        if end == len {
            break;
        }
        start += stride;
    }
    spans
}
