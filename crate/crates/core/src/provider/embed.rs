use async_trait::async_trait;

use super::{Embedder, ProviderError};

/// Deterministic bag-of-words embedder.
///
/// Each whitespace-separated token is lowercased, stripped of leading and
/// trailing punctuation, hashed with 64-bit FNV-1a and counted into bucket
/// `hash % dimension`. The count vector is returned raw; the gateway
/// normalizes it. Text without any alphanumeric token is hashed whole.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashEmbedder { dimension }
    }

    pub fn counts(&self, text: &str) -> Vec<f32> {
        let mut counts = vec![0f32; self.dimension];
        let mut any = false;
        for token in tokens(text) {
            counts[(fnv1a(token.as_bytes()) % self.dimension as u64) as usize] += 1.0;
            any = true;
        }
        if !any {
            let whole = text.trim().to_lowercase();
            counts[(fnv1a(whole.as_bytes()) % self.dimension as u64) as usize] += 1.0;
        }
        counts
    }
}

pub(crate) fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|raw| {
            raw.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

#[async_trait]
impl Embedder for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    async fn embed_raw(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        Ok(self.counts(text))
    }
}
