//! Knowledge-base chunking, embedding and exact top-k similarity search.
//!
//! The store is deliberately exhaustive: at desk scale (at most a few
//! thousand chunks per lecture) a full cosine scan beats the complexity
//! of an approximate index. Embedders are pluggable; the built-in
//! [`HashEmbedder`] is a deterministic token-hash bag so retrieval tests
//! and offline runs need no network.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::AdapterError;
use crate::model::stable_hash64;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("overlap_tokens must be smaller than target_tokens")]
    BadChunking,
    #[error("knowledge store is empty")]
    EmptyStore,
    #[error("duplicate chunk id {0:?}")]
    DuplicateChunkId(String),
    #[error("embedding dimension {found} does not match store dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedder failure: {0}")]
    Embedder(#[from] AdapterError),
}

/// A knowledge-base excerpt. Ids are `{document}#{ordinal}` and stable
/// across re-chunking of identical text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section_index: Option<u32>,
    pub text: String,
    #[serde(default)]
    pub embedding: Vec<f64>,
}

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, RetrievalError>;
}

/// L2-normalized token-hash bag vectors. Deterministic for identical
/// text; an all-empty token stream embeds to the zero vector.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0);
        HashEmbedder { dimension }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(64)
    }
}

impl Embedder for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        let mut v = vec![0.0; self.dimension];
        let lower = text.to_lowercase();
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let slot = (stable_hash64(token.as_bytes()) % self.dimension as u64) as usize;
            v[slot] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        Ok(v)
    }
}

/// Remote embedder wire contract: `{"texts": [..]}` → `{"vectors": [[..]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
}

pub struct HttpEmbedder {
    agent: ureq::Agent,
    url: String,
    dimension: usize,
}

impl HttpEmbedder {
    pub fn new(url: impl Into<String>, dimension: usize) -> Self {
        HttpEmbedder {
            agent: ureq::AgentBuilder::new()
                .timeout(std::time::Duration::from_secs(60))
                .build(),
            url: url.into(),
            dimension,
        }
    }
}

impl Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        let request = EmbedRequest { texts: vec![text.to_string()] };
        let response: EmbedResponse = crate::adapter::post_json(&self.agent, &self.url, &request)?;
        let vector = response
            .vectors
            .into_iter()
            .next()
            .ok_or_else(|| RetrievalError::Embedder(AdapterError::Protocol("empty vectors array".into())))?;
        if vector.len() != self.dimension {
            return Err(RetrievalError::DimensionMismatch { expected: self.dimension, found: vector.len() });
        }
        Ok(vector)
    }
}

/// Cosine similarity; zero vectors score 0 against everything.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Options for [`chunk_document`].
#[derive(Debug, Clone, Copy)]
pub struct ChunkOptions {
    pub target_tokens: usize,
    pub overlap_tokens: usize,
    pub section_index: Option<u32>,
}

impl Default for ChunkOptions {
    fn default() -> Self {
        ChunkOptions { target_tokens: 200, overlap_tokens: 40, section_index: None }
    }
}

/// Splits a document into whitespace-token windows of `target_tokens`
/// with the stated overlap. The final chunk may be short; ordinals are
/// sequential and re-chunking identical text reproduces identical ids
/// and boundaries. Embeddings are left empty.
pub fn chunk_document(doc_id: &str, text: &str, options: ChunkOptions) -> Result<Vec<Chunk>, RetrievalError> {
    if options.overlap_tokens >= options.target_tokens {
        return Err(RetrievalError::BadChunking);
    }
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(RetrievalError::EmptyDocument);
    }
    let step = options.target_tokens - options.overlap_tokens;
    let mut chunks = Vec::new();
    let mut ordinal = 0usize;
    loop {
        let start = ordinal * step;
        let end = (start + options.target_tokens).min(tokens.len());
        chunks.push(Chunk {
            id: format!("{doc_id}#{ordinal:04}"),
            section_index: options.section_index,
            text: tokens[start..end].join(" "),
            embedding: Vec::new(),
        });
        if end == tokens.len() {
            break;
        }
        ordinal += 1;
    }
    Ok(chunks)
}

/// Exhaustive in-memory vector store with a JSON snapshot form:
/// `{"dimension": 64, "chunks": [...]}`.
#[derive(Debug, Clone, Serialize)]
pub struct VectorStore {
    dimension: usize,
    chunks: Vec<Chunk>,
    #[serde(skip)]
    ids: HashSet<String>,
}

#[derive(Deserialize)]
struct RawStore {
    dimension: usize,
    chunks: Vec<Chunk>,
}

impl<'de> Deserialize<'de> for VectorStore {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawStore::deserialize(deserializer)?;
        let mut store = VectorStore::new(raw.dimension);
        for chunk in raw.chunks {
            store.insert(chunk).map_err(serde::de::Error::custom)?;
        }
        Ok(store)
    }
}

impl VectorStore {
    pub fn new(dimension: usize) -> Self {
        VectorStore { dimension, chunks: Vec::new(), ids: HashSet::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn insert(&mut self, chunk: Chunk) -> Result<(), RetrievalError> {
        if chunk.embedding.len() != self.dimension {
            return Err(RetrievalError::DimensionMismatch { expected: self.dimension, found: chunk.embedding.len() });
        }
        if !self.ids.insert(chunk.id.clone()) {
            return Err(RetrievalError::DuplicateChunkId(chunk.id));
        }
        self.chunks.push(chunk);
        Ok(())
    }

    /// Chunks tagged with the given section, in id order.
    pub fn section_chunks(&self, section_index: u32) -> Vec<&Chunk> {
        let mut out: Vec<&Chunk> = self.chunks.iter().filter(|c| c.section_index == Some(section_index)).collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("store serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit<'a> {
    pub chunk: &'a Chunk,
    pub score: f64,
}

/// Top-k chunks by cosine similarity against the query text, exhaustively
/// scored. Ties rank by chunk id ascending so results are independent of
/// insertion order.
pub fn search<'a>(
    query: &str,
    store: &'a VectorStore,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<Vec<SearchHit<'a>>, RetrievalError> {
    if store.is_empty() {
        return Err(RetrievalError::EmptyStore);
    }
    let query_vec = embedder.embed(query)?;
    if query_vec.len() != store.dimension() {
        return Err(RetrievalError::DimensionMismatch { expected: store.dimension(), found: query_vec.len() });
    }
    let mut hits: Vec<SearchHit<'a>> = store
        .chunks()
        .iter()
        .map(|chunk| SearchHit { score: cosine(&query_vec, &chunk.embedding), chunk })
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("similarity scores are finite")
            .then_with(|| a.chunk.id.cmp(&b.chunk.id))
    });
    hits.truncate(k);
    Ok(hits)
}

pub const DEFAULT_GROUNDING_INSTRUCTIONS: &str =
    "Answer the question using only the context excerpts below. Cite excerpt ids where relevant.";

/// Deterministic grounded prompt: instructions, then excerpts in rank
/// order with their ids, then the question.
pub fn build_grounded_prompt(question: &str, chunks: &[&Chunk], instructions: &str) -> String {
    let mut out = String::from(instructions);
    out.push_str("\n\nContext:\n");
    for chunk in chunks {
        out.push_str(&format!("[{}] {}\n", chunk.id, chunk.text));
    }
    out.push_str(&format!("\nQuestion: {question}\n"));
    out
}
