//! Shared service state: loaded lecture descriptors, the adapter and
//! embedder instances, the knowledge base and the session store.

use std::collections::HashMap;
use std::sync::Arc;

use lectern_engine::adapter::{HttpAdapter, LlmAdapter, MockAdapter};
use lectern_engine::confusion::default_lexicon;
use lectern_engine::model::SharedDescriptor;
use lectern_engine::retrieval::{chunk_document, ChunkOptions, Embedder, HashEmbedder, HttpEmbedder, VectorStore};
use lectern_engine::{EngineConfig, LectureDescriptor};
use thiserror::Error;

use crate::config::{AdapterConfig, EmbedderConfig, ServiceConfig};
use crate::store::SessionStore;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("io error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("bad lecture descriptor {path}: {detail}")]
    BadDescriptor { path: String, detail: String },
    #[error("duplicate lecture id {0:?}")]
    DuplicateLecture(String),
    #[error("bad knowledge base: {0}")]
    BadKnowledgeBase(String),
}

fn read(path: &std::path::Path) -> Result<String, ServiceError> {
    std::fs::read_to_string(path).map_err(|source| ServiceError::Io { path: path.display().to_string(), source })
}

pub struct ServiceState {
    pub engine: EngineConfig,
    pub lectures: HashMap<String, SharedDescriptor>,
    pub adapter: Arc<dyn LlmAdapter>,
    pub embedder: Arc<dyn Embedder>,
    pub kb: Arc<VectorStore>,
    pub lexicon: Arc<Vec<String>>,
    pub chat_top_k: usize,
    pub store: SessionStore,
}

pub type SharedState = Arc<ServiceState>;

impl ServiceState {
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ServiceError> {
        config.engine.validate().map_err(|e| ServiceError::BadConfig(e.to_string()))?;

        let mut lectures: HashMap<String, SharedDescriptor> = HashMap::new();
        let entries = std::fs::read_dir(&config.lecture_dir)
            .map_err(|source| ServiceError::Io { path: config.lecture_dir.display().to_string(), source })?;
        for entry in entries {
            let path = entry.map_err(|source| ServiceError::Io { path: config.lecture_dir.display().to_string(), source })?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let descriptor = LectureDescriptor::from_json(&read(&path)?)
                .map_err(|detail| ServiceError::BadDescriptor { path: path.display().to_string(), detail })?;
            let id = descriptor.lecture_id.clone();
            if lectures.insert(id.clone(), Arc::new(descriptor)).is_some() {
                return Err(ServiceError::DuplicateLecture(id));
            }
        }

        let adapter: Arc<dyn LlmAdapter> = match &config.adapter {
            AdapterConfig::Mock => Arc::new(MockAdapter),
            AdapterConfig::Http { generate_url, grade_url, complete_url } => {
                Arc::new(HttpAdapter::new(generate_url.clone(), grade_url.clone(), complete_url.clone()))
            }
        };
        let embedder: Arc<dyn Embedder> = match &config.embedder {
            EmbedderConfig::Hash => Arc::new(HashEmbedder::default()),
            EmbedderConfig::Http { url, dimension } => Arc::new(HttpEmbedder::new(url.clone(), *dimension)),
        };

        let kb = match &config.knowledge_base {
            Some(path) => VectorStore::from_json(&read(path)?)
                .map_err(|e| ServiceError::BadKnowledgeBase(e.to_string()))?,
            None => build_kb_from_lectures(&lectures, embedder.as_ref())?,
        };
        if kb.dimension() != embedder.dimension() {
            return Err(ServiceError::BadKnowledgeBase(format!(
                "knowledge base dimension {} does not match embedder dimension {}",
                kb.dimension(),
                embedder.dimension()
            )));
        }

        let lexicon = match &config.lexicon {
            Some(path) => lectern_engine::confusion::parse_lexicon(&read(path)?)
                .map_err(|e| ServiceError::BadConfig(format!("lexicon: {e}")))?,
            None => default_lexicon(),
        };

        let store = SessionStore::open(&config.data_dir)
            .map_err(|source| ServiceError::Io { path: config.data_dir.display().to_string(), source })?;

        Ok(ServiceState {
            engine: config.engine.clone(),
            lectures,
            adapter,
            embedder,
            kb: Arc::new(kb),
            lexicon: Arc::new(lexicon),
            chat_top_k: config.chat_top_k.max(1),
            store,
        })
    }
}

/// Default knowledge base: every descriptor section's text, chunked and
/// embedded, tagged with its section index.
fn build_kb_from_lectures(
    lectures: &HashMap<String, SharedDescriptor>,
    embedder: &dyn Embedder,
) -> Result<VectorStore, ServiceError> {
    let mut kb = VectorStore::new(embedder.dimension());
    let mut ids: Vec<&String> = lectures.keys().collect();
    ids.sort();
    for id in ids {
        let descriptor = &lectures[id];
        for section in &descriptor.sections {
            if section.content_text.trim().is_empty() {
                continue;
            }
            let options = ChunkOptions { section_index: Some(section.index), ..ChunkOptions::default() };
            let chunks = chunk_document(&format!("{id}-s{}", section.index), &section.content_text, options)
                .map_err(|e| ServiceError::BadKnowledgeBase(e.to_string()))?;
            for mut chunk in chunks {
                chunk.embedding = embedder
                    .embed(&chunk.text)
                    .map_err(|e| ServiceError::BadKnowledgeBase(e.to_string()))?;
                kb.insert(chunk).map_err(|e| ServiceError::BadKnowledgeBase(e.to_string()))?;
            }
        }
    }
    Ok(kb)
}
