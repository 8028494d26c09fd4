//! Service configuration file (JSON).
//!
//! ```json
//! {
//!   "listen_addr": "127.0.0.1:8080",
//!   "lecture_dir": "lectures",
//!   "data_dir": "data",
//!   "adapter": "mock",
//!   "embedder": "hash",
//!   "knowledge_base": "kb.json",
//!   "lexicon": "lexicon.json",
//!   "engine": {"question_count": 6}
//! }
//! ```
//!
//! `adapter` is either the string `"mock"` or
//! `{"generate_url": .., "grade_url": .., "complete_url": ..}`;
//! `embedder` is `"hash"` or `{"url": .., "dimension": ..}`.

use std::path::PathBuf;

use lectern_engine::EngineConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen_addr: String,
    pub lecture_dir: PathBuf,
    pub data_dir: PathBuf,
    #[serde(default)]
    pub adapter: AdapterConfig,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default)]
    pub knowledge_base: Option<PathBuf>,
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default = "default_chat_top_k")]
    pub chat_top_k: usize,
    #[serde(default)]
    pub engine: EngineConfig,
}

fn default_listen() -> String {
    "127.0.0.1:8080".to_string()
}

fn default_chat_top_k() -> usize {
    4
}

#[derive(Debug, Clone, Default)]
pub enum AdapterConfig {
    #[default]
    Mock,
    Http {
        generate_url: String,
        grade_url: String,
        complete_url: String,
    },
}

impl<'de> Deserialize<'de> for AdapterConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Http { generate_url: String, grade_url: String, complete_url: String },
        }
        match Raw::deserialize(deserializer)? {
            Raw::Name(name) if name == "mock" => Ok(AdapterConfig::Mock),
            Raw::Name(other) => Err(serde::de::Error::custom(format!(
                "unknown adapter {other:?}; expected \"mock\" or an endpoint object"
            ))),
            Raw::Http { generate_url, grade_url, complete_url } => {
                Ok(AdapterConfig::Http { generate_url, grade_url, complete_url })
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub enum EmbedderConfig {
    #[default]
    Hash,
    Http {
        url: String,
        dimension: usize,
    },
}

impl<'de> Deserialize<'de> for EmbedderConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Http { url: String, dimension: usize },
        }
        match Raw::deserialize(deserializer)? {
            Raw::Name(name) if name == "hash" => Ok(EmbedderConfig::Hash),
            Raw::Name(other) => Err(serde::de::Error::custom(format!(
                "unknown embedder {other:?}; expected \"hash\" or an endpoint object"
            ))),
            Raw::Http { url, dimension } => Ok(EmbedderConfig::Http { url, dimension }),
        }
    }
}

impl ServiceConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config = ServiceConfig::from_json(r#"{"lecture_dir": "lec", "data_dir": "data"}"#).unwrap();
        assert_eq!(config.listen_addr, "127.0.0.1:8080");
        assert!(matches!(config.adapter, AdapterConfig::Mock));
        assert!(matches!(config.embedder, EmbedderConfig::Hash));
        assert_eq!(config.chat_top_k, 4);
        assert_eq!(config.engine, EngineConfig::default());
    }

    #[test]
    fn http_adapter_and_overrides() {
        let config = ServiceConfig::from_json(
            r#"{
                "lecture_dir": "lec", "data_dir": "data",
                "adapter": {"generate_url": "http://a/g", "grade_url": "http://a/r", "complete_url": "http://a/c"},
                "embedder": {"url": "http://e", "dimension": 384},
                "engine": {"question_count": 4}
            }"#,
        )
        .unwrap();
        assert!(matches!(config.adapter, AdapterConfig::Http { .. }));
        assert!(matches!(config.embedder, EmbedderConfig::Http { dimension: 384, .. }));
        assert_eq!(config.engine.question_count, 4);
        assert!(ServiceConfig::from_json(r#"{"lecture_dir": "l", "data_dir": "d", "adapter": "gpt"}"#).is_err());
    }
}
