//! The text-generation adapter boundary.
//!
//! The engine never embeds a model. Quiz generation, short-answer grading
//! and chat answering all go through [`LlmAdapter`]; a deterministic
//! [`MockAdapter`] ships for tests and offline runs, and [`HttpAdapter`]
//! speaks the JSON wire contract below to a remote endpoint:
//!
//! - `POST {generate_url}`: `{"prompt": "...", "max_items": 6}` →
//!   `{"items": [{"section_index": 3, "kind": "MCQ", "stem": "...",
//!   "options": ["..."], "answer_key": "..."}]}`
//! - `POST {grade_url}`: `{"stem": "...", "answer_key": "...",
//!   "response": "..."}` → `{"correct": true, "score": 1.0,
//!   "rationale": "..."}`
//! - `POST {complete_url}`: `{"prompt": "..."}` → `{"answer": "..."}`

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quiz::QuizKind;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter transport failure: {0}")]
    Transport(String),
    #[error("adapter returned HTTP {status}")]
    Status { status: u16 },
    #[error("adapter response malformed: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_items: u32,
}

/// One generated quiz item as it crosses the wire (no engine-side id yet).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireQuizItem {
    pub section_index: u32,
    pub kind: QuizKind,
    pub stem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    pub answer_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub items: Vec<WireQuizItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradingRequest {
    pub stem: String,
    pub answer_key: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradingResponse {
    pub correct: bool,
    pub score: f64,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub answer: String,
}

pub trait LlmAdapter: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, AdapterError>;
    fn grade(&self, request: &GradingRequest) -> Result<GradingResponse, AdapterError>;
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, AdapterError>;
}

/// Case- and whitespace-insensitive comparison form for graded answers.
pub fn normalize_answer(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

// ---------------------------------------------------------------------------
// Mock adapter
// ---------------------------------------------------------------------------

/// Marker line the prompt builder embeds so template-filling adapters can
/// read the plan without natural-language parsing.
pub const PLAN_MARKER: &str = "PLAN_JSON: ";

/// Machine-readable plan block embedded in generation prompts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptPlan {
    pub difficulty: String,
    pub sections: Vec<PromptSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptSection {
    pub section_index: u32,
    pub count: u32,
    pub topic: String,
}

/// Deterministic template-filling adapter: same prompt, same bytes out.
#[derive(Debug, Default, Clone)]
pub struct MockAdapter;

impl MockAdapter {
    fn plan_from_prompt(prompt: &str) -> Result<PromptPlan, AdapterError> {
        let line = prompt
            .lines()
            .find_map(|l| l.strip_prefix(PLAN_MARKER))
            .ok_or_else(|| AdapterError::Protocol("prompt carries no plan block".into()))?;
        serde_json::from_str(line).map_err(|e| AdapterError::Protocol(e.to_string()))
    }
}

const OPTION_LETTERS: [&str; 4] = ["A", "B", "C", "D"];

impl LlmAdapter for MockAdapter {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, AdapterError> {
        let plan = Self::plan_from_prompt(&request.prompt)?;
        let mut items = Vec::new();
        'sections: for section in &plan.sections {
            for ordinal in 0..section.count {
                let item = if ordinal % 2 == 1 {
                    WireQuizItem {
                        section_index: section.section_index,
                        kind: QuizKind::ShortAnswer,
                        stem: format!(
                            "In one sentence, state what section {} of the lecture says about {}.",
                            section.section_index, section.topic
                        ),
                        options: None,
                        answer_key: format!("{} as presented in section {}", section.topic, section.section_index),
                    }
                } else {
                    let options: Vec<String> = OPTION_LETTERS
                        .iter()
                        .map(|letter| format!("Claim {letter} about {}", section.topic))
                        .collect();
                    let key = options[((section.section_index + ordinal) % 4) as usize].clone();
                    WireQuizItem {
                        section_index: section.section_index,
                        kind: QuizKind::Mcq,
                        stem: format!(
                            "Which claim about {} is supported by section {} of the lecture? ({})",
                            section.topic,
                            section.section_index,
                            plan.difficulty
                        ),
                        options: Some(options),
                        answer_key: key,
                    }
                };
                items.push(item);
                if items.len() as u32 >= request.max_items {
                    break 'sections;
                }
            }
        }
        Ok(GenerationResponse { items })
    }

    fn grade(&self, request: &GradingRequest) -> Result<GradingResponse, AdapterError> {
        let correct = normalize_answer(&request.response) == normalize_answer(&request.answer_key);
        Ok(GradingResponse {
            correct,
            score: if correct { 1.0 } else { 0.0 },
            rationale: if correct {
                "response matches the expected answer".to_string()
            } else {
                "response does not match the expected answer".to_string()
            },
        })
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, AdapterError> {
        // Echo-style grounded answer: cite the chunk ids found in the prompt.
        let ids: Vec<&str> = request
            .prompt
            .lines()
            .filter_map(|l| {
                let l = l.trim_start();
                let inner = l.strip_prefix('[')?;
                inner.split_once(']').map(|(id, _)| id)
            })
            .collect();
        let question = request
            .prompt
            .lines()
            .rev()
            .find_map(|l| l.strip_prefix("Question: "))
            .unwrap_or("")
            .to_string();
        let answer = if ids.is_empty() {
            format!("No grounding material was provided for: {question}")
        } else {
            format!("Based on {}, the lecture material addresses this directly: {question}", ids.join(", "))
        };
        Ok(CompletionResponse { answer })
    }
}

// ---------------------------------------------------------------------------
// HTTP adapter
// ---------------------------------------------------------------------------

pub(crate) fn post_json<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
    agent: &ureq::Agent,
    url: &str,
    request: &Req,
) -> Result<Resp, AdapterError> {
    let response = agent
        .post(url)
        .send_json(serde_json::to_value(request).map_err(|e| AdapterError::Protocol(e.to_string()))?);
    match response {
        Ok(resp) => resp.into_json().map_err(|e| AdapterError::Protocol(e.to_string())),
        Err(ureq::Error::Status(status, _)) => Err(AdapterError::Status { status }),
        Err(ureq::Error::Transport(t)) => Err(AdapterError::Transport(t.to_string())),
    }
}

/// Adapter speaking the wire contract to remote HTTP endpoints.
pub struct HttpAdapter {
    agent: ureq::Agent,
    generate_url: String,
    grade_url: String,
    complete_url: String,
}

impl HttpAdapter {
    pub fn new(generate_url: impl Into<String>, grade_url: impl Into<String>, complete_url: impl Into<String>) -> Self {
        HttpAdapter {
            agent: ureq::AgentBuilder::new()
                .timeout(std::time::Duration::from_secs(60))
                .build(),
            generate_url: generate_url.into(),
            grade_url: grade_url.into(),
            complete_url: complete_url.into(),
        }
    }

    /// Conventional endpoints under one base URL: `{base}/generate`,
    /// `{base}/grade`, `{base}/complete`.
    pub fn from_base_url(base: &str) -> Self {
        let base = base.trim_end_matches('/');
        Self::new(format!("{base}/generate"), format!("{base}/grade"), format!("{base}/complete"))
    }
}

impl LlmAdapter for HttpAdapter {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, AdapterError> {
        post_json(&self.agent, &self.generate_url, request)
    }

    fn grade(&self, request: &GradingRequest) -> Result<GradingResponse, AdapterError> {
        post_json(&self.agent, &self.grade_url, request)
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, AdapterError> {
        post_json(&self.agent, &self.complete_url, request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    #[test]
    fn normalize_answer_folds_case_and_whitespace() {
        assert_eq!(normalize_answer("  Bayes   Rule "), "bayes rule");
        assert_eq!(normalize_answer(" b "), "b");
    }

    #[test]
    fn mock_generation_is_deterministic() {
        let plan = PromptPlan {
            difficulty: "medium".into(),
            sections: vec![
                PromptSection { section_index: 3, count: 2, topic: "posterior updating".into() },
                PromptSection { section_index: 5, count: 1, topic: "hierarchical models".into() },
            ],
        };
        let prompt = format!("header\n{PLAN_MARKER}{}\n", serde_json::to_string(&plan).unwrap());
        let request = GenerationRequest { prompt, max_items: 3 };
        let a = MockAdapter.generate(&request).unwrap();
        let b = MockAdapter.generate(&request).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.items.len(), 3);
        assert_eq!(a.items[0].kind, QuizKind::Mcq);
        assert_eq!(a.items[1].kind, QuizKind::ShortAnswer);
        let opts = a.items[0].options.as_ref().unwrap();
        assert!(opts.contains(&a.items[0].answer_key));
    }

    #[test]
    fn mock_rejects_planless_prompt() {
        let request = GenerationRequest { prompt: "just text".into(), max_items: 1 };
        assert!(matches!(MockAdapter.generate(&request), Err(AdapterError::Protocol(_))));
    }

    #[test]
    fn mock_grading_normalizes() {
        let response = MockAdapter
            .grade(&GradingRequest { stem: "s".into(), answer_key: "B".into(), response: " b ".into() })
            .unwrap();
        assert!(response.correct);
        assert_eq!(response.score, 1.0);
    }

    #[test]
    fn mock_completion_cites_chunk_ids() {
        let prompt = "Answer with the context.\n\nContext:\n[doc#0001] Bayes rule combines priors.\n\nQuestion: What is a prior?";
        let response = MockAdapter.complete(&CompletionRequest { prompt: prompt.into() }).unwrap();
        assert!(response.answer.contains("doc#0001"));
        assert!(response.answer.contains("What is a prior?"));
    }

    /// One-shot HTTP stub: accepts a single request and replies with the
    /// canned JSON body.
    fn stub_server(body: &'static str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            if let Ok((mut stream, _)) = listener.accept() {
                let mut buf = [0u8; 8192];
                let _ = stream.read(&mut buf);
                let response = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                    body.len(),
                    body
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        format!("http://{addr}")
    }

    #[test]
    fn http_adapter_speaks_the_wire_contract() {
        let base = stub_server(r#"{"items":[{"section_index":2,"kind":"MCQ","stem":"?","options":["a","b"],"answer_key":"a"}]}"#);
        let adapter = HttpAdapter::from_base_url(&base);
        let response = adapter
            .generate(&GenerationRequest { prompt: "p".into(), max_items: 1 })
            .unwrap();
        assert_eq!(response.items.len(), 1);
        assert_eq!(response.items[0].section_index, 2);

        let base = stub_server(r#"{"correct":false,"score":0.0,"rationale":"no"}"#);
        let adapter = HttpAdapter::from_base_url(&base);
        let grade = adapter
            .grade(&GradingRequest { stem: "s".into(), answer_key: "k".into(), response: "r".into() })
            .unwrap();
        assert!(!grade.correct);

        let base = stub_server(r#"{"answer":"forty-two"}"#);
        let adapter = HttpAdapter::from_base_url(&base);
        let completion = adapter.complete(&CompletionRequest { prompt: "p".into() }).unwrap();
        assert_eq!(completion.answer, "forty-two");
    }

    #[test]
    fn http_adapter_maps_transport_and_status_errors() {
        // Nothing listens on this port (bound then dropped).
        let addr = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap()
        };
        let adapter = HttpAdapter::from_base_url(&format!("http://{addr}"));
        assert!(matches!(
            adapter.complete(&CompletionRequest { prompt: "p".into() }),
            Err(AdapterError::Transport(_))
        ));
    }
}
