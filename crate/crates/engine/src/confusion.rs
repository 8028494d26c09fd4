//! Per-section confusion scoring over post-lecture chat logs, and the
//! follow-up quiz plan it drives.
//!
//! Each user message is attributed to the lecture section whose text
//! profile it is most similar to (cosine over the configured embedder);
//! below [`ATTRIBUTION_THRESHOLD`] it lands in a general bucket. A
//! message's confusion signal saturates exponentially in its marker hits
//! and question marks:
//!
//! ```text
//! s(m) = 1 - exp(-(marker_hits + question_marks) / 2)
//! ```
//!
//! and a section's confusion is the mean over its attributed user
//! messages (0 with no messages).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EngineConfig, LectureDescriptor, LectureTimeline};
use crate::quiz::{largest_remainder, Difficulty, QuizMode, QuizPlan, SectionAllocation};
use crate::retrieval::{cosine, Embedder, RetrievalError};

/// Cosine similarity below which a message is not attributed to any section.
pub const ATTRIBUTION_THRESHOLD: f64 = 0.2;

#[derive(Debug, Error)]
pub enum ConfusionError {
    #[error("chat log line {line}: {detail}")]
    BadLine { line: usize, detail: String },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Author {
    User,
    Assistant,
}

/// One chat-log entry; `t_ms` is the wall-clock offset from session start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub t_ms: u64,
    pub author: Author,
    pub text: String,
}

/// Embedded representation of one section's descriptor text.
#[derive(Debug, Clone)]
pub struct SectionProfile {
    pub index: u32,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attribution {
    Section(u32),
    General,
}

/// Builds one profile per descriptor section from its title and text.
pub fn section_profiles(descriptor: &LectureDescriptor, embedder: &dyn Embedder) -> Result<Vec<SectionProfile>, RetrievalError> {
    descriptor
        .sections
        .iter()
        .map(|s| {
            let embedding = embedder.embed(&format!("{} {}", s.title, s.content_text))?;
            Ok(SectionProfile { index: s.index, embedding })
        })
        .collect()
}

/// Argmax-cosine attribution of a message to a section profile; ties go
/// to the lower section index, scores below the threshold to GENERAL.
pub fn attribute_message(
    text: &str,
    profiles: &[SectionProfile],
    embedder: &dyn Embedder,
) -> Result<Attribution, RetrievalError> {
    let query = embedder.embed(text)?;
    let mut best: Option<(f64, u32)> = None;
    for profile in profiles {
        let score = cosine(&query, &profile.embedding);
        let better = match best {
            Some((bs, _)) => score > bs,
            None => true,
        };
        if better {
            best = Some((score, profile.index));
        }
    }
    Ok(match best {
        Some((score, index)) if score >= ATTRIBUTION_THRESHOLD => Attribution::Section(index),
        _ => Attribution::General,
    })
}

/// Confusion signal of a single message given the marker lexicon.
/// Markers match case-insensitively as substrings.
pub fn message_score(text: &str, lexicon: &[String]) -> f64 {
    let lower = text.to_lowercase();
    let marker_hits: usize = lexicon.iter().map(|m| lower.matches(m.to_lowercase().as_str()).count()).sum();
    let question_marks = text.matches('?').count();
    1.0 - (-((marker_hits + question_marks) as f64) / 2.0).exp()
}

/// Mean confusion over a set of messages; empty input scores 0.
pub fn confusion_score(messages: &[&ChatMessage], lexicon: &[String]) -> f64 {
    if messages.is_empty() {
        return 0.0;
    }
    messages.iter().map(|m| message_score(&m.text, lexicon)).sum::<f64>() / messages.len() as f64
}

/// Hedges and non-understanding phrases used when no lexicon file is
/// configured. Prefix forms ("confus") match their inflections.
pub fn default_lexicon() -> Vec<String> {
    [
        "confus",
        "don't understand",
        "do not understand",
        "didn't understand",
        "don't get",
        "unclear",
        "not clear",
        "makes no sense",
        "doesn't make sense",
        "lost me",
        "i'm lost",
        "i am lost",
        "struggling",
        "no idea",
        "not sure",
        "can you explain",
        "could you explain",
        "explain again",
        "what does",
        "what is the difference",
        "why does",
        "how come",
        "huh",
    ]
    .into_iter()
    .map(str::to_string)
    .collect()
}

/// Parses a marker-lexicon file: a JSON array of strings.
pub fn parse_lexicon(text: &str) -> Result<Vec<String>, serde_json::Error> {
    serde_json::from_str(text)
}

/// Per-section confusion summary for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub session_id: String,
    pub sections: Vec<SectionConfusion>,
    pub general_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionConfusion {
    pub index: u32,
    pub confusion: f64,
    pub message_count: u32,
}

/// Scores the chat log: only nonempty USER messages participate; each is
/// attributed to a section (or the general bucket) and scored against
/// the lexicon.
pub fn build_confusion_report(
    session_id: &str,
    messages: &[ChatMessage],
    profiles: &[SectionProfile],
    embedder: &dyn Embedder,
    lexicon: &[String],
) -> Result<ConfusionReport, ConfusionError> {
    let mut buckets: Vec<Vec<&ChatMessage>> = vec![Vec::new(); profiles.len()];
    let mut general_count = 0u32;
    for message in messages {
        if message.author != Author::User || message.text.trim().is_empty() {
            continue;
        }
        match attribute_message(&message.text, profiles, embedder)? {
            Attribution::Section(index) => buckets[(index - 1) as usize].push(message),
            Attribution::General => general_count += 1,
        }
    }
    let sections = profiles
        .iter()
        .zip(&buckets)
        .map(|(profile, bucket)| SectionConfusion {
            index: profile.index,
            confusion: confusion_score(bucket, lexicon),
            message_count: bucket.len() as u32,
        })
        .collect();
    Ok(ConfusionReport { session_id: session_id.to_string(), sections, general_count })
}

/// Follow-up quiz allocation weighted by per-section confusion; all-zero
/// confusion falls back to a uniform split.
pub fn chatquiz_plan(report: &ConfusionReport, timeline: &LectureTimeline, config: &EngineConfig) -> QuizPlan {
    let mut weights: Vec<f64> = timeline
        .sections()
        .iter()
        .map(|s| {
            report
                .sections
                .iter()
                .find(|c| c.index == s.index)
                .map(|c| c.confusion)
                .unwrap_or(0.0)
        })
        .collect();
    if weights.iter().all(|&w| w == 0.0) {
        weights = vec![1.0; weights.len()];
    }
    let counts = largest_remainder(&weights, config.question_count);
    QuizPlan {
        session_id: report.session_id.clone(),
        mode: QuizMode::Attentive,
        difficulty: Difficulty::Medium,
        total: config.question_count,
        allocation: timeline
            .sections()
            .iter()
            .zip(&counts)
            .map(|(s, &count)| SectionAllocation { section_index: s.index, count })
            .collect(),
    }
}

/// Parses a JSON-lines chat log (`{"t_ms":..,"author":"user","text":".."}`
/// per line).
pub fn parse_chat_log(text: &str) -> Result<Vec<ChatMessage>, ConfusionError> {
    let mut messages = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let message: ChatMessage =
            serde_json::from_str(line).map_err(|e| ConfusionError::BadLine { line: i + 1, detail: e.to_string() })?;
        messages.push(message);
    }
    Ok(messages)
}

/// Serializes one chat message as a JSON-lines row.
pub fn chat_log_line(message: &ChatMessage) -> String {
    serde_json::to_string(message).expect("message serialization is infallible")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_timeline, SectionInfo};
    use crate::retrieval::HashEmbedder;

    fn descriptor() -> LectureDescriptor {
        let topics = [
            "probability axioms sample spaces events",
            "conditional probability independence chain rule",
            "bayes rule prior likelihood posterior evidence",
            "binomial model conjugate beta distribution",
            "normal model unknown mean variance",
            "hierarchical models partial pooling shrinkage",
        ];
        LectureDescriptor {
            lecture_id: "bayes-1".into(),
            duration_ms: 1_200_000,
            sections: topics
                .iter()
                .enumerate()
                .map(|(i, t)| SectionInfo {
                    index: (i + 1) as u32,
                    start_ms: i as u64 * 200_000,
                    end_ms: (i as u64 + 1) * 200_000,
                    title: format!("Section {}", i + 1),
                    content_text: t.to_string(),
                })
                .collect(),
            aois: vec![],
        }
    }

    fn user(t_ms: u64, text: &str) -> ChatMessage {
        ChatMessage { t_ms, author: Author::User, text: text.to_string() }
    }

    #[test]
    fn verbatim_keywords_attribute_to_their_section() {
        let descriptor = descriptor();
        let embedder = HashEmbedder::default();
        let profiles = section_profiles(&descriptor, &embedder).unwrap();
        let got = attribute_message("bayes rule prior likelihood posterior evidence", &profiles, &embedder).unwrap();
        assert_eq!(got, Attribution::Section(3));
    }

    #[test]
    fn empty_message_goes_to_general() {
        let descriptor = descriptor();
        let embedder = HashEmbedder::default();
        let profiles = section_profiles(&descriptor, &embedder).unwrap();
        assert_eq!(attribute_message("", &profiles, &embedder).unwrap(), Attribution::General);
        assert_eq!(attribute_message("???", &profiles, &embedder).unwrap(), Attribution::General);
    }

    #[test]
    fn synthetic_messages_match_exhaustive_similarity_oracle() {
        let descriptor = descriptor();
        let embedder = HashEmbedder::default();
        let profiles = section_profiles(&descriptor, &embedder).unwrap();
        let vocab = [
            "probability", "sample", "conditional", "independence", "bayes", "prior", "posterior",
            "binomial", "beta", "normal", "variance", "hierarchical", "pooling", "what", "why",
        ];
        for i in 0..50usize {
            let text: Vec<&str> = (0..6).map(|j| vocab[(i * 7 + j * 3) % vocab.len()]).collect();
            let text = text.join(" ");
            let got = attribute_message(&text, &profiles, &embedder).unwrap();
            // Oracle: score every profile explicitly, first maximum wins.
            let q = embedder.embed(&text).unwrap();
            let mut best_score = f64::NEG_INFINITY;
            let mut best_index = 0;
            for p in &profiles {
                let s = cosine(&q, &p.embedding);
                if s > best_score {
                    best_score = s;
                    best_index = p.index;
                }
            }
            let expected = if best_score >= ATTRIBUTION_THRESHOLD {
                Attribution::Section(best_index)
            } else {
                Attribution::General
            };
            assert_eq!(got, expected, "message {i}: {text}");
        }
    }

    #[test]
    fn attribution_is_permutation_invariant() {
        let descriptor = descriptor();
        let embedder = HashEmbedder::default();
        let profiles = section_profiles(&descriptor, &embedder).unwrap();
        let lexicon = default_lexicon();
        let messages = vec![
            user(0, "why does the posterior shrink?"),
            user(10, "unclear about conditional independence"),
            user(20, "beta binomial conjugacy makes no sense?"),
        ];
        let mut reversed = messages.clone();
        reversed.reverse();
        let a = build_confusion_report("s", &messages, &profiles, &embedder, &lexicon).unwrap();
        let b = build_confusion_report("s", &reversed, &profiles, &embedder, &lexicon).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn score_point_checks() {
        let lexicon = default_lexicon();
        assert_eq!(confusion_score(&[], &lexicon), 0.0);

        let calm = user(0, "thanks, that helped a lot");
        assert_eq!(message_score(&calm.text, &lexicon), 0.0);

        // Two marker hits ("confus", "unclear") plus one question mark.
        let confused = user(0, "I am confused and this is unclear, can we revisit it?");
        let got = message_score(&confused.text, &lexicon);
        let expected = 1.0 - (-1.5f64).exp();
        assert!((got - expected).abs() < 1e-9, "got {got}, expected {expected}");
        assert!((expected - 0.7769).abs() < 1e-4);
    }

    #[test]
    fn score_is_weakly_increasing_in_hits_and_question_marks() {
        let lexicon = default_lexicon();
        let mut previous_row = None;
        for hits in 0..6usize {
            let mut previous = None;
            for qs in 0..6usize {
                let text = format!("{} {}", "confusing ".repeat(hits), "?".repeat(qs));
                let s = message_score(&text, &lexicon);
                assert!((0.0..=1.0).contains(&s));
                if let Some(p) = previous {
                    assert!(s >= p);
                }
                previous = Some(s);
            }
            if let Some(p) = previous_row {
                let s = message_score(&"confusing ".repeat(hits).to_string(), &lexicon);
                assert!(s >= p);
            }
            previous_row = Some(message_score(&"confusing ".repeat(hits).to_string(), &lexicon));
        }
    }

    #[test]
    fn assistant_messages_are_ignored() {
        let descriptor = descriptor();
        let embedder = HashEmbedder::default();
        let profiles = section_profiles(&descriptor, &embedder).unwrap();
        let messages = vec![ChatMessage {
            t_ms: 0,
            author: Author::Assistant,
            text: "bayes rule prior likelihood posterior evidence?".into(),
        }];
        let report = build_confusion_report("s", &messages, &profiles, &embedder, &default_lexicon()).unwrap();
        assert!(report.sections.iter().all(|s| s.message_count == 0 && s.confusion == 0.0));
        assert_eq!(report.general_count, 0);
    }

    fn six_section_timeline() -> LectureTimeline {
        let raw: Vec<(u64, u64)> = (0..6).map(|i| (i * 200_000, (i + 1) * 200_000)).collect();
        validate_timeline("bayes-1", &raw, 1_200_000).unwrap()
    }

    fn report_from(confusion: &[f64]) -> ConfusionReport {
        ConfusionReport {
            session_id: "s".into(),
            sections: confusion
                .iter()
                .enumerate()
                .map(|(i, &c)| SectionConfusion { index: (i + 1) as u32, confusion: c, message_count: 1 })
                .collect(),
            general_count: 0,
        }
    }

    #[test]
    fn chatquiz_single_positive_weight_takes_all() {
        let plan = chatquiz_plan(&report_from(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]), &six_section_timeline(), &EngineConfig::default());
        let counts: Vec<u32> = plan.allocation.iter().map(|a| a.count).collect();
        assert_eq!(counts, vec![0, 0, 6, 0, 0, 0]);
    }

    #[test]
    fn chatquiz_uniform_cases() {
        let config = EngineConfig::default();
        let uniform = chatquiz_plan(&report_from(&[0.4; 6]), &six_section_timeline(), &config);
        let zero = chatquiz_plan(&report_from(&[0.0; 6]), &six_section_timeline(), &config);
        let counts = |p: &QuizPlan| p.allocation.iter().map(|a| a.count).collect::<Vec<u32>>();
        assert_eq!(counts(&uniform), vec![1; 6]);
        assert_eq!(counts(&zero), vec![1; 6]);
    }

    #[test]
    fn chatquiz_matches_hand_computed_largest_remainder() {
        // Weights [0.8, 0.1, 0.1, 0.4, 0.0, 0.2]: sum 1.6, quotas
        // [3.0, 0.375, 0.375, 1.5, 0.0, 0.75] -> floors [3,0,0,1,0,0],
        // leftovers 2 go to remainders 0.75 (s6) and 0.5 (s4).
        let plan = chatquiz_plan(&report_from(&[0.8, 0.1, 0.1, 0.4, 0.0, 0.2]), &six_section_timeline(), &EngineConfig::default());
        let counts: Vec<u32> = plan.allocation.iter().map(|a| a.count).collect();
        assert_eq!(counts, vec![3, 0, 0, 2, 0, 1]);
        assert_eq!(counts.iter().sum::<u32>(), 6);
    }

    #[test]
    fn chat_log_roundtrip_and_errors() {
        let messages = vec![
            user(5, "why does this work?"),
            ChatMessage { t_ms: 9, author: Author::Assistant, text: "because".into() },
        ];
        let text: String = messages.iter().map(|m| chat_log_line(m) + "\n").collect();
        assert_eq!(parse_chat_log(&text).unwrap(), messages);
        assert!(text.contains("\"author\":\"user\""));

        let err = parse_chat_log("{\"t_ms\":1,\"author\":\"user\",\"text\":\"x\"}\nnot json\n").unwrap_err();
        assert!(matches!(err, ConfusionError::BadLine { line: 2, .. }));
    }
}
