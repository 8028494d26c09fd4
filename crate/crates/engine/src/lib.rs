//! Gaze-analytics and adaptive-quiz engine for section-structured lectures.
//!
//! The pipeline turns raw eye-tracking logs into per-section attention
//! metrics and uses them to drive personalized quizzes, grounded Q&A and
//! confusion-scored follow-ups:
//!
//! ```text
//! gaze CSV ──ingest──▶ samples ──geometry──▶ labels ──metrics──▶ report
//!                                                                  │
//!            chat log ──confusion──▶ plan ◀──quiz──────────────────┘
//!                                      │
//!                        adapter ◀─────┴────▶ items, grades
//! ```
//!
//! Everything is deterministic given its inputs and seeds; the HTTP
//! service and CLI are thin shells over this crate. The accompanying
//! guide in `book/` walks through each stage with runnable snippets.

pub mod adapter;
pub mod confusion;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod quiz;
pub mod retrieval;
pub mod simulate;
pub mod vec3;

mod book;

pub use adapter::{AdapterError, HttpAdapter, LlmAdapter, MockAdapter};
pub use geometry::{label_samples, LabeledSample};
pub use ingest::{parse_gaze_csv, IngestOptions, IngestStats, LogMode};
pub use metrics::{build_report, AttentionReport, SectionMetrics};
pub use model::{
    validate_timeline, AoiDefinition, AoiSet, AoiShape, EngineConfig, GazeSample, LectureDescriptor,
    LectureTimeline, ModelError, AWAY_LABEL,
};
pub use quiz::{allocate_questions, allocate_random, generate_quiz, grade, QuizItem, QuizPlan};
pub use retrieval::{chunk_document, search, Chunk, Embedder, HashEmbedder, VectorStore};
pub use simulate::{simulate, AttentionProfile, SimMode};
pub use vec3::Vec3;
