//! Quiz planning, prompt assembly, generation and grading.
//!
//! Personalization apportions questions to sections by attention deficit
//! (1 − ADI) using largest-remainder allocation: quotas
//! `q_k = total · d_k / Σd` over valid sections, floors assigned first,
//! leftovers by descending fractional remainder with ties to the lower
//! section index. The control mode assigns sections uniformly at random
//! from a seeded generator.

use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::{
    AdapterError, GenerationRequest, GradingRequest, LlmAdapter, PromptPlan, PromptSection, WireQuizItem,
    normalize_answer, PLAN_MARKER,
};
use crate::metrics::AttentionReport;
use crate::model::{EngineConfig, LectureDescriptor, LectureTimeline};
use crate::retrieval::{chunk_document, Chunk, ChunkOptions};

/// Generation retries after a malformed adapter response.
pub const GENERATION_RETRY_BUDGET: u32 = 2;
/// Grounding chunks attached per targeted section.
pub const GROUNDING_CHUNKS_PER_SECTION: usize = 2;

#[derive(Debug, Error)]
pub enum QuizError {
    #[error("report has no valid section to personalize against")]
    NoValidSection,
    #[error("quiz plan allocates zero questions")]
    EmptyPlan,
    #[error("section {0} has no grounding material")]
    MissingGrounding(u32),
    #[error("section {0} is not part of the lecture")]
    UnknownSection(u32),
    #[error("adapter kept returning malformed items: {0}")]
    MalformedGeneration(String),
    #[error("graded response is empty")]
    EmptyResponse,
    #[error("adapter grade is out of range: {0}")]
    MalformedGrade(f64),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum QuizMode {
    Attentive,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn as_str(&self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuizKind {
    #[serde(rename = "MCQ")]
    Mcq,
    #[serde(rename = "SHORT_ANSWER")]
    ShortAnswer,
}

/// Per-section question allocation for one quiz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionAllocation {
    pub section_index: u32,
    pub count: u32,
}

/// How many questions each section receives. Every timeline section
/// appears exactly once; counts sum to `total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizPlan {
    pub session_id: String,
    pub mode: QuizMode,
    pub difficulty: Difficulty,
    pub total: u32,
    pub allocation: Vec<SectionAllocation>,
}

impl QuizPlan {
    pub fn with_difficulty(mut self, difficulty: Difficulty) -> Self {
        self.difficulty = difficulty;
        self
    }

    pub fn count_for(&self, section_index: u32) -> Option<u32> {
        self.allocation.iter().find(|a| a.section_index == section_index).map(|a| a.count)
    }

    /// Sections receiving at least one question, ascending.
    pub fn targeted_sections(&self) -> impl Iterator<Item = &SectionAllocation> {
        self.allocation.iter().filter(|a| a.count > 0)
    }

    pub fn validate(&self) -> Result<(), QuizError> {
        let sum: u32 = self.allocation.iter().map(|a| a.count).sum();
        if sum != self.total {
            return Err(QuizError::MalformedGeneration(format!(
                "allocation sums to {sum}, plan total is {}",
                self.total
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// A generated question with its answer key and grounding provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizItem {
    pub id: String,
    pub section_index: u32,
    pub kind: QuizKind,
    pub stem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    pub answer_key: String,
    #[serde(default)]
    pub grounding_chunk_ids: Vec<String>,
}

impl QuizItem {
    fn from_wire(id: String, wire: WireQuizItem, grounding_chunk_ids: Vec<String>) -> Result<Self, String> {
        if wire.stem.trim().is_empty() {
            return Err("empty stem".into());
        }
        match wire.kind {
            QuizKind::Mcq => {
                let options = wire.options.as_ref().ok_or("MCQ without options")?;
                if options.len() < 2 {
                    return Err(format!("MCQ with {} option(s)", options.len()));
                }
                if !options.contains(&wire.answer_key) {
                    return Err("MCQ answer key is not among the options".into());
                }
            }
            QuizKind::ShortAnswer => {}
        }
        Ok(QuizItem {
            id,
            section_index: wire.section_index,
            kind: wire.kind,
            stem: wire.stem,
            options: wire.options,
            answer_key: wire.answer_key,
            grounding_chunk_ids,
        })
    }
}

/// Outcome of grading one response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeResult {
    pub item_id: String,
    pub correct: bool,
    pub score: f64,
    pub rationale: String,
}

// ---------------------------------------------------------------------------
// Allocation
// ---------------------------------------------------------------------------

/// Largest-remainder apportionment of `total` over non-negative weights.
/// At least one weight must be positive. Remainder ties resolve to the
/// lower index.
pub fn largest_remainder(weights: &[f64], total: u32) -> Vec<u32> {
    debug_assert!(weights.iter().any(|&w| w > 0.0));
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let assigned: u32 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).expect("quotas are finite").then_with(|| a.cmp(&b))
    });
    let mut leftover = total - assigned;
    for idx in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        counts[*idx] += 1;
        leftover -= 1;
    }
    counts
}

/// Attention-personalized allocation: valid sections weighted by deficit
/// 1 − ADI; invalid sections are listed with count 0. All-zero deficits
/// fall back to a uniform split over the valid sections.
pub fn allocate_questions(report: &AttentionReport, config: &EngineConfig) -> Result<QuizPlan, QuizError> {
    let valid: Vec<&crate::metrics::SectionMetrics> = report.valid_sections().collect();
    if valid.is_empty() {
        return Err(QuizError::NoValidSection);
    }
    let deficits: Vec<f64> = valid.iter().map(|s| (1.0 - s.adi).max(0.0)).collect();
    let weights: Vec<f64> = if deficits.iter().all(|&d| d == 0.0) {
        vec![1.0; valid.len()]
    } else {
        deficits
    };
    let counts = largest_remainder(&weights, config.question_count);

    let by_index: BTreeMap<u32, u32> = valid.iter().zip(&counts).map(|(s, &c)| (s.index, c)).collect();
    let allocation: Vec<SectionAllocation> = report
        .sections
        .iter()
        .map(|s| SectionAllocation { section_index: s.index, count: by_index.get(&s.index).copied().unwrap_or(0) })
        .collect();

    Ok(QuizPlan {
        session_id: report.session_id.clone(),
        mode: QuizMode::Attentive,
        difficulty: Difficulty::Medium,
        total: config.question_count,
        allocation,
    })
}

/// Non-personalized control allocation: each question lands on a section
/// drawn uniformly from the seeded generator.
pub fn allocate_random(
    session_id: &str,
    timeline: &LectureTimeline,
    config: &EngineConfig,
    seed: u64,
) -> QuizPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = timeline.section_count();
    let mut counts = vec![0u32; n];
    for _ in 0..config.question_count {
        counts[rng.random_range(0..n)] += 1;
    }
    let allocation = timeline
        .sections()
        .iter()
        .zip(&counts)
        .map(|(s, &count)| SectionAllocation { section_index: s.index, count })
        .collect();
    QuizPlan {
        session_id: session_id.to_string(),
        mode: QuizMode::Random,
        difficulty: Difficulty::Medium,
        total: config.question_count,
        allocation,
    }
}

// ---------------------------------------------------------------------------
// Prompt assembly and generation
// ---------------------------------------------------------------------------

/// Grounding excerpts for every targeted section, chunked from the
/// descriptor's section texts. Sections without content yield no chunks
/// and surface as [`QuizError::MissingGrounding`] at prompt time.
pub fn grounding_from_descriptor(plan: &QuizPlan, descriptor: &LectureDescriptor) -> BTreeMap<u32, Vec<Chunk>> {
    let mut grounding = BTreeMap::new();
    for target in plan.targeted_sections() {
        let Some(info) = descriptor.section(target.section_index) else { continue };
        let doc_id = format!("{}-s{}", descriptor.lecture_id, target.section_index);
        let options = ChunkOptions { section_index: Some(target.section_index), ..ChunkOptions::default() };
        if let Ok(mut chunks) = chunk_document(&doc_id, &info.content_text, options) {
            chunks.truncate(GROUNDING_CHUNKS_PER_SECTION);
            grounding.insert(target.section_index, chunks);
        }
    }
    grounding
}

fn topic_of(chunks: &[Chunk]) -> String {
    chunks
        .first()
        .map(|c| c.text.split_whitespace().take(8).collect::<Vec<_>>().join(" "))
        .unwrap_or_default()
}

/// Deterministic generation prompt: per targeted section its title, time
/// range, requested count, difficulty and grounding excerpts in chunk-id
/// order, followed by a machine-readable output-format block.
pub fn build_quiz_prompt(
    plan: &QuizPlan,
    descriptor: &LectureDescriptor,
    grounding: &BTreeMap<u32, Vec<Chunk>>,
) -> Result<String, QuizError> {
    if plan.total == 0 || plan.targeted_sections().next().is_none() {
        return Err(QuizError::EmptyPlan);
    }
    let mut out = format!(
        "Generate quiz questions for lecture {:?}.\nDifficulty: {}. Total questions: {}.\n",
        descriptor.lecture_id,
        plan.difficulty.as_str(),
        plan.total
    );
    let mut prompt_sections = Vec::new();
    for target in plan.targeted_sections() {
        let info = descriptor
            .section(target.section_index)
            .ok_or(QuizError::UnknownSection(target.section_index))?;
        let chunks = grounding
            .get(&target.section_index)
            .filter(|c| !c.is_empty())
            .ok_or(QuizError::MissingGrounding(target.section_index))?;
        out.push_str(&format!(
            "\nSection {} — {:?} ({}s to {}s): {} question(s), difficulty {}.\nGrounding:\n",
            info.index,
            info.title,
            info.start_ms / 1000,
            info.end_ms / 1000,
            target.count,
            plan.difficulty.as_str()
        ));
        let mut ordered: Vec<&Chunk> = chunks.iter().collect();
        ordered.sort_by(|a, b| a.id.cmp(&b.id));
        for chunk in ordered {
            out.push_str(&format!("  [{}] {}\n", chunk.id, chunk.text));
        }
        prompt_sections.push(PromptSection {
            section_index: target.section_index,
            count: target.count,
            topic: topic_of(chunks),
        });
    }
    out.push_str(
        "\nReturn JSON only, exactly matching:\n{\"items\": [{\"section_index\": <int>, \"kind\": \"MCQ\"|\"SHORT_ANSWER\", \"stem\": \"...\", \"options\": [\"...\"], \"answer_key\": \"...\"}]}\nMCQ items need at least two options and the answer key must be one of them.\n",
    );
    let machine_plan = PromptPlan { difficulty: plan.difficulty.as_str().to_string(), sections: prompt_sections };
    out.push_str(&format!(
        "{PLAN_MARKER}{}\n",
        serde_json::to_string(&machine_plan).expect("plan block serialization is infallible")
    ));
    Ok(out)
}

fn items_match_plan(items: &[WireQuizItem], plan: &QuizPlan) -> Result<(), String> {
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    for item in items {
        *counts.entry(item.section_index).or_default() += 1;
    }
    for alloc in &plan.allocation {
        let got = counts.remove(&alloc.section_index).unwrap_or(0);
        if got != alloc.count {
            return Err(format!("section {} got {} item(s), plan wants {}", alloc.section_index, got, alloc.count));
        }
    }
    if let Some((&section, _)) = counts.iter().next() {
        return Err(format!("item targets unplanned section {section}"));
    }
    Ok(())
}

/// Runs the adapter against the plan's prompt and validates the result.
/// Responses violating item invariants or the per-section counts are
/// retried up to [`GENERATION_RETRY_BUDGET`] times, then surfaced as
/// [`QuizError::MalformedGeneration`].
pub fn generate_quiz(
    plan: &QuizPlan,
    descriptor: &LectureDescriptor,
    grounding: &BTreeMap<u32, Vec<Chunk>>,
    adapter: &dyn LlmAdapter,
) -> Result<Vec<QuizItem>, QuizError> {
    plan.validate()?;
    let prompt = build_quiz_prompt(plan, descriptor, grounding)?;
    let request = GenerationRequest { prompt, max_items: plan.total };

    let mut last_defect = String::new();
    for _attempt in 0..=GENERATION_RETRY_BUDGET {
        let response = adapter.generate(&request)?;
        match validate_items(response.items, plan, grounding) {
            Ok(items) => return Ok(items),
            Err(defect) => last_defect = defect,
        }
    }
    Err(QuizError::MalformedGeneration(last_defect))
}

fn validate_items(
    wire_items: Vec<WireQuizItem>,
    plan: &QuizPlan,
    grounding: &BTreeMap<u32, Vec<Chunk>>,
) -> Result<Vec<QuizItem>, String> {
    items_match_plan(&wire_items, plan)?;
    let mut items = Vec::with_capacity(wire_items.len());
    for (i, wire) in wire_items.into_iter().enumerate() {
        let chunk_ids = grounding
            .get(&wire.section_index)
            .map(|chunks| chunks.iter().map(|c| c.id.clone()).collect())
            .unwrap_or_default();
        let id = format!("q{:02}", i + 1);
        items.push(QuizItem::from_wire(id, wire, chunk_ids)?);
    }
    items.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(items)
}

// ---------------------------------------------------------------------------
// Grading
// ---------------------------------------------------------------------------

/// Grades one response. MCQ answers are compared locally against the key
/// (case- and whitespace-insensitive); short answers are delegated to the
/// adapter.
pub fn grade(item: &QuizItem, response: &str, adapter: &dyn LlmAdapter) -> Result<GradeResult, QuizError> {
    if response.trim().is_empty() {
        return Err(QuizError::EmptyResponse);
    }
    match item.kind {
        QuizKind::Mcq => {
            let correct = normalize_answer(response) == normalize_answer(&item.answer_key);
            Ok(GradeResult {
                item_id: item.id.clone(),
                correct,
                score: if correct { 1.0 } else { 0.0 },
                rationale: if correct {
                    "matches the answer key".to_string()
                } else {
                    format!("expected {:?}", item.answer_key)
                },
            })
        }
        QuizKind::ShortAnswer => {
            let graded = adapter.grade(&GradingRequest {
                stem: item.stem.clone(),
                answer_key: item.answer_key.clone(),
                response: response.to_string(),
            })?;
            if !(0.0..=1.0).contains(&graded.score) || !graded.score.is_finite() {
                return Err(QuizError::MalformedGrade(graded.score));
            }
            Ok(GradeResult {
                item_id: item.id.clone(),
                correct: graded.correct,
                score: graded.score,
                rationale: graded.rationale,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::{CompletionRequest, CompletionResponse, GenerationResponse, GradingResponse, MockAdapter};
    use crate::metrics::SectionMetrics;
    use crate::model::validate_timeline;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn report_from_adis(adis: &[f64]) -> AttentionReport {
        report_with_validity(&adis.iter().map(|&a| (a, true)).collect::<Vec<_>>())
    }

    fn report_with_validity(sections: &[(f64, bool)]) -> AttentionReport {
        let len = 200_000u64;
        AttentionReport {
            session_id: "s-test".into(),
            lecture_id: "bayes-1".into(),
            generated_at_ms: 0,
            per_minute_coverage: vec![],
            sections: sections
                .iter()
                .enumerate()
                .map(|(i, &(adi, valid))| SectionMetrics {
                    index: (i + 1) as u32,
                    start_ms: i as u64 * len,
                    end_ms: (i as u64 + 1) * len,
                    aoi_coverage: adi,
                    attention_switches: 0,
                    switch_rate_per_min: 0.0,
                    adi,
                    valid,
                    sample_count: 1000,
                })
                .collect(),
        }
    }

    fn counts(plan: &QuizPlan) -> Vec<u32> {
        plan.allocation.iter().map(|a| a.count).collect()
    }

    #[test]
    fn deficit_apportionment_fixture() {
        let report = report_from_adis(&[0.9, 0.8, 0.3, 0.85, 0.5, 0.95]);
        let plan = allocate_questions(&report, &EngineConfig::default()).unwrap();
        assert_eq!(counts(&plan), vec![0, 1, 2, 1, 2, 0]);
        assert_eq!(plan.total, 6);
        assert_eq!(plan.mode, QuizMode::Attentive);
    }

    #[test]
    fn equal_adis_split_uniformly() {
        let report = report_from_adis(&[0.5; 6]);
        let plan = allocate_questions(&report, &EngineConfig::default()).unwrap();
        assert_eq!(counts(&plan), vec![1; 6]);
        // Zero deficits (perfect attention) also fall back to uniform.
        let perfect = report_from_adis(&[1.0; 6]);
        let plan = allocate_questions(&perfect, &EngineConfig::default()).unwrap();
        assert_eq!(counts(&plan), vec![1; 6]);
    }

    #[test]
    fn single_valid_section_takes_everything() {
        let report = report_with_validity(&[(0.9, false), (0.4, true), (0.9, false)]);
        let plan = allocate_questions(&report, &EngineConfig::default()).unwrap();
        assert_eq!(counts(&plan), vec![0, 6, 0]);
    }

    #[test]
    fn no_valid_section_is_an_error() {
        let report = report_with_validity(&[(0.5, false), (0.5, false)]);
        assert!(matches!(allocate_questions(&report, &EngineConfig::default()), Err(QuizError::NoValidSection)));
    }

    #[test]
    fn invalid_sections_get_zero_and_stay_listed() {
        let report = report_with_validity(&[(0.2, true), (0.1, false), (0.9, true)]);
        let plan = allocate_questions(&report, &EngineConfig::default()).unwrap();
        assert_eq!(plan.allocation.len(), 3);
        assert_eq!(plan.count_for(2), Some(0));
        assert_eq!(counts(&plan).iter().sum::<u32>(), 6);
    }

    proptest! {
        #[test]
        fn allocation_total_and_monotonicity(adis in proptest::collection::vec(0.0f64..=1.0, 1..12)) {
            let report = report_from_adis(&adis);
            let plan = allocate_questions(&report, &EngineConfig::default()).unwrap();
            let got = counts(&plan);
            prop_assert_eq!(got.iter().sum::<u32>(), 6);
            for i in 0..adis.len() {
                for j in 0..adis.len() {
                    if adis[i] < adis[j] {
                        prop_assert!(got[i] >= got[j], "adi[{}]={} < adi[{}]={} but counts {:?}", i, adis[i], j, adis[j], got);
                    }
                }
            }
        }

        #[test]
        fn constant_adi_shift_preserves_allocation_order(
            adis in proptest::collection::vec(0.05f64..=0.85, 2..8),
            shift in 0.0f64..0.1,
        ) {
            let base = allocate_questions(&report_from_adis(&adis), &EngineConfig::default()).unwrap();
            let shifted: Vec<f64> = adis.iter().map(|a| a + shift).collect();
            let moved = allocate_questions(&report_from_adis(&shifted), &EngineConfig::default()).unwrap();
            let a = counts(&base);
            let b = counts(&moved);
            for i in 0..adis.len() {
                for j in 0..adis.len() {
                    if adis[i] < adis[j] {
                        prop_assert!(a[i] >= a[j]);
                        prop_assert!(b[i] >= b[j]);
                    }
                }
            }
        }
    }

    fn six_section_timeline() -> LectureTimeline {
        let raw: Vec<(u64, u64)> = (0..6).map(|i| (i * 200_000, (i + 1) * 200_000)).collect();
        validate_timeline("bayes-1", &raw, 1_200_000).unwrap()
    }

    #[test]
    fn random_allocation_is_seed_stable() {
        let timeline = six_section_timeline();
        let config = EngineConfig::default();
        let a = allocate_random("s", &timeline, &config, 42);
        let b = allocate_random("s", &timeline, &config, 42);
        assert_eq!(a, b);
        assert_eq!(a.total, 6);
        assert_eq!(counts(&a).iter().sum::<u32>(), 6);
        assert_eq!(a.mode, QuizMode::Random);
        // Golden multiset for seed 42, pinned from the first verified run.
        assert_eq!(counts(&a), vec![1, 1, 1, 0, 2, 1]);
        let c = allocate_random("s", &timeline, &config, 43);
        assert_ne!(counts(&a), counts(&c));
    }

    #[test]
    fn random_allocation_single_section() {
        let timeline = validate_timeline("x", &[(0, 100)], 100).unwrap();
        for seed in [0u64, 7, 99] {
            let plan = allocate_random("s", &timeline, &EngineConfig::default(), seed);
            assert_eq!(counts(&plan), vec![6]);
        }
    }

    #[test]
    fn random_allocation_is_uniform_in_expectation() {
        let timeline = six_section_timeline();
        let config = EngineConfig::default();
        let mut totals = [0u64; 6];
        for seed in 0..10_000u64 {
            let plan = allocate_random("s", &timeline, &config, seed);
            for (t, c) in totals.iter_mut().zip(counts(&plan)) {
                *t += c as u64;
            }
        }
        for t in totals {
            let mean = t as f64 / 10_000.0;
            assert!((mean - 1.0).abs() < 0.05, "per-section mean {mean}");
        }
    }

    fn descriptor() -> LectureDescriptor {
        let sections = (0..6)
            .map(|i| crate::model::SectionInfo {
                index: (i + 1) as u32,
                start_ms: i as u64 * 200_000,
                end_ms: (i as u64 + 1) * 200_000,
                title: format!("Topic {}", i + 1),
                content_text: format!(
                    "section {} discusses concept{} with worked examples and derivations repeated {}",
                    i + 1,
                    i + 1,
                    "again ".repeat(8)
                ),
            })
            .collect();
        LectureDescriptor {
            lecture_id: "bayes-1".into(),
            duration_ms: 1_200_000,
            sections,
            aois: vec![],
        }
    }

    fn fixture_plan() -> QuizPlan {
        let report = report_from_adis(&[0.9, 0.8, 0.3, 0.85, 0.5, 0.95]);
        allocate_questions(&report, &EngineConfig::default()).unwrap()
    }

    #[test]
    fn prompt_mentions_exactly_the_targeted_sections() {
        let plan = fixture_plan();
        let descriptor = descriptor();
        let grounding = grounding_from_descriptor(&plan, &descriptor);
        let prompt = build_quiz_prompt(&plan, &descriptor, &grounding).unwrap();
        for (section, count) in [(2u32, 1u32), (3, 2), (4, 1), (5, 2)] {
            assert!(prompt.contains(&format!("Section {section} ")), "missing section {section}");
            assert!(prompt.contains(&format!("): {count} question(s)")) || prompt.contains(&format!(": {count} question(s)")));
        }
        assert!(!prompt.contains("Section 1 "));
        assert!(!prompt.contains("Section 6 "));
        // Byte-identical across runs.
        assert_eq!(prompt, build_quiz_prompt(&plan, &descriptor, &grounding).unwrap());
    }

    #[test]
    fn empty_plan_is_rejected() {
        let mut plan = fixture_plan();
        plan.total = 0;
        for a in &mut plan.allocation {
            a.count = 0;
        }
        let descriptor = descriptor();
        let grounding = grounding_from_descriptor(&plan, &descriptor);
        assert!(matches!(build_quiz_prompt(&plan, &descriptor, &grounding), Err(QuizError::EmptyPlan)));
    }

    #[test]
    fn missing_grounding_names_the_section() {
        let plan = fixture_plan();
        let mut descriptor = descriptor();
        descriptor.sections[2].content_text.clear(); // section 3 has questions
        let grounding = grounding_from_descriptor(&plan, &descriptor);
        assert!(matches!(
            build_quiz_prompt(&plan, &descriptor, &grounding),
            Err(QuizError::MissingGrounding(3))
        ));
    }

    #[test]
    fn mock_generation_fills_the_plan() {
        let plan = fixture_plan();
        let descriptor = descriptor();
        let grounding = grounding_from_descriptor(&plan, &descriptor);
        let items = generate_quiz(&plan, &descriptor, &grounding, &MockAdapter).unwrap();
        assert_eq!(items.len(), 6);
        let mut sections: Vec<u32> = items.iter().map(|i| i.section_index).collect();
        sections.sort();
        assert_eq!(sections, vec![2, 3, 3, 4, 5, 5]);
        assert!(items.iter().all(|i| !i.grounding_chunk_ids.is_empty()));
        // Ids are sequential and the result is reproducible.
        assert_eq!(items[0].id, "q01");
        assert_eq!(items, generate_quiz(&plan, &descriptor, &grounding, &MockAdapter).unwrap());
    }

    /// Adapter that always emits a single-option MCQ, counting calls.
    struct BrokenAdapter<'a> {
        calls: &'a AtomicU32,
    }

    impl LlmAdapter for BrokenAdapter<'_> {
        fn generate(&self, _: &GenerationRequest) -> Result<GenerationResponse, AdapterError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let plan = fixture_plan();
            let items = plan
                .targeted_sections()
                .flat_map(|a| {
                    (0..a.count).map(|_| WireQuizItem {
                        section_index: a.section_index,
                        kind: QuizKind::Mcq,
                        stem: "only one option".into(),
                        options: Some(vec!["sole".into()]),
                        answer_key: "sole".into(),
                    })
                })
                .collect();
            Ok(GenerationResponse { items })
        }

        fn grade(&self, _: &GradingRequest) -> Result<GradingResponse, AdapterError> {
            unreachable!()
        }

        fn complete(&self, _: &CompletionRequest) -> Result<CompletionResponse, AdapterError> {
            unreachable!()
        }
    }

    #[test]
    fn malformed_items_exhaust_the_retry_budget() {
        let plan = fixture_plan();
        let descriptor = descriptor();
        let grounding = grounding_from_descriptor(&plan, &descriptor);
        let calls = AtomicU32::new(0);
        let err = generate_quiz(&plan, &descriptor, &grounding, &BrokenAdapter { calls: &calls }).unwrap_err();
        assert!(matches!(err, QuizError::MalformedGeneration(_)));
        assert_eq!(calls.load(Ordering::SeqCst), 1 + GENERATION_RETRY_BUDGET);
    }

    fn mcq_item() -> QuizItem {
        QuizItem {
            id: "q01".into(),
            section_index: 3,
            kind: QuizKind::Mcq,
            stem: "pick one".into(),
            options: Some(vec!["A".into(), "B".into(), "C".into()]),
            answer_key: "B".into(),
            grounding_chunk_ids: vec![],
        }
    }

    #[test]
    fn mcq_grading_is_local_and_forgiving_about_case() {
        let graded = grade(&mcq_item(), " b ", &MockAdapter).unwrap();
        assert!(graded.correct);
        assert_eq!(graded.score, 1.0);
        let graded = grade(&mcq_item(), "C", &MockAdapter).unwrap();
        assert!(!graded.correct);
        assert_eq!(graded.score, 0.0);
    }

    #[test]
    fn short_answer_goes_through_the_adapter() {
        let item = QuizItem {
            id: "q02".into(),
            section_index: 1,
            kind: QuizKind::ShortAnswer,
            stem: "define it".into(),
            options: None,
            answer_key: "a prior encodes belief".into(),
            grounding_chunk_ids: vec![],
        };
        let graded = grade(&item, "A PRIOR encodes   belief", &MockAdapter).unwrap();
        assert!(graded.correct);
        assert_eq!(graded.score, 1.0);
        let graded = grade(&item, "no idea", &MockAdapter).unwrap();
        assert!(!graded.correct);
    }

    #[test]
    fn empty_response_is_rejected() {
        assert!(matches!(grade(&mcq_item(), "   ", &MockAdapter), Err(QuizError::EmptyResponse)));
    }

    #[test]
    fn plan_json_roundtrip() {
        let plan = fixture_plan();
        let parsed = QuizPlan::from_json(&plan.to_json()).unwrap();
        assert_eq!(plan, parsed);
        assert!(plan.to_json().contains("\"ATTENTIVE\""));
    }
}
