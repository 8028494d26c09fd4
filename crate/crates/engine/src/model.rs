//! Shared domain types: gaze samples, areas of interest, lecture timelines
//! and the engine configuration.
//!
//! Every type here is immutable after construction and validated by its
//! constructor; an invariant violation maps to a distinct [`ModelError`]
//! variant. Timestamps throughout the engine are integer milliseconds
//! relative to lecture start.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec3::Vec3;

/// Reserved gaze label meaning "not looking at any AOI".
pub const AWAY_LABEL: &str = "away";

/// Tolerance for the unit-norm check on gaze directions.
pub const DIRECTION_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("section list is empty")]
    EmptySections,
    #[error("lecture duration must be positive")]
    InvalidDuration,
    #[error("section {index} has end <= start")]
    EmptySection { index: u32 },
    #[error("section {index} overlaps the previous section at {at} ms")]
    Overlap { index: u32, at: u64 },
    #[error("gap before section {index} at boundary {at} ms")]
    Gap { index: u32, at: u64 },
    #[error("section {index} extends past the lecture duration")]
    OutOfRange { index: u32 },
    #[error("section index {found} out of order (expected {expected})")]
    BadSectionIndex { expected: u32, found: u32 },
    #[error("gaze direction norm {norm} is not within 1 +/- {DIRECTION_NORM_TOL}")]
    NonUnitDirection { norm: f64 },
    #[error("a valid gaze sample needs either origin+direction or a target label")]
    MissingGazeData,
    #[error("AOI label must be nonempty")]
    EmptyAoiLabel,
    #[error("AOI label {0:?} is reserved")]
    ReservedAoiLabel(String),
    #[error("duplicate AOI label {0:?}")]
    DuplicateAoiLabel(String),
    #[error("rectangle half-vectors must be nonzero")]
    DegenerateRectangle,
    #[error("rectangle half-vectors are not orthogonal (relative deviation {deviation})")]
    NonOrthogonalRectangle { deviation: f64 },
    #[error("box min exceeds max on axis {axis}")]
    BoxMinExceedsMax { axis: usize },
    #[error("non-finite coordinate in {context}")]
    NonFinite { context: &'static str },
    #[error("config field {field} out of range: {detail}")]
    BadConfig { field: &'static str, detail: String },
}

// ---------------------------------------------------------------------------
// Gaze samples
// ---------------------------------------------------------------------------

/// One timestamped gaze record.
///
/// A sample carries either resolved geometry (`origin` + unit `direction`),
/// a pre-resolved `target` label, or both. An *invalid* sample (tracking
/// loss, degenerate direction) may carry only its timestamp; the validity
/// flag is what downstream metrics key on.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeSample {
    t_ms: u64,
    origin: Option<Vec3>,
    direction: Option<Vec3>,
    target: Option<String>,
    valid: bool,
}

impl GazeSample {
    /// A sample from a raw gaze ray. The direction is normalized here; a
    /// zero or non-finite direction yields an invalid sample with no
    /// stored direction.
    pub fn geometric(t_ms: u64, origin: Vec3, raw_direction: Vec3, valid: bool) -> Result<Self, ModelError> {
        if !origin.is_finite() {
            return Err(ModelError::NonFinite { context: "gaze origin" });
        }
        if !raw_direction.is_finite() {
            return Err(ModelError::NonFinite { context: "gaze direction" });
        }
        let norm = raw_direction.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Ok(GazeSample { t_ms, origin: Some(origin), direction: None, target: None, valid: false });
        }
        // Unit-norm input is stored untouched so that parse -> serialize
        // -> parse is bit-exact; anything else is rescaled.
        let dir = if (norm - 1.0).abs() <= DIRECTION_NORM_TOL {
            raw_direction
        } else {
            raw_direction.scale(1.0 / norm)
        };
        Ok(GazeSample { t_ms, origin: Some(origin), direction: Some(dir), target: None, valid })
    }

    /// A sample whose direction is already unit-norm within
    /// [`DIRECTION_NORM_TOL`]; rejects anything else.
    pub fn geometric_unit(t_ms: u64, origin: Vec3, direction: Vec3, valid: bool) -> Result<Self, ModelError> {
        let norm = direction.norm();
        if (norm - 1.0).abs() > DIRECTION_NORM_TOL {
            return Err(ModelError::NonUnitDirection { norm });
        }
        Ok(GazeSample { t_ms, origin: Some(origin), direction: Some(direction), target: None, valid })
    }

    /// A sample with a pre-resolved target label.
    pub fn labeled(t_ms: u64, target: impl Into<String>, valid: bool) -> Self {
        GazeSample { t_ms, origin: None, direction: None, target: Some(target.into()), valid }
    }

    /// An invalid placeholder that carries only time.
    pub fn lost(t_ms: u64) -> Self {
        GazeSample { t_ms, origin: None, direction: None, target: None, valid: false }
    }

    pub fn t_ms(&self) -> u64 {
        self.t_ms
    }

    pub fn origin(&self) -> Option<&Vec3> {
        self.origin.as_ref()
    }

    pub fn direction(&self) -> Option<&Vec3> {
        self.direction.as_ref()
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }
}

// ---------------------------------------------------------------------------
// Areas of interest
// ---------------------------------------------------------------------------

/// Geometry of an AOI: an oriented rectangle (slides) or an axis-aligned
/// box (avatar proxy volumes). Both admit closed-form ray intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AoiShape {
    Rect {
        center: Vec3,
        half_u: Vec3,
        half_v: Vec3,
    },
    Box {
        min: Vec3,
        max: Vec3,
    },
}

/// A named spatial region whose gaze dwell is tracked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAoi")]
pub struct AoiDefinition {
    label: String,
    shape: AoiShape,
    learning_related: bool,
}

#[derive(Deserialize)]
struct RawAoi {
    label: String,
    shape: AoiShape,
    learning_related: bool,
}

impl TryFrom<RawAoi> for AoiDefinition {
    type Error = ModelError;

    fn try_from(raw: RawAoi) -> Result<Self, ModelError> {
        AoiDefinition::new(raw.label, raw.shape, raw.learning_related)
    }
}

impl AoiDefinition {
    pub fn new(label: impl Into<String>, shape: AoiShape, learning_related: bool) -> Result<Self, ModelError> {
        let label = label.into();
        if label.is_empty() {
            return Err(ModelError::EmptyAoiLabel);
        }
        if label == AWAY_LABEL {
            return Err(ModelError::ReservedAoiLabel(label));
        }
        match &shape {
            AoiShape::Rect { center, half_u, half_v } => {
                if !center.is_finite() || !half_u.is_finite() || !half_v.is_finite() {
                    return Err(ModelError::NonFinite { context: "rectangle AOI" });
                }
                let (nu, nv) = (half_u.norm(), half_v.norm());
                if nu == 0.0 || nv == 0.0 {
                    return Err(ModelError::DegenerateRectangle);
                }
                let deviation = half_u.dot(half_v).abs() / (nu * nv);
                if deviation > 1e-6 {
                    return Err(ModelError::NonOrthogonalRectangle { deviation });
                }
            }
            AoiShape::Box { min, max } => {
                if !min.is_finite() || !max.is_finite() {
                    return Err(ModelError::NonFinite { context: "box AOI" });
                }
                for (axis, (lo, hi)) in [(min.0, max.0), (min.1, max.1), (min.2, max.2)].into_iter().enumerate() {
                    if lo > hi {
                        return Err(ModelError::BoxMinExceedsMax { axis });
                    }
                }
            }
        }
        Ok(AoiDefinition { label, shape, learning_related })
    }

    pub fn rectangle(
        label: impl Into<String>,
        center: Vec3,
        half_u: Vec3,
        half_v: Vec3,
        learning_related: bool,
    ) -> Result<Self, ModelError> {
        Self::new(label, AoiShape::Rect { center, half_u, half_v }, learning_related)
    }

    pub fn axis_box(
        label: impl Into<String>,
        min: Vec3,
        max: Vec3,
        learning_related: bool,
    ) -> Result<Self, ModelError> {
        Self::new(label, AoiShape::Box { min, max }, learning_related)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn shape(&self) -> &AoiShape {
        &self.shape
    }

    pub fn learning_related(&self) -> bool {
        self.learning_related
    }
}

/// An ordered set of AOIs with unique labels. Declaration order matters:
/// it is the tie-break for equidistant ray hits.
#[derive(Debug, Clone, PartialEq)]
pub struct AoiSet {
    aois: Vec<AoiDefinition>,
}

impl AoiSet {
    pub fn new(aois: Vec<AoiDefinition>) -> Result<Self, ModelError> {
        let mut seen = HashSet::new();
        for aoi in &aois {
            if !seen.insert(aoi.label.clone()) {
                return Err(ModelError::DuplicateAoiLabel(aoi.label.clone()));
            }
        }
        Ok(AoiSet { aois })
    }

    pub fn iter(&self) -> impl Iterator<Item = &AoiDefinition> {
        self.aois.iter()
    }

    pub fn len(&self) -> usize {
        self.aois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aois.is_empty()
    }

    pub fn contains_label(&self, label: &str) -> bool {
        self.aois.iter().any(|a| a.label == label)
    }

    /// Labels of learning-related AOIs, in declaration order.
    pub fn learning_labels(&self) -> Vec<String> {
        self.aois.iter().filter(|a| a.learning_related).map(|a| a.label.clone()).collect()
    }
}

// ---------------------------------------------------------------------------
// Lecture timeline
// ---------------------------------------------------------------------------

/// One contiguous lecture interval, the analytic unit for metrics and
/// quiz targeting. Indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub index: u32,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl Section {
    pub fn len_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }
}

/// Ordered sections covering `[0, duration_ms)` exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LectureTimeline {
    lecture_id: String,
    duration_ms: u64,
    sections: Vec<Section>,
}

/// Validates raw `(start_ms, end_ms)` pairs into a timeline: contiguous,
/// non-overlapping, covering `[0, duration_ms)` exactly. Idempotent over
/// the section list of an already-valid timeline.
pub fn validate_timeline(
    lecture_id: impl Into<String>,
    raw_sections: &[(u64, u64)],
    duration_ms: u64,
) -> Result<LectureTimeline, ModelError> {
    if raw_sections.is_empty() {
        return Err(ModelError::EmptySections);
    }
    if duration_ms == 0 {
        return Err(ModelError::InvalidDuration);
    }
    let mut sections = Vec::with_capacity(raw_sections.len());
    let mut cursor = 0u64;
    for (i, &(start, end)) in raw_sections.iter().enumerate() {
        let index = (i + 1) as u32;
        if end <= start {
            return Err(ModelError::EmptySection { index });
        }
        if start > cursor {
            return Err(ModelError::Gap { index, at: cursor });
        }
        if start < cursor {
            return Err(ModelError::Overlap { index, at: start });
        }
        if end > duration_ms {
            return Err(ModelError::OutOfRange { index });
        }
        sections.push(Section { index, start_ms: start, end_ms: end });
        cursor = end;
    }
    if cursor < duration_ms {
        return Err(ModelError::Gap { index: raw_sections.len() as u32, at: cursor });
    }
    Ok(LectureTimeline { lecture_id: lecture_id.into(), duration_ms, sections })
}

impl LectureTimeline {
    pub fn lecture_id(&self) -> &str {
        &self.lecture_id
    }

    pub fn duration_ms(&self) -> u64 {
        self.duration_ms
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn section_count(&self) -> usize {
        self.sections.len()
    }

    /// Section containing `t_ms`, or `None` past the lecture end.
    pub fn section_at(&self, t_ms: u64) -> Option<&Section> {
        if t_ms >= self.duration_ms {
            return None;
        }
        let pos = self.sections.partition_point(|s| s.end_ms <= t_ms);
        self.sections.get(pos)
    }

    /// The raw `(start, end)` pairs, suitable for re-validation.
    pub fn raw_sections(&self) -> Vec<(u64, u64)> {
        self.sections.iter().map(|s| (s.start_ms, s.end_ms)).collect()
    }
}

// ---------------------------------------------------------------------------
// Engine configuration
// ---------------------------------------------------------------------------

/// Tunable pipeline parameters. Defaults mirror a six-section, six-question
/// lecture sampled at 60 Hz; everything is overridable from config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Nominal headset sampling rate, used for section sample-sufficiency.
    pub nominal_rate_hz: f64,
    /// Label changes persisting less than this are merged away.
    pub switch_debounce_ms: u64,
    /// Inter-sample gaps beyond this clamp become "away" tracking loss.
    pub gap_clamp_ms: u64,
    /// Coverage weight in the attention index.
    pub adi_coverage_weight: f64,
    /// Switch-penalty weight in the attention index.
    pub adi_switch_weight: f64,
    /// Switch rate (per minute) at which the switch penalty saturates.
    pub switch_rate_cap_per_min: f64,
    /// Minimum fraction of nominal samples a section needs to count as valid.
    pub min_section_sample_fraction: f64,
    /// Questions per generated quiz.
    pub question_count: u32,
    /// Seed for seeded operations that are not given one explicitly.
    pub rng_seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            nominal_rate_hz: 60.0,
            switch_debounce_ms: 100,
            gap_clamp_ms: 500,
            adi_coverage_weight: 0.7,
            adi_switch_weight: 0.3,
            switch_rate_cap_per_min: 30.0,
            min_section_sample_fraction: 0.5,
            question_count: 6,
            rng_seed: 0,
        }
    }
}

impl EngineConfig {
    /// Range-checks every field; the two ADI weights must sum to 1.
    pub fn validate(&self) -> Result<(), ModelError> {
        fn bad(field: &'static str, detail: impl Into<String>) -> ModelError {
            ModelError::BadConfig { field, detail: detail.into() }
        }
        if !(self.nominal_rate_hz.is_finite() && self.nominal_rate_hz > 0.0) {
            return Err(bad("nominal_rate_hz", "must be positive"));
        }
        if self.gap_clamp_ms == 0 {
            return Err(bad("gap_clamp_ms", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.adi_coverage_weight) {
            return Err(bad("adi_coverage_weight", "must be in [0,1]"));
        }
        if !(0.0..=1.0).contains(&self.adi_switch_weight) {
            return Err(bad("adi_switch_weight", "must be in [0,1]"));
        }
        let wsum = self.adi_coverage_weight + self.adi_switch_weight;
        if (wsum - 1.0).abs() > 1e-9 {
            return Err(bad("adi_switch_weight", format!("weights sum to {wsum}, expected 1")));
        }
        if !(self.switch_rate_cap_per_min.is_finite() && self.switch_rate_cap_per_min > 0.0) {
            return Err(bad("switch_rate_cap_per_min", "must be positive"));
        }
        if !(self.min_section_sample_fraction > 0.0 && self.min_section_sample_fraction <= 1.0) {
            return Err(bad("min_section_sample_fraction", "must be in (0,1]"));
        }
        if self.question_count == 0 {
            return Err(bad("question_count", "must be positive"));
        }
        Ok(())
    }

    /// Parses a JSON object of overrides on top of the defaults.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let config: EngineConfig = serde_json::from_str(text)
            .map_err(|e| ModelError::BadConfig { field: "engine", detail: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }
}

// ---------------------------------------------------------------------------
// Lecture descriptor
// ---------------------------------------------------------------------------

/// Section metadata as stored in a lecture-descriptor file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionInfo {
    pub index: u32,
    pub start_ms: u64,
    pub end_ms: u64,
    pub title: String,
    #[serde(default)]
    pub content_text: String,
}

/// The lecture-descriptor file: timeline, section texts and AOI geometry
/// for one lecture. This is the single JSON artifact both the service and
/// the CLI load.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LectureDescriptor {
    pub lecture_id: String,
    pub duration_ms: u64,
    pub sections: Vec<SectionInfo>,
    pub aois: Vec<AoiDefinition>,
}

#[derive(Deserialize)]
struct RawDescriptor {
    lecture_id: String,
    duration_ms: u64,
    sections: Vec<SectionInfo>,
    aois: Vec<AoiDefinition>,
}

impl<'de> Deserialize<'de> for LectureDescriptor {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawDescriptor::deserialize(deserializer)?;
        let descriptor = LectureDescriptor {
            lecture_id: raw.lecture_id,
            duration_ms: raw.duration_ms,
            sections: raw.sections,
            aois: raw.aois,
        };
        descriptor.validate().map_err(serde::de::Error::custom)?;
        Ok(descriptor)
    }
}

impl LectureDescriptor {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    fn validate(&self) -> Result<(), ModelError> {
        for (i, s) in self.sections.iter().enumerate() {
            let expected = (i + 1) as u32;
            if s.index != expected {
                return Err(ModelError::BadSectionIndex { expected, found: s.index });
            }
        }
        let raw: Vec<(u64, u64)> = self.sections.iter().map(|s| (s.start_ms, s.end_ms)).collect();
        validate_timeline(&self.lecture_id, &raw, self.duration_ms)?;
        AoiSet::new(self.aois.clone())?;
        Ok(())
    }

    pub fn timeline(&self) -> LectureTimeline {
        let raw: Vec<(u64, u64)> = self.sections.iter().map(|s| (s.start_ms, s.end_ms)).collect();
        validate_timeline(&self.lecture_id, &raw, self.duration_ms)
            .expect("descriptor was validated at construction")
    }

    pub fn aoi_set(&self) -> AoiSet {
        AoiSet::new(self.aois.clone()).expect("descriptor was validated at construction")
    }

    pub fn section(&self, index: u32) -> Option<&SectionInfo> {
        self.sections.get(index.checked_sub(1)? as usize)
    }
}

/// Shared handle used where descriptors fan out across tasks.
pub type SharedDescriptor = Arc<LectureDescriptor>;

/// FNV-1a over a byte string; the engine's stable hash for derived seeds
/// and content ids.
pub fn stable_hash64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn six_equal() -> Vec<(u64, u64)> {
        (0..6).map(|i| (i * 200_000, (i + 1) * 200_000)).collect()
    }

    #[test]
    fn six_equal_sections_over_twenty_minutes() {
        let tl = validate_timeline("bayes-1", &six_equal(), 1_200_000).unwrap();
        assert_eq!(tl.section_count(), 6);
        assert_eq!(tl.sections()[2], Section { index: 3, start_ms: 400_000, end_ms: 600_000 });
        assert_eq!(tl.section_at(0).unwrap().index, 1);
        assert_eq!(tl.section_at(599_999).unwrap().index, 3);
        assert_eq!(tl.section_at(600_000).unwrap().index, 4);
        assert!(tl.section_at(1_200_000).is_none());
    }

    #[test]
    fn single_section_timeline() {
        let tl = validate_timeline("x", &[(0, 100)], 100).unwrap();
        assert_eq!(tl.section_count(), 1);
        assert_eq!(tl.sections()[0].len_ms(), 100);
    }

    #[test]
    fn gap_at_boundary_50() {
        let err = validate_timeline("x", &[(0, 50), (60, 100)], 100).unwrap_err();
        assert_eq!(err, ModelError::Gap { index: 2, at: 50 });
    }

    #[test]
    fn overlap_and_range_errors_name_the_section() {
        assert_eq!(
            validate_timeline("x", &[(0, 60), (50, 100)], 100).unwrap_err(),
            ModelError::Overlap { index: 2, at: 50 }
        );
        assert_eq!(
            validate_timeline("x", &[(0, 60), (60, 120)], 100).unwrap_err(),
            ModelError::OutOfRange { index: 2 }
        );
        assert_eq!(
            validate_timeline("x", &[(0, 60), (60, 60)], 100).unwrap_err(),
            ModelError::EmptySection { index: 2 }
        );
        assert_eq!(validate_timeline("x", &[], 100).unwrap_err(), ModelError::EmptySections);
        assert_eq!(
            validate_timeline("x", &[(0, 60)], 100).unwrap_err(),
            ModelError::Gap { index: 1, at: 60 }
        );
    }

    #[test]
    fn validate_timeline_is_idempotent() {
        let tl = validate_timeline("bayes-1", &six_equal(), 1_200_000).unwrap();
        let again = validate_timeline("bayes-1", &tl.raw_sections(), tl.duration_ms()).unwrap();
        assert_eq!(tl, again);
    }

    #[test]
    fn sample_constructors_enforce_invariants() {
        let s = GazeSample::geometric(0, Vec3(0.0, 1.6, 0.0), Vec3(0.0, 0.0, -2.0), true).unwrap();
        assert!((s.direction().unwrap().norm() - 1.0).abs() < 1e-12);
        assert!(s.is_valid());

        let degenerate = GazeSample::geometric(5, Vec3::ZERO, Vec3::ZERO, true).unwrap();
        assert!(!degenerate.is_valid());
        assert!(degenerate.direction().is_none());

        assert_eq!(
            GazeSample::geometric_unit(0, Vec3::ZERO, Vec3(0.0, 0.0, -2.0), true).unwrap_err(),
            ModelError::NonUnitDirection { norm: 2.0 }
        );

        let labeled = GazeSample::labeled(16, "slides", true);
        assert_eq!(labeled.target(), Some("slides"));
    }

    #[test]
    fn aoi_constructors_enforce_invariants() {
        let ok = AoiDefinition::rectangle(
            "slides",
            Vec3(0.0, 2.0, -4.0),
            Vec3(2.0, 0.0, 0.0),
            Vec3(0.0, 1.0, 0.0),
            true,
        );
        assert!(ok.is_ok());

        assert!(matches!(
            AoiDefinition::rectangle("s", Vec3::ZERO, Vec3(1.0, 0.0, 0.0), Vec3(1.0, 0.1, 0.0), true),
            Err(ModelError::NonOrthogonalRectangle { .. })
        ));
        assert_eq!(
            AoiDefinition::rectangle("s", Vec3::ZERO, Vec3::ZERO, Vec3(0.0, 1.0, 0.0), true).unwrap_err(),
            ModelError::DegenerateRectangle
        );
        assert_eq!(
            AoiDefinition::axis_box("b", Vec3(1.0, 0.0, 0.0), Vec3(0.0, 1.0, 1.0), false).unwrap_err(),
            ModelError::BoxMinExceedsMax { axis: 0 }
        );
        assert_eq!(AoiDefinition::axis_box("", Vec3::ZERO, Vec3::ZERO, false).unwrap_err(), ModelError::EmptyAoiLabel);
        assert_eq!(
            AoiDefinition::axis_box("away", Vec3::ZERO, Vec3::ZERO, false).unwrap_err(),
            ModelError::ReservedAoiLabel("away".into())
        );
    }

    #[test]
    fn aoi_set_rejects_duplicates() {
        let a = AoiDefinition::axis_box("x", Vec3::ZERO, Vec3(1.0, 1.0, 1.0), true).unwrap();
        let b = a.clone();
        assert_eq!(AoiSet::new(vec![a, b]).unwrap_err(), ModelError::DuplicateAoiLabel("x".into()));
    }

    #[test]
    fn config_defaults_are_valid_and_violations_are_distinct() {
        let config = EngineConfig::default();
        config.validate().unwrap();

        let mut bad_rate = config.clone();
        bad_rate.nominal_rate_hz = 0.0;
        assert!(matches!(bad_rate.validate(), Err(ModelError::BadConfig { field: "nominal_rate_hz", .. })));

        let mut bad_weights = config.clone();
        bad_weights.adi_switch_weight = 0.4;
        assert!(matches!(bad_weights.validate(), Err(ModelError::BadConfig { field: "adi_switch_weight", .. })));

        let mut bad_fraction = config;
        bad_fraction.min_section_sample_fraction = 0.0;
        assert!(matches!(
            bad_fraction.validate(),
            Err(ModelError::BadConfig { field: "min_section_sample_fraction", .. })
        ));
    }

    #[test]
    fn config_overrides_from_json() {
        let config = EngineConfig::from_json(r#"{"switch_debounce_ms": 0, "question_count": 4}"#).unwrap();
        assert_eq!(config.switch_debounce_ms, 0);
        assert_eq!(config.question_count, 4);
        assert_eq!(config.nominal_rate_hz, 60.0);
        assert!(EngineConfig::from_json(r#"{"question_count": 0}"#).is_err());
        assert!(EngineConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn descriptor_roundtrip_and_validation() {
        let text = r#"{
            "lecture_id": "bayes-1",
            "duration_ms": 600000,
            "sections": [
                {"index": 1, "start_ms": 0, "end_ms": 300000, "title": "Priors", "content_text": "prior belief"},
                {"index": 2, "start_ms": 300000, "end_ms": 600000, "title": "Posteriors", "content_text": "posterior update"}
            ],
            "aois": [
                {"label": "slides", "learning_related": true,
                 "shape": {"type": "rect", "center": [0.0, 2.0, -4.0], "half_u": [2.0, 0.0, 0.0], "half_v": [0.0, 1.0, 0.0]}},
                {"label": "lecturer", "learning_related": true,
                 "shape": {"type": "box", "min": [-3.0, 0.0, -4.5], "max": [-2.0, 2.0, -3.5]}}
            ]
        }"#;
        let descriptor = LectureDescriptor::from_json(text).unwrap();
        assert_eq!(descriptor.timeline().section_count(), 2);
        assert_eq!(descriptor.aoi_set().learning_labels(), vec!["slides", "lecturer"]);
        assert_eq!(descriptor.section(2).unwrap().title, "Posteriors");

        let bad = text.replace(r#""index": 2"#, r#""index": 3"#);
        assert!(LectureDescriptor::from_json(&bad).is_err());
    }

    #[test]
    fn stable_hash_is_stable() {
        assert_eq!(stable_hash64(b"lectern"), stable_hash64(b"lectern"));
        assert_ne!(stable_hash64(b"a"), stable_hash64(b"b"));
    }
}
