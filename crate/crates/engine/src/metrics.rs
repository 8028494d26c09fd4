//! Dwell segmentation, AOI coverage, attention switches and the Attention
//! Distribution Index (ADI).
//!
//! The pipeline is: labeled samples → dwell segments (gap-clamped,
//! debounced) → per-window aggregates. The ADI for a section is the
//! convex combination
//!
//! ```text
//! adi = clamp01( w_c * coverage + w_s * (1 - min(1, rate / rate_cap)) )
//! ```
//!
//! so full coverage with zero switching scores 1 and zero coverage at or
//! above the capped switch rate scores 0. All aggregate values live in
//! [0, 1] by construction.

use std::collections::HashSet;

use serde::Deserialize;
use thiserror::Error;

use crate::geometry::LabeledSample;
use crate::model::{EngineConfig, GazeSample, LectureTimeline, AWAY_LABEL};
use crate::vec3::Vec3;

pub const MS_PER_MINUTE: u64 = 60_000;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("gaze trace is empty")]
    EmptyTrace,
    #[error("fixation filtering needs gaze directions; this trace is label-only")]
    Inapplicable,
}

/// Maximal run of one gaze label.
#[derive(Debug, Clone, PartialEq)]
pub struct DwellSegment {
    pub label: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl DwellSegment {
    pub fn len_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }
}

/// Per-section attention aggregates.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SectionMetrics {
    pub index: u32,
    pub start_ms: u64,
    pub end_ms: u64,
    pub aoi_coverage: f64,
    pub attention_switches: u64,
    pub switch_rate_per_min: f64,
    pub adi: f64,
    pub valid: bool,
    pub sample_count: u64,
}

/// The canonical per-session report handed to quiz personalization and
/// persisted as `metrics.json`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AttentionReport {
    pub session_id: String,
    pub lecture_id: String,
    pub generated_at_ms: u64,
    pub per_minute_coverage: Vec<f64>,
    pub sections: Vec<SectionMetrics>,
}

fn median(values: &mut [u64]) -> Option<u64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    Some(values[values.len() / 2])
}

/// Builds maximal dwell segments from ordered labeled samples.
///
/// Sample `i` dwells over `[t_i, t_{i+1})`. Gaps beyond `gap_clamp_ms`
/// are truncated, with the excess attributed to "away" (headset removal
/// or tracking loss). The final sample dwells for the median inter-sample
/// interval. Label runs shorter than `switch_debounce_ms` are absorbed
/// into the surrounding label.
pub fn build_dwell_segments(samples: &[LabeledSample], config: &EngineConfig) -> Result<Vec<DwellSegment>, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let mut intervals: Vec<u64> = samples.windows(2).map(|w| w[1].t_ms - w[0].t_ms).filter(|&d| d > 0).collect();
    let fallback = (1000.0 / config.nominal_rate_hz).round().max(1.0) as u64;
    let final_dwell = median(&mut intervals[..]).unwrap_or(fallback).min(config.gap_clamp_ms);

    let mut runs: Vec<DwellSegment> = Vec::new();
    let mut push = |label: &str, start: u64, end: u64| {
        if end <= start {
            return;
        }
        if let Some(last) = runs.last_mut() {
            if last.label == label && last.end_ms == start {
                last.end_ms = end;
                return;
            }
        }
        runs.push(DwellSegment { label: label.to_string(), start_ms: start, end_ms: end });
    };

    for (i, sample) in samples.iter().enumerate() {
        let start = sample.t_ms;
        let end = match samples.get(i + 1) {
            Some(next) => next.t_ms,
            None => start + final_dwell,
        };
        if end <= start {
            continue;
        }
        if end - start > config.gap_clamp_ms {
            push(&sample.label, start, start + config.gap_clamp_ms);
            push(AWAY_LABEL, start + config.gap_clamp_ms, end);
        } else {
            push(&sample.label, start, end);
        }
    }

    Ok(debounce_runs(runs, config.switch_debounce_ms))
}

fn coalesce(runs: Vec<DwellSegment>) -> Vec<DwellSegment> {
    let mut out: Vec<DwellSegment> = Vec::with_capacity(runs.len());
    for run in runs {
        match out.last_mut() {
            Some(last) if last.label == run.label && last.end_ms == run.start_ms => last.end_ms = run.end_ms,
            _ => out.push(run),
        }
    }
    out
}

fn debounce_runs(runs: Vec<DwellSegment>, debounce_ms: u64) -> Vec<DwellSegment> {
    let mut runs = coalesce(runs);
    if debounce_ms == 0 {
        return runs;
    }
    while runs.len() > 1 {
        let Some(idx) = runs.iter().position(|r| r.len_ms() < debounce_ms) else {
            break;
        };
        let run = runs.remove(idx);
        if idx > 0 {
            runs[idx - 1].end_ms = run.end_ms;
        } else {
            runs[0].start_ms = run.start_ms;
        }
        runs = coalesce(runs);
    }
    runs
}

fn overlap_ms(seg: &DwellSegment, start: u64, end: u64) -> u64 {
    let lo = seg.start_ms.max(start);
    let hi = seg.end_ms.min(end);
    hi.saturating_sub(lo)
}

/// Fraction of `[window_start, window_end)` spent on learning-related
/// labels. Time not covered by any segment counts as off-AOI.
pub fn coverage(segments: &[DwellSegment], window_start_ms: u64, window_end_ms: u64, learning: &HashSet<String>) -> f64 {
    debug_assert!(window_end_ms > window_start_ms);
    let on: u64 = segments
        .iter()
        .filter(|s| learning.contains(&s.label))
        .map(|s| overlap_ms(s, window_start_ms, window_end_ms))
        .sum();
    on as f64 / (window_end_ms - window_start_ms) as f64
}

/// One coverage value per 60-second window over `[0, duration_ms)`; a
/// trailing partial window is normalized by its own length.
pub fn per_minute_coverage(segments: &[DwellSegment], duration_ms: u64, learning: &HashSet<String>) -> Vec<f64> {
    debug_assert!(duration_ms > 0);
    let windows = duration_ms.div_ceil(MS_PER_MINUTE);
    (0..windows)
        .map(|k| {
            let start = k * MS_PER_MINUTE;
            let end = (start + MS_PER_MINUTE).min(duration_ms);
            coverage(segments, start, end, learning)
        })
        .collect()
}

/// Number of label transitions whose boundary time falls in
/// `[window_start, window_end)`. Transitions into and out of "away" count.
pub fn count_switches(segments: &[DwellSegment], window_start_ms: u64, window_end_ms: u64) -> u64 {
    segments
        .windows(2)
        .filter(|w| w[0].label != w[1].label)
        .filter(|w| (window_start_ms..window_end_ms).contains(&w[0].end_ms))
        .count() as u64
}

/// The Attention Distribution Index for one coverage / switch-rate pair.
pub fn adi(coverage: f64, switch_rate_per_min: f64, config: &EngineConfig) -> f64 {
    let penalty = 1.0 - (switch_rate_per_min / config.switch_rate_cap_per_min).min(1.0);
    (config.adi_coverage_weight * coverage + config.adi_switch_weight * penalty).clamp(0.0, 1.0)
}

fn metrics_for_section(
    section: &crate::model::Section,
    segments: &[DwellSegment],
    samples: &[LabeledSample],
    learning: &HashSet<String>,
    config: &EngineConfig,
) -> SectionMetrics {
    let (start, end) = (section.start_ms, section.end_ms);
    let sample_count = samples.iter().filter(|s| (start..end).contains(&s.t_ms)).count() as u64;
    let section_minutes = (end - start) as f64 / MS_PER_MINUTE as f64;
    let aoi_coverage = coverage(segments, start, end, learning);
    let attention_switches = count_switches(segments, start, end);
    let switch_rate_per_min = attention_switches as f64 / section_minutes;
    let expected = config.min_section_sample_fraction * config.nominal_rate_hz * (end - start) as f64 / 1000.0;
    SectionMetrics {
        index: section.index,
        start_ms: start,
        end_ms: end,
        aoi_coverage,
        attention_switches,
        switch_rate_per_min,
        adi: adi(aoi_coverage, switch_rate_per_min, config),
        valid: sample_count as f64 + 1e-9 >= expected,
        sample_count,
    }
}

/// Per-section metrics for the whole timeline. Sections with too few
/// samples still get their numbers but are flagged `valid=false`, so the
/// report shape is stable.
pub fn section_metrics(
    samples: &[LabeledSample],
    timeline: &LectureTimeline,
    learning: &HashSet<String>,
    config: &EngineConfig,
) -> Result<Vec<SectionMetrics>, MetricsError> {
    let segments = build_dwell_segments(samples, config)?;
    Ok(timeline
        .sections()
        .iter()
        .map(|section| metrics_for_section(section, &segments, samples, learning, config))
        .collect())
}

/// Assembles the canonical [`AttentionReport`]. `generated_at_ms` is the
/// trace end (last sample timestamp), keeping the artifact a pure
/// function of its inputs.
pub fn build_report(
    session_id: &str,
    samples: &[LabeledSample],
    timeline: &LectureTimeline,
    learning: &HashSet<String>,
    config: &EngineConfig,
) -> Result<AttentionReport, MetricsError> {
    let segments = build_dwell_segments(samples, config)?;
    let sections = timeline
        .sections()
        .iter()
        .map(|section| metrics_for_section(section, &segments, samples, learning, config))
        .collect();
    Ok(AttentionReport {
        session_id: session_id.to_string(),
        lecture_id: timeline.lecture_id().to_string(),
        generated_at_ms: samples.last().map(|s| s.t_ms).unwrap_or(0),
        per_minute_coverage: per_minute_coverage(&segments, timeline.duration_ms(), learning),
        sections,
    })
}

/// Dispersion-threshold (I-DT) fixation filter.
///
/// Samples that belong to no fixation window — a window of at least
/// `min_duration_ms` whose directions stay within `dispersion_deg` of
/// their centroid — are relabeled "away". Needs the original geometric
/// samples alongside the labels.
pub fn fixation_filter(
    samples: &[GazeSample],
    labeled: &[LabeledSample],
    dispersion_deg: f64,
    min_duration_ms: u64,
) -> Result<Vec<LabeledSample>, MetricsError> {
    assert_eq!(samples.len(), labeled.len(), "samples and labels must be parallel");
    if samples.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    if samples.iter().any(|s| s.target().is_some() || (s.is_valid() && s.direction().is_none())) {
        return Err(MetricsError::Inapplicable);
    }

    let dirs: Vec<Option<Vec3>> = samples.iter().map(|s| s.direction().copied()).collect();
    let times: Vec<u64> = samples.iter().map(|s| s.t_ms()).collect();
    let n = samples.len();
    let mut in_fixation = vec![false; n];

    let dispersion_ok = |lo: usize, hi: usize| -> bool {
        let mut sum = Vec3::ZERO;
        for d in &dirs[lo..=hi] {
            match d {
                Some(v) => sum = sum.add(v),
                None => return false,
            }
        }
        let Some(centroid) = sum.normalized() else { return false };
        dirs[lo..=hi]
            .iter()
            .all(|d| d.map(|v| v.angle_deg(&centroid) <= dispersion_deg).unwrap_or(false))
    };

    let mut lo = 0;
    while lo < n {
        if dirs[lo].is_none() {
            lo += 1;
            continue;
        }
        // Smallest window starting at lo that spans min_duration.
        let mut hi = lo;
        while hi + 1 < n && times[hi] - times[lo] < min_duration_ms {
            hi += 1;
        }
        if times[hi] - times[lo] < min_duration_ms {
            break;
        }
        if dispersion_ok(lo, hi) {
            while hi + 1 < n && dispersion_ok(lo, hi + 1) {
                hi += 1;
            }
            for flag in &mut in_fixation[lo..=hi] {
                *flag = true;
            }
            lo = hi + 1;
        } else {
            lo += 1;
        }
    }

    Ok(labeled
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if in_fixation[i] {
                l.clone()
            } else {
                LabeledSample { t_ms: l.t_ms, label: AWAY_LABEL.to_string(), valid: l.valid }
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Canonical report serialization
// ---------------------------------------------------------------------------

/// Formats a report float: round-half-even at six fractional digits,
/// trailing zeros trimmed, at least one fractional digit kept.
pub fn format_report_float(x: f64) -> String {
    debug_assert!(x.is_finite());
    let scaled = (x * 1e6).round_ties_even();
    let v = if scaled == 0.0 { 0.0 } else { scaled / 1e6 };
    let mut s = format!("{v:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.push('0');
    }
    s
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

impl SectionMetrics {
    fn to_canonical_json(&self) -> String {
        format!(
            "{{\"index\": {}, \"start_ms\": {}, \"end_ms\": {}, \"aoi_coverage\": {}, \"attention_switches\": {}, \"switch_rate_per_min\": {}, \"adi\": {}, \"valid\": {}, \"sample_count\": {}}}",
            self.index,
            self.start_ms,
            self.end_ms,
            format_report_float(self.aoi_coverage),
            self.attention_switches,
            format_report_float(self.switch_rate_per_min),
            format_report_float(self.adi),
            self.valid,
            self.sample_count
        )
    }
}

impl AttentionReport {
    /// The byte-stable wire form: fixed field order, floats with at most
    /// six fractional digits. Both the CLI and the HTTP service emit
    /// exactly these bytes.
    pub fn to_canonical_json(&self) -> String {
        let minutes: Vec<String> = self.per_minute_coverage.iter().map(|&v| format_report_float(v)).collect();
        let sections: Vec<String> = self.sections.iter().map(|s| format!("    {}", s.to_canonical_json())).collect();
        format!(
            "{{\n  \"session_id\": {},\n  \"lecture_id\": {},\n  \"generated_at_ms\": {},\n  \"per_minute_coverage\": [{}],\n  \"sections\": [\n{}\n  ]\n}}\n",
            json_string(&self.session_id),
            json_string(&self.lecture_id),
            self.generated_at_ms,
            minutes.join(", "),
            sections.join(",\n")
        )
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Sections usable for personalization.
    pub fn valid_sections(&self) -> impl Iterator<Item = &SectionMetrics> {
        self.sections.iter().filter(|s| s.valid)
    }
}
