//! Seeded synthetic gaze traces from per-section attention profiles.
//!
//! The simulator is the end-to-end test substrate: it emits the exact
//! ingest CSV formats, is byte-reproducible for a fixed seed, and in
//! geometric mode every ray is verified against the hit-testing code so
//! the intended label sequence survives the round trip.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::label_ray;
use crate::model::{AoiSet, AoiShape, LectureTimeline, AWAY_LABEL};
use crate::vec3::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum SimulateError {
    #[error("profile has {found} section entries, timeline has {expected}")]
    SectionCountMismatch { expected: usize, found: usize },
    #[error("section {index}: on_aoi_probability {value} outside [0,1]")]
    BadProbability { index: u32, value: f64 },
    #[error("section {index}: mean_dwell_ms must be positive")]
    BadDwell { index: u32 },
    #[error("sample_rate_hz must be positive")]
    BadRate,
    #[error("section {index}: distractor label {label:?} is not an AOI or \"away\"")]
    UnknownDistractor { index: u32, label: String },
    #[error("profile targets AOIs but the scene has no learning-related AOI")]
    NoLearningAoi,
    #[error("could not aim a ray at AOI {label:?}; is it occluded from the observer?")]
    UnreachableAoi { label: String },
    #[error("could not find an away direction; AOIs surround the observer")]
    NoAwayDirection,
}

/// Attention behaviour for one lecture section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionAttention {
    pub on_aoi_probability: f64,
    pub mean_dwell_ms: f64,
    #[serde(default)]
    pub distractor_labels: Vec<String>,
}

fn default_observer() -> Vec3 {
    Vec3(0.0, 1.6, 0.0)
}

fn default_rate() -> f64 {
    60.0
}

/// A full simulation profile; serialized as the `simulate` CLI's
/// profile-file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionProfile {
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    pub seed: u64,
    #[serde(default = "default_observer")]
    pub observer: Vec3,
    pub sections: Vec<SectionAttention>,
}

impl AttentionProfile {
    /// Uniform profile: every section shares one on-AOI probability and
    /// mean dwell.
    pub fn uniform(sections: usize, on_aoi_probability: f64, mean_dwell_ms: f64, seed: u64) -> Self {
        AttentionProfile {
            sample_rate_hz: 60.0,
            seed,
            observer: default_observer(),
            sections: vec![
                SectionAttention { on_aoi_probability, mean_dwell_ms, distractor_labels: Vec::new() };
                sections
            ],
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    Labeled,
    Geometric,
}

fn validate(profile: &AttentionProfile, timeline: &LectureTimeline, aois: &AoiSet) -> Result<(), SimulateError> {
    if !(profile.sample_rate_hz.is_finite() && profile.sample_rate_hz > 0.0) {
        return Err(SimulateError::BadRate);
    }
    if profile.sections.len() != timeline.section_count() {
        return Err(SimulateError::SectionCountMismatch {
            expected: timeline.section_count(),
            found: profile.sections.len(),
        });
    }
    for (i, section) in profile.sections.iter().enumerate() {
        let index = (i + 1) as u32;
        if !(0.0..=1.0).contains(&section.on_aoi_probability) {
            return Err(SimulateError::BadProbability { index, value: section.on_aoi_probability });
        }
        if !(section.mean_dwell_ms.is_finite() && section.mean_dwell_ms > 0.0) {
            return Err(SimulateError::BadDwell { index });
        }
        for label in &section.distractor_labels {
            if label != AWAY_LABEL && !aois.contains_label(label) {
                return Err(SimulateError::UnknownDistractor { index, label: label.clone() });
            }
        }
        if section.on_aoi_probability > 0.0 && aois.learning_labels().is_empty() {
            return Err(SimulateError::NoLearningAoi);
        }
    }
    Ok(())
}

fn section_rng(seed: u64, section_index: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add((section_index as u64).wrapping_mul(0x9E3779B97F4A7C15)))
}

fn exponential_ms(rng: &mut ChaCha8Rng, mean_ms: f64) -> u64 {
    let u: f64 = rng.random();
    let dwell = -mean_ms * (1.0 - u).ln();
    dwell.ceil().max(1.0) as u64
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm() <= 1.0 {
            if let Some(u) = v.normalized() {
                return u;
            }
        }
    }
}

/// A ray from the observer through a point inside the AOI, verified to
/// actually label as that AOI (a nearer AOI may occlude the sampled point).
fn aim_at_aoi(rng: &mut ChaCha8Rng, observer: &Vec3, label: &str, aois: &AoiSet) -> Result<Vec3, SimulateError> {
    let aoi = aois.iter().find(|a| a.label() == label).expect("label comes from the AOI set");
    for _ in 0..256 {
        let point = match aoi.shape() {
            AoiShape::Rect { center, half_u, half_v } => {
                let a: f64 = rng.random_range(-0.95..0.95);
                let b: f64 = rng.random_range(-0.95..0.95);
                center.add(&half_u.scale(a)).add(&half_v.scale(b))
            }
            AoiShape::Box { min, max } => {
                let lerp = |lo: f64, hi: f64, t: f64| lo + (hi - lo) * (0.05 + 0.9 * t);
                Vec3(
                    lerp(min.0, max.0, rng.random()),
                    lerp(min.1, max.1, rng.random()),
                    lerp(min.2, max.2, rng.random()),
                )
            }
        };
        if let Some(direction) = point.sub(observer).normalized() {
            if label_ray(observer, &direction, aois) == label {
                return Ok(direction);
            }
        }
    }
    Err(SimulateError::UnreachableAoi { label: label.to_string() })
}

fn aim_away(rng: &mut ChaCha8Rng, observer: &Vec3, aois: &AoiSet) -> Result<Vec3, SimulateError> {
    for _ in 0..1024 {
        let direction = random_unit(rng);
        if label_ray(observer, &direction, aois) == AWAY_LABEL {
            return Ok(direction);
        }
    }
    Err(SimulateError::NoAwayDirection)
}

/// Generates a gaze CSV for the profile over the timeline.
///
/// Attention alternates between dwell segments drawn from
/// `exponential(mean_dwell_ms)`; each dwell targets a learning-related
/// AOI with the section's probability, otherwise one of its distractor
/// labels ("away" when none are configured). Sections use independently
/// derived seeds, so the trace is identical for a fixed profile.
pub fn simulate(
    profile: &AttentionProfile,
    timeline: &LectureTimeline,
    aois: &AoiSet,
    mode: SimMode,
) -> Result<String, SimulateError> {
    validate(profile, timeline, aois)?;
    let learning = aois.learning_labels();
    let step_ms = 1000.0 / profile.sample_rate_hz;

    let mut out = String::new();
    out.push_str(match mode {
        SimMode::Labeled => "t_ms,target\n",
        SimMode::Geometric => "t_ms,ox,oy,oz,dx,dy,dz\n",
    });

    let away_only = vec![AWAY_LABEL.to_string()];
    let mut k: u64 = 0; // global sample counter, shared across sections
    for (section, attention) in timeline.sections().iter().zip(&profile.sections) {
        let mut rng = section_rng(profile.seed, section.index);
        let distractors: &[String] = if attention.distractor_labels.is_empty() {
            &away_only
        } else {
            &attention.distractor_labels
        };

        // Dwell process for this section.
        let mut dwells: Vec<(String, u64)> = Vec::new(); // (label, end_ms)
        let mut t = section.start_ms;
        while t < section.end_ms {
            let dwell_ms = exponential_ms(&mut rng, attention.mean_dwell_ms);
            let on_aoi = rng.random::<f64>() < attention.on_aoi_probability;
            let label = if on_aoi {
                learning[rng.random_range(0..learning.len())].clone()
            } else {
                distractors[rng.random_range(0..distractors.len())].clone()
            };
            t = (t + dwell_ms).min(section.end_ms);
            dwells.push((label, t));
        }

        // Emit samples falling inside this section.
        let mut dwell_idx = 0usize;
        loop {
            let t_ms = (k as f64 * step_ms).round() as u64;
            if t_ms >= section.end_ms {
                break;
            }
            if t_ms >= section.start_ms {
                while dwells[dwell_idx].1 <= t_ms {
                    dwell_idx += 1;
                }
                let label = &dwells[dwell_idx].0;
                match mode {
                    SimMode::Labeled => out.push_str(&format!("{t_ms},{label}\n")),
                    SimMode::Geometric => {
                        let direction = if label == AWAY_LABEL {
                            aim_away(&mut rng, &profile.observer, aois)?
                        } else {
                            aim_at_aoi(&mut rng, &profile.observer, label, aois)?
                        };
                        let o = &profile.observer;
                        out.push_str(&format!(
                            "{t_ms},{},{},{},{},{},{}\n",
                            o.0, o.1, o.2, direction.0, direction.1, direction.2
                        ));
                    }
                }
            }
            k += 1;
        }
    }
    Ok(out)
}
