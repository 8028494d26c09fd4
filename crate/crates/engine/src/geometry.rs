//! Ray–AOI hit testing and gaze-sample labeling.
//!
//! Geometry here is purely functional: a sample either resolves to the
//! nearest AOI along its ray or to the reserved "away" label. Equal hit
//! distances break ties by AOI declaration order so reports stay
//! bit-stable across runs.

use thiserror::Error;

use crate::model::{AoiSet, AoiShape, GazeSample, AWAY_LABEL};
use crate::vec3::Vec3;

/// Minimum |direction·normal| for a ray to count as non-parallel.
const PARALLEL_EPS: f64 = 1e-12;
/// Slack on the rectangle's local coordinates so boundary shots hit.
const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("sample {index}: unknown label {label:?}")]
    UnknownLabel { index: usize, label: String },
}

/// A gaze sample resolved to a label. `valid=false` marks tracking loss;
/// such samples always carry the "away" label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub t_ms: u64,
    pub label: String,
    pub valid: bool,
}

impl LabeledSample {
    pub fn is_away(&self) -> bool {
        self.label == AWAY_LABEL
    }
}

/// Distance along a unit ray to an oriented rectangle, or `None` on a miss.
/// The hit point may lie on the boundary.
pub fn ray_hits_rectangle(origin: &Vec3, direction: &Vec3, center: &Vec3, half_u: &Vec3, half_v: &Vec3) -> Option<f64> {
    let normal = half_u.cross(half_v).normalized()?;
    let denom = direction.dot(&normal);
    if denom.abs() < PARALLEL_EPS {
        return None;
    }
    let t = center.sub(origin).dot(&normal) / denom;
    if t < 0.0 {
        return None;
    }
    let local = origin.add(&direction.scale(t)).sub(center);
    let a = local.dot(half_u) / half_u.dot(half_u);
    let b = local.dot(half_v) / half_v.dot(half_v);
    if a.abs() <= 1.0 + BOUNDARY_EPS && b.abs() <= 1.0 + BOUNDARY_EPS {
        Some(t)
    } else {
        None
    }
}

/// Slab-method distance along a unit ray to an axis-aligned box. An origin
/// inside the box reports distance 0.
pub fn ray_hits_box(origin: &Vec3, direction: &Vec3, min: &Vec3, max: &Vec3) -> Option<f64> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for axis in 0..3 {
        let (o, d, lo, hi) = match axis {
            0 => (origin.0, direction.0, min.0, max.0),
            1 => (origin.1, direction.1, min.1, max.1),
            _ => (origin.2, direction.2, min.2, max.2),
        };
        if d.abs() < PARALLEL_EPS {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let (t1, t2) = ((lo - o) / d, (hi - o) / d);
        let (near, far) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        t_enter = t_enter.max(near);
        t_exit = t_exit.min(far);
        if t_enter > t_exit {
            return None;
        }
    }
    if t_exit < 0.0 {
        return None;
    }
    Some(t_enter.max(0.0))
}

/// Distance along a ray to one AOI shape.
pub fn ray_hits_shape(origin: &Vec3, direction: &Vec3, shape: &AoiShape) -> Option<f64> {
    match shape {
        AoiShape::Rect { center, half_u, half_v } => ray_hits_rectangle(origin, direction, center, half_u, half_v),
        AoiShape::Box { min, max } => ray_hits_box(origin, direction, min, max),
    }
}

/// Nearest-hit label for one ray, ties broken by declaration order.
pub fn label_ray(origin: &Vec3, direction: &Vec3, aois: &AoiSet) -> String {
    let mut best: Option<(f64, &str)> = None;
    for aoi in aois.iter() {
        if let Some(t) = ray_hits_shape(origin, direction, aoi.shape()) {
            let closer = match best {
                Some((bt, _)) => t < bt,
                None => true,
            };
            if closer {
                best = Some((t, aoi.label()));
            }
        }
    }
    best.map(|(_, label)| label.to_string()).unwrap_or_else(|| AWAY_LABEL.to_string())
}

/// Resolves every sample to a label.
///
/// GEOMETRIC samples get their nearest-hit AOI (or "away"); LABELED
/// samples keep their label, which must name a known AOI or "away".
/// Invalid samples become "away" with `valid=false`. Length and
/// timestamps are preserved exactly.
pub fn label_samples(samples: &[GazeSample], aois: &AoiSet) -> Result<Vec<LabeledSample>, GeometryError> {
    let mut out = Vec::with_capacity(samples.len());
    for (index, sample) in samples.iter().enumerate() {
        let t_ms = sample.t_ms();
        if !sample.is_valid() {
            out.push(LabeledSample { t_ms, label: AWAY_LABEL.to_string(), valid: false });
            continue;
        }
        let label = if let Some(target) = sample.target() {
            if target != AWAY_LABEL && !aois.contains_label(target) {
                return Err(GeometryError::UnknownLabel { index, label: target.to_string() });
            }
            target.to_string()
        } else if let (Some(origin), Some(direction)) = (sample.origin(), sample.direction()) {
            label_ray(origin, direction, aois)
        } else {
            AWAY_LABEL.to_string()
        };
        out.push(LabeledSample { t_ms, label, valid: true });
    }
    Ok(out)
}
