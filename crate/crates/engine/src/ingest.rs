//! Strict streaming parser for gaze-log CSV files.
//!
//! Two layouts are accepted, distinguished by the header row:
//!
//! - `t_ms,target[,valid]` — LABELED: the headset already resolved each
//!   sample to an AOI label.
//! - `t_ms,ox,oy,oz,dx,dy,dz[,valid]` — GEOMETRIC: raw gaze rays; the
//!   direction is normalized during parsing and a zero-norm direction
//!   marks the sample invalid.
//!
//! Rows are `\n` or `\r\n` separated, comma-delimited, UTF-8. Timestamps
//! must not decrease; exact duplicates are collapsed (later row wins).

use thiserror::Error;

use crate::model::GazeSample;
use crate::vec3::Vec3;

/// Which columns a gaze log carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogMode {
    Labeled,
    Geometric,
}

/// Parsed header: the column layout of the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GazeLogHeader {
    pub mode: LogMode,
    pub has_valid: bool,
}

/// Aggregates the parser records alongside the sample sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestStats {
    /// Data rows parsed (excluding the header).
    pub rows: u64,
    /// Samples flagged invalid (explicit `valid=0` or degenerate direction).
    pub invalid_samples: u64,
    /// Rows discarded because a later row carried the same timestamp.
    pub dropped_duplicates: u64,
    /// Largest gap between consecutive kept samples, in milliseconds.
    pub max_gap_ms: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("line {line}: input is not valid UTF-8")]
    Encoding { line: u64 },
    #[error("header error: {reason} (column {column:?})")]
    Header { column: String, reason: &'static str },
    #[error("line {line}, field {field:?}: {reason}")]
    Row { line: u64, field: &'static str, reason: String },
    #[error("line {line}: timestamp decreases (pass sort=true to reorder)")]
    Monotonicity { line: u64 },
}

/// Parser switches. `sort` permits out-of-order timestamps by re-sorting
/// the rows (stable, so a duplicate timestamp still resolves to the later
/// row); off by default because reordering usually hides a logging bug.
#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    pub sort: bool,
}

const LABELED_COLS: [&str; 2] = ["t_ms", "target"];
const GEOMETRIC_COLS: [&str; 7] = ["t_ms", "ox", "oy", "oz", "dx", "dy", "dz"];

/// Parses the header row into a layout descriptor.
pub fn parse_header(line: &str) -> Result<GazeLogHeader, IngestError> {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    let (base, mode): (&[&str], LogMode) = if cols.len() >= 2 && cols[1] == "target" {
        (&LABELED_COLS, LogMode::Labeled)
    } else {
        (&GEOMETRIC_COLS, LogMode::Geometric)
    };
    for (i, expected) in base.iter().enumerate() {
        match cols.get(i) {
            Some(found) if found == expected => {}
            Some(found) => {
                return Err(IngestError::Header { column: found.to_string(), reason: "unknown column" })
            }
            None => return Err(IngestError::Header { column: expected.to_string(), reason: "missing column" }),
        }
    }
    let has_valid = match cols.len().checked_sub(base.len()) {
        Some(0) => false,
        Some(1) if cols[base.len()] == "valid" => true,
        _ => {
            return Err(IngestError::Header {
                column: cols.get(base.len()).unwrap_or(&"").to_string(),
                reason: "unknown column",
            })
        }
    };
    Ok(GazeLogHeader { mode, has_valid })
}

fn parse_u64(raw: &str, line: u64, field: &'static str) -> Result<u64, IngestError> {
    raw.trim()
        .parse::<u64>()
        .map_err(|e| IngestError::Row { line, field, reason: e.to_string() })
}

fn parse_f64(raw: &str, line: u64, field: &'static str) -> Result<f64, IngestError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|e: std::num::ParseFloatError| IngestError::Row { line, field, reason: e.to_string() })?;
    if !v.is_finite() {
        return Err(IngestError::Row { line, field, reason: "not finite".into() });
    }
    Ok(v)
}

fn parse_valid(raw: &str, line: u64) -> Result<bool, IngestError> {
    match raw.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(IngestError::Row { line, field: "valid", reason: format!("expected 0 or 1, got {other:?}") }),
    }
}

/// Parses a whole gaze log. Returns the samples strictly ordered by
/// timestamp together with ingest statistics. Never panics on arbitrary
/// input: any defect maps to a structured [`IngestError`].
pub fn parse_gaze_csv(bytes: &[u8], options: IngestOptions) -> Result<(Vec<GazeSample>, IngestStats), IngestError> {
    let mut stats = IngestStats::default();
    let mut samples: Vec<GazeSample> = Vec::new();
    let mut header: Option<GazeLogHeader> = None;
    let mut out_of_order = false;

    for (i, raw_line) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = (i + 1) as u64;
        let raw_line = raw_line.strip_suffix(b"\r").unwrap_or(raw_line);
        let line = std::str::from_utf8(raw_line).map_err(|_| IngestError::Encoding { line: line_no })?;
        if line.is_empty() {
            continue;
        }
        let Some(header) = header else {
            header = Some(parse_header(line)?);
            continue;
        };

        let fields: Vec<&str> = line.split(',').collect();
        let expected = match header.mode {
            LogMode::Labeled => 2,
            LogMode::Geometric => 7,
        } + usize::from(header.has_valid);
        if fields.len() != expected {
            return Err(IngestError::Row {
                line: line_no,
                field: "row",
                reason: format!("expected {expected} fields, got {}", fields.len()),
            });
        }

        let t_ms = parse_u64(fields[0], line_no, "t_ms")?;
        let sample = match header.mode {
            LogMode::Labeled => {
                let target = fields[1].trim();
                if target.is_empty() {
                    return Err(IngestError::Row { line: line_no, field: "target", reason: "empty label".into() });
                }
                let valid = if header.has_valid { parse_valid(fields[2], line_no)? } else { true };
                GazeSample::labeled(t_ms, target, valid)
            }
            LogMode::Geometric => {
                let origin = Vec3(
                    parse_f64(fields[1], line_no, "ox")?,
                    parse_f64(fields[2], line_no, "oy")?,
                    parse_f64(fields[3], line_no, "oz")?,
                );
                let direction = Vec3(
                    parse_f64(fields[4], line_no, "dx")?,
                    parse_f64(fields[5], line_no, "dy")?,
                    parse_f64(fields[6], line_no, "dz")?,
                );
                let valid = if header.has_valid { parse_valid(fields[7], line_no)? } else { true };
                GazeSample::geometric(t_ms, origin, direction, valid)
                    .map_err(|e| IngestError::Row { line: line_no, field: "direction", reason: e.to_string() })?
            }
        };

        stats.rows += 1;
        if let Some(prev) = samples.last() {
            if sample.t_ms() < prev.t_ms() {
                if !options.sort {
                    return Err(IngestError::Monotonicity { line: line_no });
                }
                out_of_order = true;
            }
        }
        samples.push(sample);
    }

    if header.is_none() {
        return Err(IngestError::Header { column: String::new(), reason: "missing header row" });
    }

    if out_of_order {
        samples.sort_by_key(GazeSample::t_ms); // stable: later rows stay later
    }

    // Duplicate timestamps: the later row wins.
    let mut deduped: Vec<GazeSample> = Vec::with_capacity(samples.len());
    for sample in samples {
        if deduped.last().map(GazeSample::t_ms) == Some(sample.t_ms()) {
            deduped.pop();
            stats.dropped_duplicates += 1;
        }
        deduped.push(sample);
    }

    stats.invalid_samples = deduped.iter().filter(|s| !s.is_valid()).count() as u64;
    stats.max_gap_ms = deduped.windows(2).map(|w| w[1].t_ms() - w[0].t_ms()).max().unwrap_or(0);

    Ok((deduped, stats))
}

/// Re-normalizes every stored direction. Samples whose direction cannot
/// be normalized are marked invalid; everything else passes through.
pub fn normalize_directions(samples: Vec<GazeSample>) -> Vec<GazeSample> {
    samples
        .into_iter()
        .map(|s| match (s.origin().copied(), s.direction().copied()) {
            (Some(origin), Some(dir)) => GazeSample::geometric(s.t_ms(), origin, dir, s.is_valid())
                .unwrap_or_else(|_| GazeSample::lost(s.t_ms())),
            _ => s,
        })
        .collect()
}

/// Serializes samples back to the CSV wire format. Floats use the shortest
/// round-trippable decimal form, so parse → write → parse is lossless.
pub fn write_gaze_csv(samples: &[GazeSample], mode: LogMode) -> String {
    let mut out = String::new();
    match mode {
        LogMode::Labeled => {
            out.push_str("t_ms,target,valid\n");
            for s in samples {
                let target = s.target().unwrap_or(crate::model::AWAY_LABEL);
                out.push_str(&format!("{},{},{}\n", s.t_ms(), target, u8::from(s.is_valid())));
            }
        }
        LogMode::Geometric => {
            out.push_str("t_ms,ox,oy,oz,dx,dy,dz,valid\n");
            for s in samples {
                let o = s.origin().copied().unwrap_or(Vec3::ZERO);
                let d = s.direction().copied().unwrap_or(Vec3::ZERO);
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    s.t_ms(),
                    o.0,
                    o.1,
                    o.2,
                    d.0,
                    d.1,
                    d.2,
                    u8::from(s.is_valid())
                ));
            }
        }
    }
    out
}
