//! File formats: landmark streams, labels and external states, calibration
//! profiles, session scripts, event and per-frame record logs.
//!
//! Streams are JSON lines. Writers use fixed decimal formatting (3 places
//! for timestamps, 6 for coordinates and metric values) so that logs are
//! byte-reproducible; readers ignore unknown keys.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{CalibrationProfile, ProfileKind};
use crate::eval::FrameLabel;
use crate::landmarks::{LandmarkFrame, Point, Scheme};
use crate::pipeline::{
    AlertEvent, AlertKind, EyeState, ExternalState, ExternalStates, FrameRecord, HeadState,
    MouthState,
};
use crate::synth::{ScriptError, SessionScript};

pub const PROFILE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("read/write failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: t={t} does not follow t={prev}")]
    StreamOrder { line: u64, prev: f64, t: f64 },
    #[error("invalid document: {0}")]
    Document(String),
    #[error("unsupported format_version {found} (expected {expected})")]
    UnsupportedVersion { found: u64, expected: u32 },
}

impl From<ScriptError> for IoError {
    fn from(e: ScriptError) -> Self {
        match e {
            ScriptError::UnsupportedVersion(found) => IoError::UnsupportedVersion {
                found: found.into(),
                expected: crate::synth::SCRIPT_FORMAT_VERSION,
            },
            other => IoError::Document(other.to_string()),
        }
    }
}

/// `v` with exactly `decimals` places; never emits a negative zero.
pub fn fmt_fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "null".to_string(), |v| fmt_fixed(v, decimals))
}

fn fmt_opt_str(v: Option<&str>) -> String {
    v.map_or_else(|| "null".to_string(), |s| format!("\"{s}\""))
}

/// Iterator over the non-blank lines of a JSON-lines source, each parsed
/// with `parse`, optionally enforcing strictly increasing timestamps.
pub struct JsonLines<R, T> {
    reader: R,
    buf: String,
    line: u64,
    last_t: Option<f64>,
    parse: fn(&str) -> Result<T, String>,
    /// Timestamp that must strictly increase line over line, if any.
    time_of: Option<fn(&T) -> f64>,
    done: bool,
}

impl<R: BufRead, T> JsonLines<R, T> {
    fn new(
        reader: R,
        parse: fn(&str) -> Result<T, String>,
        time_of: Option<fn(&T) -> f64>,
    ) -> Self {
        Self {
            reader,
            buf: String::new(),
            line: 0,
            last_t: None,
            parse,
            time_of,
            done: false,
        }
    }

    /// Line number of the most recently read line.
    pub fn line(&self) -> u64 {
        self.line
    }
}

impl<R: BufRead, T> Iterator for JsonLines<R, T> {
    type Item = Result<T, IoError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
            self.line += 1;
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            let line = self.line;
            let item = match (self.parse)(text) {
                Ok(item) => item,
                Err(message) => return Some(Err(IoError::Parse { line, message })),
            };
            if let Some(time_of) = self.time_of {
                let t = time_of(&item);
                if let Some(prev) = self.last_t {
                    if t <= prev {
                        return Some(Err(IoError::StreamOrder { line, prev, t }));
                    }
                }
                self.last_t = Some(t);
            }
            return Some(Ok(item));
        }
    }
}

fn json<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

fn non_negative_time(t: f64) -> Result<f64, String> {
    if t.is_finite() && t >= 0.0 {
        Ok(t)
    } else {
        Err(format!("timestamp {t} must be non-negative"))
    }
}

// ---- landmark frames -------------------------------------------------------

#[derive(Deserialize)]
struct FrameLine {
    t: f64,
    scheme: String,
    face: bool,
    #[serde(default)]
    points: Vec<Vec<f64>>,
}

fn parse_frame(text: &str) -> Result<LandmarkFrame, String> {
    let raw: FrameLine = json(text)?;
    let scheme: Scheme = raw.scheme.parse().map_err(|e: crate::landmarks::LandmarkError| e.to_string())?;
    let mut points = Vec::with_capacity(raw.points.len());
    for (i, p) in raw.points.iter().enumerate() {
        // a third (depth) component is accepted and dropped
        match p.as_slice() {
            [x, y] | [x, y, _] => points.push(Point::new(*x, *y)),
            _ => return Err(format!("point {i} must have 2 or 3 coordinates, got {}", p.len())),
        }
    }
    LandmarkFrame::from_parts(raw.t, scheme, raw.face, points).map_err(|e| e.to_string())
}

pub type FrameReader<R> = JsonLines<R, LandmarkFrame>;

/// Streaming landmark-frame reader.
pub fn read_frames<R: BufRead>(reader: R) -> FrameReader<R> {
    JsonLines::new(reader, parse_frame, Some(LandmarkFrame::t))
}

pub fn frame_line(frame: &LandmarkFrame) -> String {
    let mut s = String::with_capacity(32 + frame.points().len() * 26);
    s.push_str("{\"t\":");
    s.push_str(&fmt_fixed(frame.t(), 3));
    s.push_str(",\"scheme\":\"");
    s.push_str(frame.scheme().as_str());
    s.push_str("\",\"face\":");
    s.push_str(if frame.face_present() { "true" } else { "false" });
    s.push_str(",\"points\":[");
    for (i, p) in frame.points().iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push('[');
        s.push_str(&fmt_fixed(p.x, 6));
        s.push(',');
        s.push_str(&fmt_fixed(p.y, 6));
        s.push(']');
    }
    s.push_str("]}");
    s
}

pub fn write_frames<'a, W: Write>(
    sink: &mut W,
    frames: impl IntoIterator<Item = &'a LandmarkFrame>,
) -> Result<(), IoError> {
    for f in frames {
        writeln!(sink, "{}", frame_line(f))?;
    }
    Ok(())
}

// ---- labels and external states -------------------------------------------

#[derive(Deserialize)]
struct StateLine {
    t: f64,
    eye: EyeState,
    mouth: MouthState,
    #[serde(default)]
    head: Option<HeadState>,
    #[serde(default = "yes")]
    face: bool,
}

fn yes() -> bool {
    true
}

fn parse_label(text: &str) -> Result<FrameLabel, String> {
    let raw: StateLine = json(text)?;
    Ok(FrameLabel {
        t: non_negative_time(raw.t)?,
        eye: raw.eye,
        mouth: raw.mouth,
        head: raw.head,
        face_present: raw.face,
    })
}

fn label_time(l: &FrameLabel) -> f64 {
    l.t
}

pub type LabelReader<R> = JsonLines<R, FrameLabel>;

pub fn label_lines<R: BufRead>(reader: R) -> LabelReader<R> {
    JsonLines::new(reader, parse_label, Some(label_time))
}

pub fn read_labels<R: BufRead>(reader: R) -> Result<Vec<FrameLabel>, IoError> {
    label_lines(reader).collect()
}

pub fn label_line(l: &FrameLabel) -> String {
    let head = l
        .head
        .map(|h| format!(",\"head\":\"{}\"", h.as_str()))
        .unwrap_or_default();
    format!(
        "{{\"t\":{},\"eye\":\"{}\",\"mouth\":\"{}\"{head},\"face\":{}}}",
        fmt_fixed(l.t, 3),
        l.eye.as_str(),
        l.mouth.as_str(),
        l.face_present
    )
}

pub fn write_labels<'a, W: Write>(
    sink: &mut W,
    labels: impl IntoIterator<Item = &'a FrameLabel>,
) -> Result<(), IoError> {
    for l in labels {
        writeln!(sink, "{}", label_line(l))?;
    }
    Ok(())
}

/// External classifier states share the label line format. Lines with
/// `"face": false` carry no state.
pub fn read_external_states<R: BufRead>(reader: R) -> Result<ExternalStates, IoError> {
    let mut out = ExternalStates::new();
    for l in label_lines(reader) {
        let l = l?;
        if l.face_present {
            out.insert(
                l.t,
                ExternalState {
                    eye: l.eye,
                    mouth: l.mouth,
                    head: l.head,
                },
            );
        }
    }
    Ok(out)
}

/// Writes a pipeline's own decisions in external-state format.
pub fn write_external_states<'a, W: Write>(
    sink: &mut W,
    records: impl IntoIterator<Item = &'a FrameRecord>,
) -> Result<(), IoError> {
    for r in records {
        if let (Some(eye), Some(mouth)) = (r.eye, r.mouth) {
            let l = FrameLabel {
                t: r.t,
                eye,
                mouth,
                head: r.head,
                face_present: true,
            };
            writeln!(sink, "{}", label_line(&l))?;
        }
    }
    Ok(())
}

// ---- events ----------------------------------------------------------------

pub fn event_line(e: &AlertEvent) -> String {
    format!(
        "{{\"kind\":\"{}\",\"onset_t\":{},\"emitted_t\":{},\"value\":{},\"threshold\":{}}}",
        e.kind.as_str(),
        fmt_fixed(e.onset_t, 3),
        fmt_fixed(e.emitted_t, 3),
        fmt_fixed(e.value, 6),
        fmt_fixed(e.threshold, 6)
    )
}

pub fn write_events<'a, W: Write>(
    sink: &mut W,
    events: impl IntoIterator<Item = &'a AlertEvent>,
) -> Result<(), IoError> {
    for e in events {
        writeln!(sink, "{}", event_line(e))?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct EventLine {
    kind: AlertKind,
    onset_t: f64,
    emitted_t: f64,
    value: f64,
    threshold: f64,
}

fn parse_event(text: &str) -> Result<AlertEvent, String> {
    let raw: EventLine = json(text)?;
    let onset_t = non_negative_time(raw.onset_t)?;
    if raw.emitted_t < onset_t {
        return Err(format!("emitted_t {} precedes onset_t {onset_t}", raw.emitted_t));
    }
    Ok(AlertEvent {
        kind: raw.kind,
        onset_t,
        emitted_t: raw.emitted_t,
        value: raw.value,
        threshold: raw.threshold,
    })
}

/// Events are ordered by `emitted_t`; several may share one frame.
pub fn read_events<R: BufRead>(reader: R) -> Result<Vec<AlertEvent>, IoError> {
    let mut out: Vec<AlertEvent> = Vec::new();
    let mut lines = JsonLines::new(reader, parse_event, None);
    while let Some(next) = lines.next() {
        let e = next?;
        if let Some(prev) = out.last() {
            if e.emitted_t < prev.emitted_t {
                return Err(IoError::StreamOrder {
                    line: lines.line(),
                    prev: prev.emitted_t,
                    t: e.emitted_t,
                });
            }
        }
        out.push(e);
    }
    Ok(out)
}

// ---- per-frame records -----------------------------------------------------

pub fn record_line(r: &FrameRecord) -> String {
    format!(
        concat!(
            "{{\"t\":{},\"face\":{},\"ear\":{},\"mar\":{},\"head_drop\":{},",
            "\"ear_smoothed\":{},\"mar_smoothed\":{},\"head_drop_smoothed\":{},",
            "\"eye\":{},\"mouth\":{},\"head\":{},\"perclos\":{}}}"
        ),
        fmt_fixed(r.t, 3),
        r.face_present,
        fmt_opt(r.ear, 6),
        fmt_opt(r.mar, 6),
        fmt_opt(r.head_drop, 6),
        fmt_opt(r.ear_smoothed, 6),
        fmt_opt(r.mar_smoothed, 6),
        fmt_opt(r.head_drop_smoothed, 6),
        fmt_opt_str(r.eye.map(EyeState::as_str)),
        fmt_opt_str(r.mouth.map(MouthState::as_str)),
        fmt_opt_str(r.head.map(HeadState::as_str)),
        fmt_opt(r.perclos, 6),
    )
}

pub fn write_records<'a, W: Write>(
    sink: &mut W,
    records: impl IntoIterator<Item = &'a FrameRecord>,
) -> Result<(), IoError> {
    for r in records {
        writeln!(sink, "{}", record_line(r))?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct RecordLine {
    t: f64,
    face: bool,
    ear: Option<f64>,
    mar: Option<f64>,
    head_drop: Option<f64>,
    ear_smoothed: Option<f64>,
    mar_smoothed: Option<f64>,
    head_drop_smoothed: Option<f64>,
    eye: Option<EyeState>,
    mouth: Option<MouthState>,
    head: Option<HeadState>,
    perclos: Option<f64>,
}

fn parse_record(text: &str) -> Result<FrameRecord, String> {
    let r: RecordLine = json(text)?;
    Ok(FrameRecord {
        t: non_negative_time(r.t)?,
        face_present: r.face,
        ear: r.ear,
        mar: r.mar,
        head_drop: r.head_drop,
        ear_smoothed: r.ear_smoothed,
        mar_smoothed: r.mar_smoothed,
        head_drop_smoothed: r.head_drop_smoothed,
        eye: r.eye,
        mouth: r.mouth,
        head: r.head,
        perclos: r.perclos,
    })
}

fn record_time(r: &FrameRecord) -> f64 {
    r.t
}

pub fn record_lines<R: BufRead>(reader: R) -> JsonLines<R, FrameRecord> {
    JsonLines::new(reader, parse_record, Some(record_time))
}

pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<FrameRecord>, IoError> {
    record_lines(reader).collect()
}

// ---- profiles --------------------------------------------------------------

/// On-disk calibration profile. Fields are declared in key order so the
/// serialized document is canonical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProfileDoc {
    baseline_ear: f64,
    baseline_head_drop: f64,
    baseline_mar: f64,
    created_at: u64,
    duration: f64,
    ear_factor: f64,
    ear_threshold: f64,
    format_version: u32,
    frames_used: usize,
    head_drop_limit: f64,
    head_factor: f64,
    kind: ProfileKind,
    mar_factor: f64,
    mar_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileFile {
    pub profile: CalibrationProfile,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

pub fn profile_document(file: &ProfileFile) -> String {
    let p = &file.profile;
    let doc = ProfileDoc {
        baseline_ear: p.baseline_ear,
        baseline_head_drop: p.baseline_head_drop,
        baseline_mar: p.baseline_mar,
        created_at: file.created_at,
        duration: p.duration,
        ear_factor: p.ear_factor,
        ear_threshold: p.ear_threshold,
        format_version: PROFILE_FORMAT_VERSION,
        frames_used: p.frames_used,
        head_drop_limit: p.head_drop_limit,
        head_factor: p.head_factor,
        kind: p.kind,
        mar_factor: p.mar_factor,
        mar_threshold: p.mar_threshold,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("profile serializes");
    s.push('\n');
    s
}

pub fn write_profile<W: Write>(sink: &mut W, file: &ProfileFile) -> Result<(), IoError> {
    sink.write_all(profile_document(file).as_bytes())?;
    Ok(())
}

fn check_version(value: &serde_json::Value, expected: u32) -> Result<(), IoError> {
    match value.get("format_version") {
        Some(v) => match v.as_u64() {
            Some(found) if found == u64::from(expected) => Ok(()),
            Some(found) => Err(IoError::UnsupportedVersion { found, expected }),
            None => Err(IoError::Document("format_version must be an integer".into())),
        },
        None => Err(IoError::Document("missing format_version".into())),
    }
}

pub fn read_profile<R: std::io::Read>(reader: R) -> Result<ProfileFile, IoError> {
    let value: serde_json::Value =
        serde_json::from_reader(reader).map_err(|e| IoError::Document(e.to_string()))?;
    check_version(&value, PROFILE_FORMAT_VERSION)?;
    let d: ProfileDoc = serde_json::from_value(value).map_err(|e| IoError::Document(e.to_string()))?;
    for (name, v) in [
        ("baseline_ear", d.baseline_ear),
        ("baseline_mar", d.baseline_mar),
        ("ear_threshold", d.ear_threshold),
        ("mar_threshold", d.mar_threshold),
        ("head_drop_limit", d.head_drop_limit),
        ("ear_factor", d.ear_factor),
        ("mar_factor", d.mar_factor),
        ("head_factor", d.head_factor),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(IoError::Document(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(ProfileFile {
        created_at: d.created_at,
        profile: CalibrationProfile {
            kind: d.kind,
            baseline_ear: d.baseline_ear,
            baseline_mar: d.baseline_mar,
            baseline_head_drop: d.baseline_head_drop,
            ear_threshold: d.ear_threshold,
            mar_threshold: d.mar_threshold,
            head_drop_limit: d.head_drop_limit,
            ear_factor: d.ear_factor,
            mar_factor: d.mar_factor,
            head_factor: d.head_factor,
            frames_used: d.frames_used,
            duration: d.duration,
        },
    })
}

// ---- session scripts -------------------------------------------------------

pub fn script_document(script: &SessionScript) -> String {
    let mut s = serde_json::to_string_pretty(script).expect("script serializes");
    s.push('\n');
    s
}

pub fn write_script<W: Write>(sink: &mut W, script: &SessionScript) -> Result<(), IoError> {
    sink.write_all(script_document(script).as_bytes())?;
    Ok(())
}

pub fn read_script<R: std::io::Read>(reader: R) -> Result<SessionScript, IoError> {
    let value: serde_json::Value =
        serde_json::from_reader(reader).map_err(|e| IoError::Document(e.to_string()))?;
    if value.get("format_version").is_some() {
        check_version(&value, crate::synth::SCRIPT_FORMAT_VERSION)?;
    }
    let script: SessionScript =
        serde_json::from_value(value).map_err(|e| IoError::Document(e.to_string()))?;
    script.validate()?;
    Ok(script)
}
