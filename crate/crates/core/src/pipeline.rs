//! Streaming core: per-frame smoothing, eye/mouth/head decisions, per-channel
//! alarm state machines and PERCLOS monitoring.
//!
//! A [`Pipeline`] is a single-writer state machine; `step` calls must be
//! serialized. Independent instances share nothing.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::CalibrationProfile;
use crate::landmarks::{map_for, LandmarkFrame};
use crate::metrics::{MetricError, MetricSample, PerclosWindow};

/// Tolerance on elapsed-time comparisons against sustain and window durations.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("stream order: t={t} does not follow t={prev}")]
    StreamOrder { prev: f64, t: f64 },
    #[error("missing external label for face-present frame at t={t:.3}")]
    MissingLabel { t: f64 },
    #[error("smoothing buffer holds no data")]
    NoData,
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Timestamp key used to align frames with label and external-state streams.
pub fn quantize_ms(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}

macro_rules! binary_state {
    ($name:ident, $neg:ident = $neg_s:literal, $pos:ident = $pos_s:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $neg,
            $pos,
        }

        impl $name {
            pub const fn from_positive(positive: bool) -> Self {
                if positive {
                    Self::$pos
                } else {
                    Self::$neg
                }
            }

            pub const fn is_positive(self) -> bool {
                matches!(self, Self::$pos)
            }

            pub const fn as_str(self) -> &'static str {
                match self {
                    Self::$neg => $neg_s,
                    Self::$pos => $pos_s,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $neg_s => Ok(Self::$neg),
                    $pos_s => Ok(Self::$pos),
                    other => Err(format!(
                        "expected \"{}\" or \"{}\", got \"{}\"",
                        $neg_s, $pos_s, other
                    )),
                }
            }
        }
    };
}

binary_state!(EyeState, Open = "open", Closed = "closed");
binary_state!(MouthState, Normal = "normal", Yawn = "yawn");
binary_state!(HeadState, Up = "up", Down = "down");

/// Trailing mean over the most recent `capacity` values.
#[derive(Debug, Clone)]
pub struct SmoothingBuffer {
    capacity: usize,
    values: VecDeque<f64>,
}

impl SmoothingBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "smoothing buffer capacity must be positive");
        Self {
            capacity,
            values: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, value: f64) {
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied()
    }

    pub fn smoothed(&self) -> Result<f64, PipelineError> {
        smoothed(self)
    }
}

pub fn smoothed(buffer: &SmoothingBuffer) -> Result<f64, PipelineError> {
    if buffer.values.is_empty() {
        return Err(PipelineError::NoData);
    }
    Ok(buffer.values.iter().sum::<f64>() / buffer.values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Eyes,
    Mouth,
    Head,
    Presence,
    Perclos,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::Eyes,
        Channel::Mouth,
        Channel::Head,
        Channel::Presence,
        Channel::Perclos,
    ];

    pub const fn alert_kind(self) -> AlertKind {
        match self {
            Channel::Eyes => AlertKind::EyesClosed,
            Channel::Mouth => AlertKind::Yawning,
            Channel::Head => AlertKind::HeadDown,
            Channel::Presence => AlertKind::DriverMissing,
            Channel::Perclos => AlertKind::PerclosHigh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    EyesClosed,
    Yawning,
    HeadDown,
    DriverMissing,
    PerclosHigh,
}

impl AlertKind {
    pub const ALL: [AlertKind; 5] = [
        AlertKind::EyesClosed,
        AlertKind::Yawning,
        AlertKind::HeadDown,
        AlertKind::DriverMissing,
        AlertKind::PerclosHigh,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            AlertKind::EyesClosed => "eyes_closed",
            AlertKind::Yawning => "yawning",
            AlertKind::HeadDown => "head_down",
            AlertKind::DriverMissing => "driver_missing",
            AlertKind::PerclosHigh => "perclos_high",
        }
    }
}

impl fmt::Display for AlertKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlertKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        AlertKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown alert kind \"{s}\""))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Normal,
    Pending,
    Alerting,
}

/// Debounce state of one alarm channel.
///
/// `Normal -> Pending` when the condition first holds, `Pending -> Alerting`
/// (emitting once) when it has held for the sustain duration, and
/// `Alerting -> Normal` after `rearm` consecutive condition-free updates.
/// A pending episode that ends early drops back to `Normal`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub channel: Channel,
    pub phase: Phase,
    pub condition_since: Option<f64>,
    pub rearm_progress: usize,
}

impl ChannelState {
    pub fn new(channel: Channel) -> Self {
        Self {
            channel,
            phase: Phase::Normal,
            condition_since: None,
            rearm_progress: 0,
        }
    }

    /// Advances one update; returns the episode onset when an alert fires.
    pub fn update(&mut self, condition: bool, t: f64, sustain: f64, rearm: usize) -> Option<f64> {
        match self.phase {
            Phase::Normal if condition => {
                self.phase = Phase::Pending;
                self.condition_since = Some(t);
                self.try_fire(t, sustain)
            }
            Phase::Normal => None,
            Phase::Pending if condition => self.try_fire(t, sustain),
            Phase::Pending => {
                self.phase = Phase::Normal;
                self.condition_since = None;
                None
            }
            Phase::Alerting => {
                if condition {
                    self.rearm_progress = 0;
                } else {
                    self.rearm_progress += 1;
                    if self.rearm_progress >= rearm {
                        self.phase = Phase::Normal;
                        self.condition_since = None;
                        self.rearm_progress = 0;
                    }
                }
                None
            }
        }
    }

    fn try_fire(&mut self, t: f64, sustain: f64) -> Option<f64> {
        let since = self.condition_since?;
        if t - since + TIME_EPS >= sustain {
            self.phase = Phase::Alerting;
            self.rearm_progress = 0;
            Some(since)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SustainDurations {
    pub eyes: f64,
    pub mouth: f64,
    pub head: f64,
    pub presence: f64,
    pub perclos: f64,
}

impl Default for SustainDurations {
    fn default() -> Self {
        Self {
            eyes: 1.0,
            mouth: 1.5,
            head: 2.0,
            presence: 3.0,
            perclos: 0.0,
        }
    }
}

impl SustainDurations {
    pub fn for_channel(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Eyes => self.eyes,
            Channel::Mouth => self.mouth,
            Channel::Head => self.head,
            Channel::Presence => self.presence,
            Channel::Perclos => self.perclos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub buffer_capacity: usize,
    pub sustain: SustainDurations,
    pub rearm_frames: usize,
    /// PERCLOS window length, seconds.
    pub perclos_window: f64,
    /// PERCLOS alarm limit, percent.
    pub perclos_limit: f64,
    /// Majority-vote external states over the smoothing window instead of
    /// using them as-is.
    pub external_vote: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            buffer_capacity: 15,
            sustain: SustainDurations::default(),
            rearm_frames: 15,
            perclos_window: 30.0,
            perclos_limit: 20.0,
            external_vote: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::InvalidConfig(msg));
        if self.buffer_capacity == 0 {
            return bad("buffer capacity must be positive".into());
        }
        if self.rearm_frames == 0 {
            return bad("re-arm frame count must be positive".into());
        }
        for ch in Channel::ALL {
            let s = self.sustain.for_channel(ch);
            if !(s.is_finite() && s >= 0.0) {
                return bad(format!("sustain duration for {ch:?} must be non-negative, got {s}"));
            }
        }
        if !(self.perclos_window.is_finite() && self.perclos_window > 0.0) {
            return bad(format!("PERCLOS window must be positive, got {}", self.perclos_window));
        }
        if !(0.0..=100.0).contains(&self.perclos_limit) {
            return bad(format!("PERCLOS limit must lie in [0, 100], got {}", self.perclos_limit));
        }
        Ok(())
    }
}

/// Per-frame states supplied by an external classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExternalState {
    pub eye: EyeState,
    pub mouth: MouthState,
    pub head: Option<HeadState>,
}

/// External states keyed by millisecond-quantized timestamp.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalStates {
    by_ms: HashMap<i64, ExternalState>,
}

impl ExternalStates {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, t: f64, state: ExternalState) {
        self.by_ms.insert(quantize_ms(t), state);
    }

    pub fn get(&self, t: f64) -> Option<&ExternalState> {
        self.by_ms.get(&quantize_ms(t))
    }

    pub fn len(&self) -> usize {
        self.by_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_ms.is_empty()
    }

    /// The decisions a pipeline made, replayable as an external stream.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a FrameRecord>) -> Self {
        let mut out = Self::new();
        for r in records {
            if let (Some(eye), Some(mouth)) = (r.eye, r.mouth) {
                out.insert(r.t, ExternalState { eye, mouth, head: r.head });
            }
        }
        out
    }
}

impl FromIterator<(f64, ExternalState)> for ExternalStates {
    fn from_iter<I: IntoIterator<Item = (f64, ExternalState)>>(iter: I) -> Self {
        let mut out = Self::new();
        for (t, s) in iter {
            out.insert(t, s);
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub enum ClassifierSource {
    /// Threshold the smoothed metrics against the profile.
    #[default]
    Threshold,
    External(ExternalStates),
}

/// A debounced warning.
#[derive(Debug, Clone, PartialEq)]
pub struct AlertEvent {
    pub kind: AlertKind,
    pub onset_t: f64,
    pub emitted_t: f64,
    /// Smoothed metric (seconds absent for `driver_missing`, percent for `perclos_high`).
    pub value: f64,
    pub threshold: f64,
}

/// Everything the pipeline derived from one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub t: f64,
    pub face_present: bool,
    pub ear: Option<f64>,
    pub mar: Option<f64>,
    pub head_drop: Option<f64>,
    pub ear_smoothed: Option<f64>,
    pub mar_smoothed: Option<f64>,
    pub head_drop_smoothed: Option<f64>,
    pub eye: Option<EyeState>,
    pub mouth: Option<MouthState>,
    pub head: Option<HeadState>,
    pub perclos: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub record: FrameRecord,
    pub events: Vec<AlertEvent>,
}

pub struct Pipeline {
    config: PipelineConfig,
    profile: CalibrationProfile,
    classifier: ClassifierSource,
    ear: SmoothingBuffer,
    mar: SmoothingBuffer,
    head: SmoothingBuffer,
    eye_votes: SmoothingBuffer,
    mouth_votes: SmoothingBuffer,
    head_votes: SmoothingBuffer,
    channels: [ChannelState; 5],
    perclos: PerclosWindow,
    first_t: Option<f64>,
    last_t: Option<f64>,
    frames: usize,
    face_frames: usize,
    alerts: BTreeMap<AlertKind, usize>,
    last_perclos: Option<f64>,
}

impl Pipeline {
    pub fn new(
        profile: CalibrationProfile,
        config: PipelineConfig,
        classifier: ClassifierSource,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        let cap = config.buffer_capacity;
        Ok(Self {
            ear: SmoothingBuffer::new(cap),
            mar: SmoothingBuffer::new(cap),
            head: SmoothingBuffer::new(cap),
            eye_votes: SmoothingBuffer::new(cap),
            mouth_votes: SmoothingBuffer::new(cap),
            head_votes: SmoothingBuffer::new(cap),
            channels: Channel::ALL.map(ChannelState::new),
            perclos: PerclosWindow::new(config.perclos_window),
            first_t: None,
            last_t: None,
            frames: 0,
            face_frames: 0,
            alerts: BTreeMap::new(),
            last_perclos: None,
            config,
            profile,
            classifier,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn profile(&self) -> &CalibrationProfile {
        &self.profile
    }

    pub fn channel(&self, channel: Channel) -> &ChannelState {
        &self.channels[channel as usize]
    }

    /// Samples currently held in the PERCLOS window.
    pub fn perclos_window_len(&self) -> usize {
        self.perclos.len()
    }

    pub fn step(&mut self, frame: &LandmarkFrame) -> Result<StepOutput, PipelineError> {
        let t = frame.t();
        if let Some(prev) = self.last_t {
            if t <= prev {
                return Err(PipelineError::StreamOrder { prev, t });
            }
        }
        let sample = MetricSample::from_frame(frame, map_for(frame.scheme()))?;
        let mut events = Vec::new();

        let mut record = FrameRecord {
            t,
            face_present: sample.face_present,
            ear: sample.ear,
            mar: sample.mar,
            head_drop: sample.head_drop,
            ear_smoothed: None,
            mar_smoothed: None,
            head_drop_smoothed: None,
            eye: None,
            mouth: None,
            head: None,
            perclos: None,
        };

        if let (Some(ear), Some(mar), Some(head)) = (sample.ear, sample.mar, sample.head_drop) {
            let external = match &self.classifier {
                ClassifierSource::Threshold => None,
                ClassifierSource::External(states) => {
                    Some(*states.get(t).ok_or(PipelineError::MissingLabel { t })?)
                }
            };
            self.ear.push(ear);
            self.mar.push(mar);
            self.head.push(head);
            let ear_s = self.ear.smoothed()?;
            let mar_s = self.mar.smoothed()?;
            let head_s = self.head.smoothed()?;

            let by_threshold = (
                ear_s < self.profile.ear_threshold,
                mar_s > self.profile.mar_threshold,
                head_s > self.profile.head_drop_limit,
            );
            let (closed, yawn, down) = match external {
                None => by_threshold,
                Some(ext) => {
                    let head = ext.head.map_or(by_threshold.2, HeadState::is_positive);
                    let raw = (ext.eye.is_positive(), ext.mouth.is_positive(), head);
                    if self.config.external_vote {
                        (
                            vote(&mut self.eye_votes, raw.0),
                            vote(&mut self.mouth_votes, raw.1),
                            vote(&mut self.head_votes, raw.2),
                        )
                    } else {
                        raw
                    }
                }
            };

            record.ear_smoothed = Some(ear_s);
            record.mar_smoothed = Some(mar_s);
            record.head_drop_smoothed = Some(head_s);
            record.eye = Some(EyeState::from_positive(closed));
            record.mouth = Some(MouthState::from_positive(yawn));
            record.head = Some(HeadState::from_positive(down));

            let checks = [
                (Channel::Eyes, closed, ear_s, self.profile.ear_threshold),
                (Channel::Mouth, yawn, mar_s, self.profile.mar_threshold),
                (Channel::Head, down, head_s, self.profile.head_drop_limit),
            ];
            for (channel, condition, value, threshold) in checks {
                self.advance(channel, condition, t, &mut events, |_| (value, threshold));
            }
            self.face_frames += 1;
        }

        let presence_sustain = self.config.sustain.presence;
        self.advance(Channel::Presence, !sample.face_present, t, &mut events, |onset| {
            (t - onset, presence_sustain)
        });

        let closed = record.eye == Some(EyeState::Closed);
        self.perclos.push(t, closed, sample.face_present);
        let first = *self.first_t.get_or_insert(t);
        let perclos = self.perclos.perclos().ok();
        record.perclos = perclos;
        self.last_perclos = perclos;
        let covered = t - first + TIME_EPS >= self.config.perclos_window;
        let limit = self.config.perclos_limit;
        let high = covered && perclos.is_some_and(|p| p > limit);
        self.advance(Channel::Perclos, high, t, &mut events, |_| {
            (perclos.unwrap_or(0.0), limit)
        });

        self.last_t = Some(t);
        self.frames += 1;
        Ok(StepOutput { record, events })
    }

    fn advance(
        &mut self,
        channel: Channel,
        condition: bool,
        t: f64,
        events: &mut Vec<AlertEvent>,
        evidence: impl FnOnce(f64) -> (f64, f64),
    ) {
        let sustain = self.config.sustain.for_channel(channel);
        let rearm = self.config.rearm_frames;
        if let Some(onset) = self.channels[channel as usize].update(condition, t, sustain, rearm) {
            let (value, threshold) = evidence(onset);
            let kind = channel.alert_kind();
            *self.alerts.entry(kind).or_default() += 1;
            events.push(AlertEvent {
                kind,
                onset_t: onset,
                emitted_t: t,
                value,
                threshold,
            });
        }
    }

    pub fn summary(&self, elapsed_secs: f64) -> SessionSummary {
        SessionSummary {
            frames: self.frames,
            face_frames: self.face_frames,
            alerts: AlertKind::ALL
                .into_iter()
                .map(|k| (k, self.alerts.get(&k).copied().unwrap_or(0)))
                .collect(),
            final_perclos: self.last_perclos,
            elapsed_secs,
        }
    }
}

fn vote(buffer: &mut SmoothingBuffer, positive: bool) -> bool {
    buffer.push(if positive { 1.0 } else { 0.0 });
    buffer.smoothed().is_ok_and(|share| share > 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub frames: usize,
    pub face_frames: usize,
    pub alerts: BTreeMap<AlertKind, usize>,
    pub final_perclos: Option<f64>,
    pub elapsed_secs: f64,
}

impl SessionSummary {
    pub fn total_alerts(&self) -> usize {
        self.alerts.values().sum()
    }

    pub fn alerts_of(&self, kind: AlertKind) -> usize {
        self.alerts.get(&kind).copied().unwrap_or(0)
    }

    pub fn throughput(&self) -> f64 {
        if self.elapsed_secs > 0.0 {
            self.frames as f64 / self.elapsed_secs
        } else {
            f64::INFINITY
        }
    }
}

impl fmt::Display for SessionSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "frames={} face_frames={}", self.frames, self.face_frames)?;
        for (k, n) in &self.alerts {
            write!(f, " {k}={n}")?;
        }
        match self.final_perclos {
            Some(p) => write!(f, " perclos={p:.2}%")?,
            None => write!(f, " perclos=n/a")?,
        }
        write!(f, " throughput={:.0} fps", self.throughput())
    }
}

#[derive(Debug, Clone)]
pub struct SessionOutput {
    pub events: Vec<AlertEvent>,
    pub records: Vec<FrameRecord>,
    pub summary: SessionSummary,
}

/// Folds `step` over a whole stream.
pub fn run_session<'a>(
    frames: impl IntoIterator<Item = &'a LandmarkFrame>,
    profile: &CalibrationProfile,
    config: &PipelineConfig,
    classifier: ClassifierSource,
) -> Result<SessionOutput, PipelineError> {
    let start = Instant::now();
    let mut pipeline = Pipeline::new(profile.clone(), config.clone(), classifier)?;
    let mut events = Vec::new();
    let mut records = Vec::new();
    for frame in frames {
        let out = pipeline.step(frame)?;
        events.extend(out.events);
        records.push(out.record);
    }
    let summary = pipeline.summary(start.elapsed().as_secs_f64());
    Ok(SessionOutput {
        events,
        records,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_examples() {
        let mut b = SmoothingBuffer::new(15);
        assert_eq!(b.smoothed(), Err(PipelineError::NoData));
        for _ in 0..15 {
            b.push(0.3);
        }
        assert!((b.smoothed().unwrap() - 0.3).abs() < 1e-15);

        let mut b = SmoothingBuffer::new(15);
        b.push(0.2);
        b.push(0.4);
        assert!((b.smoothed().unwrap() - 0.3).abs() < 1e-15);

        let mut b = SmoothingBuffer::new(15);
        let pushed: Vec<f64> = (0..20).map(|i| i as f64 * 0.01).collect();
        for v in &pushed {
            b.push(*v);
        }
        assert_eq!(b.len(), 15);
        let tail: f64 = pushed[5..].iter().sum::<f64>() / 15.0;
        assert!((b.smoothed().unwrap() - tail).abs() < 1e-15);
    }

    #[test]
    fn channel_fires_once_per_episode() {
        let mut ch = ChannelState::new(Channel::Eyes);
        let mut fired = Vec::new();
        for i in 0..100 {
            let t = i as f64 / 10.0;
            let cond = (10..40).contains(&i) || (45..80).contains(&i);
            if let Some(onset) = ch.update(cond, t, 1.0, 15) {
                fired.push((onset, t));
            }
        }
        // gap 40..45 is shorter than the re-arm count, so the second run is
        // the same episode
        assert_eq!(fired, vec![(1.0, 2.0)]);
    }

    #[test]
    fn channel_rearms_after_quiet_frames() {
        let mut ch = ChannelState::new(Channel::Mouth);
        let mut fired = 0;
        for i in 0..200 {
            let cond = (10..40).contains(&i) || (60..90).contains(&i);
            if ch.update(cond, i as f64 / 10.0, 1.0, 15).is_some() {
                fired += 1;
            }
        }
        assert_eq!(fired, 2);
        assert_eq!(ch.phase, Phase::Normal);
    }

    #[test]
    fn short_condition_never_fires() {
        let mut ch = ChannelState::new(Channel::Eyes);
        for i in 0..30 {
            let cond = i % 10 < 5;
            assert_eq!(ch.update(cond, i as f64 / 10.0, 1.0, 15), None);
        }
    }

    #[test]
    fn zero_sustain_fires_immediately() {
        let mut ch = ChannelState::new(Channel::Perclos);
        assert_eq!(ch.update(true, 3.0, 0.0, 1), Some(3.0));
        assert_eq!(ch.phase, Phase::Alerting);
    }

    #[test]
    fn config_validation() {
        let mut c = PipelineConfig::default();
        c.validate().unwrap();
        c.buffer_capacity = 0;
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            perclos_limit: 120.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn state_strings() {
        assert_eq!("closed".parse::<EyeState>().unwrap(), EyeState::Closed);
        assert!("shut".parse::<EyeState>().is_err());
        assert_eq!(MouthState::Yawn.as_str(), "yawn");
        assert_eq!("perclos_high".parse::<AlertKind>().unwrap(), AlertKind::PerclosHigh);
    }
}
