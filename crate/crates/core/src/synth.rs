//! Ground-truth-labelled synthetic landmark sessions.
//!
//! Faces are built from canonical eye and mouth hexagons whose vertical
//! point pairs are scaled so that the aspect ratios come out at the
//! requested values; horizontal distances never change. Horizontal eye
//! width and mouth width are fixed fractions of the inter-ocular distance.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::FrameLabel;
use crate::landmarks::{LandmarkFrame, Point, Scheme, SemanticPoints};
use crate::pipeline::{EyeState, HeadState, MouthState};

pub const SCRIPT_FORMAT_VERSION: u32 = 1;

const FACE_CENTER: Point = Point::new(320.0, 240.0);
const EYE_WIDTH: f64 = 0.30;
const MOUTH_WIDTH: f64 = 0.45;
const MOUTH_BELOW_NOSE: f64 = 0.35;

/// MAR multiple of baseline reached by a yawn at intensity 1.
pub const YAWN_PEAK: f64 = 2.5;
/// MAR multiple of baseline never exceeded while talking.
pub const TALK_CAP: f64 = 1.3;
/// Head-drop multiple of baseline reached by a nod at intensity 1.
pub const NOD_PEAK: f64 = 1.8;
const TALK_HZ: f64 = 3.0;
/// Events at or above this intensity are labelled as the positive state.
pub const LABEL_INTENSITY: f64 = 0.5;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScriptError {
    #[error("invalid script: {0}")]
    Invalid(String),
    #[error("unsupported script format_version {0}")]
    UnsupportedVersion(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Blink,
    SustainedClosure,
    Yawn,
    Talk,
    HeadNod,
    Dropout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverProfile {
    pub baseline_ear: f64,
    pub baseline_mar: f64,
    pub baseline_head_drop: f64,
    pub inter_ocular_px: f64,
}

impl Default for DriverProfile {
    fn default() -> Self {
        Self {
            baseline_ear: 0.30,
            baseline_mar: 0.40,
            baseline_head_drop: 0.60,
            inter_ocular_px: 100.0,
        }
    }
}

fn full_intensity() -> f64 {
    1.0
}

fn current_version() -> u32 {
    SCRIPT_FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub kind: EventKind,
    pub start_t: f64,
    pub length_s: f64,
    #[serde(default = "full_intensity")]
    pub intensity: f64,
}

impl ScriptEvent {
    pub fn new(kind: EventKind, start_t: f64, length_s: f64) -> Self {
        Self {
            kind,
            start_t,
            length_s,
            intensity: 1.0,
        }
    }

    pub fn with_intensity(mut self, intensity: f64) -> Self {
        self.intensity = intensity;
        self
    }

    fn frames(&self, fps: f64) -> Range<usize> {
        let first = (self.start_t * fps - EPS).ceil().max(0.0) as usize;
        let end = ((self.start_t + self.length_s) * fps - EPS).ceil().max(0.0) as usize;
        first..end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScript {
    #[serde(default = "current_version")]
    pub format_version: u32,
    pub fps: f64,
    pub duration: f64,
    pub driver: DriverProfile,
    #[serde(default)]
    pub events: Vec<ScriptEvent>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SessionScript {
    pub fn new(fps: f64, duration: f64, driver: DriverProfile) -> Self {
        Self {
            format_version: SCRIPT_FORMAT_VERSION,
            fps,
            duration,
            driver,
            events: Vec::new(),
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.fps + EPS).floor() as usize
    }

    /// Millisecond-quantized timestamp of frame `k`.
    pub fn frame_time(&self, k: usize) -> f64 {
        (k as f64 * 1000.0 / self.fps).round() / 1000.0
    }

    pub fn validate(&self) -> Result<(), ScriptError> {
        let bad = |msg: String| Err(ScriptError::Invalid(msg));
        if self.format_version != SCRIPT_FORMAT_VERSION {
            return Err(ScriptError::UnsupportedVersion(self.format_version));
        }
        if !(self.fps.is_finite() && self.fps > 0.0 && self.fps <= 1000.0) {
            return bad(format!("fps must lie in (0, 1000], got {}", self.fps));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        let d = &self.driver;
        for (name, v) in [
            ("baseline_ear", d.baseline_ear),
            ("baseline_mar", d.baseline_mar),
            ("baseline_head_drop", d.baseline_head_drop),
            ("inter_ocular_px", d.inter_ocular_px),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("driver.{name} must be positive, got {v}"));
            }
        }
        for (i, e) in self.events.iter().enumerate() {
            if !(e.start_t.is_finite() && e.length_s.is_finite()) {
                return bad(format!("event {i}: non-finite timing"));
            }
            if e.start_t < 0.0 || e.length_s <= 0.0 || e.start_t + e.length_s > self.duration + EPS {
                return bad(format!(
                    "event {i} ({:?}) must lie within [0, {}]",
                    e.kind, self.duration
                ));
            }
            if !(0.0..=1.0).contains(&e.intensity) {
                return bad(format!("event {i}: intensity {} outside [0, 1]", e.intensity));
            }
        }
        Ok(())
    }
}

/// Metric values a noise-free frame realizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetMetrics {
    pub ear: f64,
    pub mar: f64,
    pub head_drop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub kind: EventKind,
    pub start_t: f64,
    pub end_t: f64,
    pub frames: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub labels: Vec<FrameLabel>,
    pub episodes: Vec<Episode>,
    /// Scripted metrics per frame, `None` during dropouts.
    pub targets: Vec<Option<TargetMetrics>>,
}

/// Semantic points realizing the given metric values exactly.
pub fn synthesize_face(target: &TargetMetrics, inter_ocular: f64) -> SemanticPoints {
    let iod = inter_ocular;
    let c = FACE_CENTER;
    let w = EYE_WIDTH * iod;
    let eye = |x0: f64| -> [Point; 6] {
        // EAR = 2h / w
        let h = target.ear * w / 2.0;
        let a = x0 + w / 3.0;
        let b = x0 + 2.0 * w / 3.0;
        [
            Point::new(x0, c.y),
            Point::new(a, c.y - h),
            Point::new(b, c.y - h),
            Point::new(x0 + w, c.y),
            Point::new(b, c.y + h),
            Point::new(a, c.y + h),
        ]
    };
    let left_eye = eye(c.x - iod / 2.0);
    let right_eye = eye(c.x + iod / 2.0 - w);

    let nose_tip = Point::new(c.x, c.y + target.head_drop * iod);
    let mw = MOUTH_WIDTH * iod;
    let my = nose_tip.y + MOUTH_BELOW_NOSE * iod;
    // MAR = 2v / mw
    let v = target.mar * mw / 2.0;
    let mouth = [
        Point::new(c.x - mw / 2.0, my),
        Point::new(c.x, my - v),
        Point::new(c.x + mw / 4.0, my - v),
        Point::new(c.x + mw / 2.0, my),
        Point::new(c.x + mw / 4.0, my + v),
        Point::new(c.x, my + v),
    ];
    SemanticPoints {
        left_eye,
        right_eye,
        mouth,
        nose_tip,
        left_eye_outer_corner: left_eye[0],
        right_eye_outer_corner: right_eye[3],
    }
}

struct FrameScript {
    target: Option<TargetMetrics>,
    label: (bool, bool, bool),
}

fn frame_script(script: &SessionScript, ranges: &[Range<usize>], k: usize) -> FrameScript {
    let d = &script.driver;
    let (mut eye, mut mouth, mut head) = (1.0f64, 1.0f64, 1.0f64);
    let (mut closed, mut yawn, mut down, mut present) = (false, false, false, true);
    let tk = k as f64 / script.fps;
    for (e, r) in script.events.iter().zip(ranges) {
        if !r.contains(&k) {
            continue;
        }
        let labelled = e.intensity >= LABEL_INTENSITY;
        match e.kind {
            EventKind::Blink | EventKind::SustainedClosure => {
                eye = eye.min(1.0 - e.intensity);
                closed |= labelled;
            }
            EventKind::Yawn => {
                mouth = mouth.max(1.0 + (YAWN_PEAK - 1.0) * e.intensity);
                yawn |= labelled;
            }
            EventKind::Talk => {
                let phase = std::f64::consts::TAU * TALK_HZ * (tk - e.start_t);
                let osc = 0.5 + 0.5 * phase.sin().abs();
                mouth = mouth.max(1.0 + (TALK_CAP - 1.0) * e.intensity * osc);
            }
            EventKind::HeadNod => {
                head = head.max(1.0 + (NOD_PEAK - 1.0) * e.intensity);
                down |= labelled;
            }
            EventKind::Dropout => present = false,
        }
    }
    FrameScript {
        target: present.then_some(TargetMetrics {
            ear: d.baseline_ear * eye,
            mar: d.baseline_mar * mouth,
            head_drop: d.baseline_head_drop * head,
        }),
        label: (closed, yawn, down),
    }
}

/// Renders a script into semantic-scheme frames plus ground truth.
pub fn generate(script: &SessionScript) -> Result<(Vec<LandmarkFrame>, GroundTruth), ScriptError> {
    script.validate()?;
    let n = script.frame_count();
    let ranges: Vec<Range<usize>> = script.events.iter().map(|e| e.frames(script.fps)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let noise = (script.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, script.noise_sigma).expect("validated sigma"));

    let mut frames = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for k in 0..n {
        let t = script.frame_time(k);
        let fs = frame_script(script, &ranges, k);
        let frame = match &fs.target {
            Some(target) => {
                let mut points = synthesize_face(target, script.driver.inter_ocular_px).to_vec();
                if let Some(noise) = &noise {
                    for p in &mut points {
                        p.x += noise.sample(&mut rng);
                        p.y += noise.sample(&mut rng);
                    }
                    // corners are the same anatomical points as the eye endpoints
                    points[19] = points[0];
                    points[20] = points[9];
                }
                LandmarkFrame::new(t, Scheme::Semantic, points)
            }
            None => LandmarkFrame::absent(t, Scheme::Semantic),
        }
        .map_err(|e| ScriptError::Invalid(e.to_string()))?;
        frames.push(frame);
        let (closed, yawn, down) = fs.label;
        labels.push(FrameLabel {
            t,
            eye: EyeState::from_positive(closed),
            mouth: MouthState::from_positive(yawn),
            head: Some(HeadState::from_positive(down)),
            face_present: fs.target.is_some(),
        });
        targets.push(fs.target);
    }

    let episodes = script
        .events
        .iter()
        .zip(ranges)
        .map(|(e, r)| Episode {
            kind: e.kind,
            start_t: e.start_t,
            end_t: e.start_t + e.length_s,
            frames: r.start.min(n)..r.end.min(n),
        })
        .collect();

    Ok((
        frames,
        GroundTruth {
            labels,
            episodes,
            targets,
        },
    ))
}

/// A heterogeneous driver population sharing one event template.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub n: usize,
    pub baseline_ear_range: (f64, f64),
    pub baseline_mar_range: (f64, f64),
    /// Fps, duration, events, noise and the non-drawn driver fields.
    pub template: SessionScript,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticDriver {
    pub script: SessionScript,
    pub frames: Vec<LandmarkFrame>,
    pub truth: GroundTruth,
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// The per-driver scripts of a population, without rendering them.
pub fn population_scripts(spec: &PopulationSpec) -> Result<Vec<SessionScript>, ScriptError> {
    if spec.n == 0 {
        return Err(ScriptError::Invalid("population size must be at least 1".into()));
    }
    for (name, (lo, hi)) in [
        ("baseline_ear_range", spec.baseline_ear_range),
        ("baseline_mar_range", spec.baseline_mar_range),
    ] {
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(ScriptError::Invalid(format!(
                "{name} [{lo}, {hi}] is empty or non-positive"
            )));
        }
    }
    spec.template.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.n)
        .map(|_| {
            let mut script = spec.template.clone();
            script.driver.baseline_ear = draw(&mut rng, spec.baseline_ear_range);
            script.driver.baseline_mar = draw(&mut rng, spec.baseline_mar_range);
            script.seed = rng.random();
            script
        })
        .collect())
}

pub fn generate_population(spec: &PopulationSpec) -> Result<Vec<SyntheticDriver>, ScriptError> {
    population_scripts(spec)?
        .into_iter()
        .map(|script| {
            let (frames, truth) = generate(&script)?;
            Ok(SyntheticDriver {
                script,
                frames,
                truth,
            })
        })
        .collect()
}
