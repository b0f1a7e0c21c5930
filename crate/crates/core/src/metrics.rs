//! Geometric fatigue metrics: eye and mouth aspect ratios, head drop and PERCLOS.

use std::collections::VecDeque;

use thiserror::Error;

use crate::landmarks::{to_semantic, LandmarkError, LandmarkFrame, Point, SchemeMap, SemanticPoints};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("PERCLOS undefined: no monitored samples in window")]
    UndefinedPerclos,
    #[error(transparent)]
    Landmark(#[from] LandmarkError),
}

/// Ratio of the two vertical distances to twice the horizontal one, over a
/// hexagon ordered `[h0, a0, a1, h1, b1, b0]` with vertical pairs
/// `(a0, b0)` and `(a1, b1)`.
fn aspect_ratio(hex: &[Point; 6], what: &'static str) -> Result<f64, MetricError> {
    let horizontal = hex[0].distance(&hex[3]);
    if horizontal == 0.0 {
        return Err(MetricError::DegenerateGeometry(what));
    }
    let vertical = hex[1].distance(&hex[5]) + hex[2].distance(&hex[4]);
    Ok(vertical / (2.0 * horizontal))
}

/// Eye aspect ratio of one eye, points `p1..p6`.
pub fn compute_ear(eye: &[Point; 6]) -> Result<f64, MetricError> {
    aspect_ratio(eye, "eye corners coincide")
}

/// Mean of the left and right eye aspect ratios.
pub fn compute_binocular_ear(sp: &SemanticPoints) -> Result<f64, MetricError> {
    let left = compute_ear(&sp.left_eye)?;
    let right = compute_ear(&sp.right_eye)?;
    Ok((left + right) / 2.0)
}

/// Mouth aspect ratio over inner-lip points `p61, p63, p64, p65, p66, p67`.
pub fn compute_mar(mouth: &[Point; 6]) -> Result<f64, MetricError> {
    aspect_ratio(mouth, "mouth corners coincide")
}

/// Vertical distance from the eye line down to the nose tip, in units of
/// the outer-corner inter-ocular distance.
pub fn compute_head_drop(sp: &SemanticPoints) -> Result<f64, MetricError> {
    let iod = sp.inter_ocular_distance();
    if iod == 0.0 {
        return Err(MetricError::DegenerateGeometry("eye corners coincide"));
    }
    let eye_line = sp.left_eye_outer_corner.midpoint(&sp.right_eye_outer_corner);
    Ok((sp.nose_tip.y - eye_line.y) / iod)
}

/// Raw per-frame metrics. The ratios are `None` exactly when no face was seen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub t: f64,
    pub ear: Option<f64>,
    pub mar: Option<f64>,
    pub head_drop: Option<f64>,
    pub face_present: bool,
}

impl MetricSample {
    pub fn absent(t: f64) -> Self {
        Self {
            t,
            ear: None,
            mar: None,
            head_drop: None,
            face_present: false,
        }
    }

    pub fn from_semantic(t: f64, sp: &SemanticPoints) -> Result<Self, MetricError> {
        Ok(Self {
            t,
            ear: Some(compute_binocular_ear(sp)?),
            mar: Some(compute_mar(&sp.mouth)?),
            head_drop: Some(compute_head_drop(sp)?),
            face_present: true,
        })
    }

    pub fn from_frame(frame: &LandmarkFrame, map: &SchemeMap) -> Result<Self, MetricError> {
        match to_semantic(frame, map)? {
            Some(sp) => Self::from_semantic(frame.t(), &sp),
            None => Ok(Self::absent(frame.t())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerclosSample {
    pub t: f64,
    pub closed: bool,
    pub monitored: bool,
}

/// Trailing window of eye-state samples.
///
/// Each sample is attributed the time until the next sample; the newest
/// sample inherits the interval before it, so evenly spaced samples weigh
/// the same. A lone sample gets unit weight.
#[derive(Debug, Clone)]
pub struct PerclosWindow {
    duration: f64,
    samples: VecDeque<PerclosSample>,
}

impl PerclosWindow {
    pub fn new(duration: f64) -> Self {
        Self {
            duration,
            samples: VecDeque::new(),
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &PerclosSample> {
        self.samples.iter()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends a sample and evicts everything older than `t - duration`.
    /// Samples must arrive in strictly increasing time; unmonitored samples
    /// are never closed.
    pub fn push(&mut self, t: f64, closed: bool, monitored: bool) {
        debug_assert!(self.samples.back().is_none_or(|s| s.t < t));
        self.samples.push_back(PerclosSample {
            t,
            closed: closed && monitored,
            monitored,
        });
        let horizon = t - self.duration;
        while self.samples.front().is_some_and(|s| s.t < horizon) {
            self.samples.pop_front();
        }
    }

    /// `(closed_time, monitored_time)` over the window.
    pub fn totals(&self) -> (f64, f64) {
        let n = self.samples.len();
        let mut closed = 0.0;
        let mut monitored = 0.0;
        let mut last_gap = 1.0;
        for (i, s) in self.samples.iter().enumerate() {
            let weight = if i + 1 < n {
                last_gap = self.samples[i + 1].t - s.t;
                last_gap
            } else {
                last_gap
            };
            if s.monitored {
                monitored += weight;
                if s.closed {
                    closed += weight;
                }
            }
        }
        (closed, monitored)
    }

    /// Percentage of monitored time with eyes closed.
    pub fn perclos(&self) -> Result<f64, MetricError> {
        perclos(self)
    }
}

pub fn perclos(window: &PerclosWindow) -> Result<f64, MetricError> {
    let (closed, monitored) = window.totals();
    if monitored <= 0.0 {
        return Err(MetricError::UndefinedPerclos);
    }
    Ok((closed / monitored * 100.0).clamp(0.0, 100.0))
}
