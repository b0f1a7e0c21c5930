//! Per-driver calibration from a neutral-pose recording, and the fixed
//! population profile it is compared against.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricSample;

/// Slack on the duration check, so that 150 frames at 30 fps cover 5 s.
const DURATION_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("insufficient calibration duration: {covered:.3} s covered, {required:.3} s required")]
    InsufficientDuration { covered: f64, required: f64 },
    #[error("insufficient calibration samples: {found} face-present samples, {required} required")]
    InsufficientSamples { found: usize, required: usize },
    #[error("no face-present samples in calibration input")]
    NoFace,
    #[error("invalid calibration config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Personalized,
    Generalized,
}

/// Baselines and the thresholds derived from them.
///
/// `ear_threshold = ear_factor * baseline_ear`, and likewise for the mouth
/// and head. A generalized profile stores its fixed thresholds as baselines
/// with unit factors.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationProfile {
    pub kind: ProfileKind,
    pub baseline_ear: f64,
    pub baseline_mar: f64,
    pub baseline_head_drop: f64,
    pub ear_threshold: f64,
    pub mar_threshold: f64,
    pub head_drop_limit: f64,
    pub ear_factor: f64,
    pub mar_factor: f64,
    pub head_factor: f64,
    pub frames_used: usize,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub ear_factor: f64,
    pub mar_factor: f64,
    pub head_factor: f64,
    /// Length of the neutral recording, seconds.
    pub duration: f64,
    pub min_samples: usize,
    /// Fraction discarded from each tail before averaging.
    pub trim: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            ear_factor: 0.75,
            mar_factor: 1.40,
            head_factor: 1.25,
            duration: 5.0,
            min_samples: 30,
            trim: 0.10,
        }
    }
}

impl CalibrationConfig {
    fn validate(&self) -> Result<(), CalibrationError> {
        let positive = [
            ("ear_factor", self.ear_factor),
            ("mar_factor", self.mar_factor),
            ("head_factor", self.head_factor),
            ("duration", self.duration),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CalibrationError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(0.0..0.5).contains(&self.trim) {
            return Err(CalibrationError::InvalidConfig(format!(
                "trim must lie in [0, 0.5), got {}",
                self.trim
            )));
        }
        if self.min_samples == 0 {
            return Err(CalibrationError::InvalidConfig(
                "min_samples must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Mean after discarding `floor(trim * n)` values from each end.
///
/// Computed as the smallest kept value plus the mean offset from it, so a
/// constant input returns that constant bit for bit.
pub fn trimmed_mean(values: &mut [f64], trim: f64) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let cut = (values.len() as f64 * trim).floor() as usize;
    let kept = &values[cut..values.len() - cut];
    let anchor = kept[0];
    let offset: f64 = kept.iter().map(|v| v - anchor).sum();
    anchor + offset / kept.len() as f64
}

/// Derives a personalized profile from the first `config.duration` seconds
/// of `samples`.
pub fn calibrate(
    samples: &[MetricSample],
    config: &CalibrationConfig,
) -> Result<CalibrationProfile, CalibrationError> {
    config.validate()?;
    let Some(first) = samples.iter().map(|s| s.t).reduce(f64::min) else {
        return Err(CalibrationError::NoFace);
    };
    let end = first + config.duration - DURATION_SLACK;
    let in_window: Vec<&MetricSample> = samples.iter().filter(|s| s.t < end).collect();

    let mut ears = Vec::with_capacity(in_window.len());
    let mut mars = Vec::with_capacity(in_window.len());
    let mut heads = Vec::with_capacity(in_window.len());
    for s in &in_window {
        if let (true, Some(e), Some(m), Some(h)) = (s.face_present, s.ear, s.mar, s.head_drop) {
            ears.push(e);
            mars.push(m);
            heads.push(h);
        }
    }
    if ears.is_empty() {
        return Err(CalibrationError::NoFace);
    }

    let covered = coverage(in_window.iter().map(|s| s.t));
    if covered + DURATION_SLACK < config.duration {
        return Err(CalibrationError::InsufficientDuration {
            covered,
            required: config.duration,
        });
    }
    if ears.len() < config.min_samples {
        return Err(CalibrationError::InsufficientSamples {
            found: ears.len(),
            required: config.min_samples,
        });
    }

    let baseline_ear = trimmed_mean(&mut ears, config.trim);
    let baseline_mar = trimmed_mean(&mut mars, config.trim);
    let baseline_head_drop = trimmed_mean(&mut heads, config.trim);
    Ok(CalibrationProfile {
        kind: ProfileKind::Personalized,
        baseline_ear,
        baseline_mar,
        baseline_head_drop,
        ear_threshold: config.ear_factor * baseline_ear,
        mar_threshold: config.mar_factor * baseline_mar,
        head_drop_limit: config.head_factor * baseline_head_drop,
        ear_factor: config.ear_factor,
        mar_factor: config.mar_factor,
        head_factor: config.head_factor,
        frames_used: ears.len(),
        duration: config.duration,
    })
}

/// Time spanned by the timestamps, counting one mean frame interval for
/// the final frame.
fn coverage(ts: impl Iterator<Item = f64>) -> f64 {
    let (mut lo, mut hi, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
    for t in ts {
        lo = lo.min(t);
        hi = hi.max(t);
        n += 1;
    }
    if n < 2 {
        return 0.0;
    }
    let span = hi - lo;
    span + span / (n - 1) as f64
}

/// Population-wide thresholds applied to every driver.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedConfig {
    pub ear_threshold: f64,
    pub mar_threshold: f64,
    pub head_drop_limit: f64,
}

impl Default for GeneralizedConfig {
    fn default() -> Self {
        Self {
            ear_threshold: 0.21,
            mar_threshold: 0.60,
            head_drop_limit: 0.80,
        }
    }
}

pub fn generalized_profile(config: &GeneralizedConfig) -> CalibrationProfile {
    CalibrationProfile {
        kind: ProfileKind::Generalized,
        baseline_ear: config.ear_threshold,
        baseline_mar: config.mar_threshold,
        baseline_head_drop: config.head_drop_limit,
        ear_threshold: config.ear_threshold,
        mar_threshold: config.mar_threshold,
        head_drop_limit: config.head_drop_limit,
        ear_factor: 1.0,
        mar_factor: 1.0,
        head_factor: 1.0,
        frames_used: 0,
        duration: 0.0,
    }
}
