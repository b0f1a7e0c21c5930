//! Streaming driver-drowsiness inference from facial landmark frames.
//!
//! Landmark frames are reduced to eye aspect ratio, mouth aspect ratio and a
//! head-drop ratio, smoothed over a short trailing buffer, compared against
//! per-driver (calibrated) or population thresholds, and debounced into
//! alert events. PERCLOS is tracked over a rolling window. A synthetic
//! session generator and an evaluation harness sit alongside the pipeline.

pub mod calibration;
pub mod cli;
pub mod eval;
pub mod io;
pub mod landmarks;
pub mod metrics;
pub mod pipeline;
pub mod synth;

pub use calibration::{calibrate, generalized_profile, CalibrationConfig, CalibrationProfile};
pub use eval::{accuracy, compare, confusion, ConfusionMatrix, FrameLabel};
pub use landmarks::{LandmarkFrame, Point, Scheme, SemanticPoints};
pub use metrics::MetricSample;
pub use pipeline::{
    run_session, AlertEvent, AlertKind, ClassifierSource, Pipeline, PipelineConfig,
};
pub use synth::{generate, SessionScript};
