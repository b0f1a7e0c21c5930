//! Frame-level accuracy, confusion matrices, and the generalized vs
//! personalized vs external comparison harness.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::calibration::CalibrationProfile;
use crate::landmarks::LandmarkFrame;
use crate::pipeline::{
    quantize_ms, run_session, ClassifierSource, EyeState, ExternalStates, FrameRecord, HeadState,
    MouthState, PipelineConfig, PipelineError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("accuracy undefined for an empty confusion matrix")]
    UndefinedAccuracy,
    #[error("prediction stream has {predictions} frames but label stream has {labels}")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("frame {index}: prediction t={prediction_t:.3} is not aligned with label t={label_t:.3}")]
    Misaligned {
        index: usize,
        prediction_t: f64,
        label_t: f64,
    },
    #[error("unknown channel \"{0}\" (expected eye or mouth)")]
    UnknownChannel(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Ground-truth states for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameLabel {
    pub t: f64,
    pub eye: EyeState,
    pub mouth: MouthState,
    pub head: Option<HeadState>,
    pub face_present: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalChannel {
    Eye,
    Mouth,
}

impl EvalChannel {
    pub const fn as_str(self) -> &'static str {
        match self {
            EvalChannel::Eye => "eye",
            EvalChannel::Mouth => "mouth",
        }
    }

    /// Names of the (positive, negative) classes.
    pub const fn classes(self) -> (&'static str, &'static str) {
        match self {
            EvalChannel::Eye => ("closed", "open"),
            EvalChannel::Mouth => ("yawn", "no_yawn"),
        }
    }
}

impl FromStr for EvalChannel {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s {
            "eye" => Ok(EvalChannel::Eye),
            "mouth" => Ok(EvalChannel::Mouth),
            other => Err(EvalError::UnknownChannel(other.to_string())),
        }
    }
}

/// Counts with "closed" (eye) or "yawn" (mouth) as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn accuracy(&self) -> Result<f64, EvalError> {
        accuracy(self)
    }

    /// Percentage of actual positives predicted positive.
    pub fn positive_recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Percentage of actual negatives predicted negative.
    pub fn negative_recall(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }
}

impl std::ops::AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.tn += rhs.tn;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64 * 100.0)
}

pub fn accuracy(m: &ConfusionMatrix) -> Result<f64, EvalError> {
    ratio(m.tp + m.tn, m.total()).ok_or(EvalError::UndefinedAccuracy)
}

/// Per-frame states as predicted by a pipeline run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub t: f64,
    pub eye: Option<EyeState>,
    pub mouth: Option<MouthState>,
}

impl From<&FrameRecord> for Prediction {
    fn from(r: &FrameRecord) -> Self {
        Self {
            t: r.t,
            eye: r.eye,
            mouth: r.mouth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelEvaluation {
    pub matrix: ConfusionMatrix,
    /// Frames whose label says no face was visible.
    pub excluded_no_face: u64,
    /// Face-labelled frames for which the pipeline produced no state.
    pub excluded_unpredicted: u64,
}

impl ChannelEvaluation {
    pub fn accuracy(&self) -> Result<f64, EvalError> {
        self.matrix.accuracy()
    }
}

/// Counts agreements between aligned prediction and label streams.
pub fn confusion(
    predictions: &[Prediction],
    labels: &[FrameLabel],
    channel: EvalChannel,
) -> Result<ChannelEvaluation, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut out = ChannelEvaluation {
        matrix: ConfusionMatrix::default(),
        excluded_no_face: 0,
        excluded_unpredicted: 0,
    };
    for (index, (p, l)) in predictions.iter().zip(labels).enumerate() {
        if quantize_ms(p.t) != quantize_ms(l.t) {
            return Err(EvalError::Misaligned {
                index,
                prediction_t: p.t,
                label_t: l.t,
            });
        }
        if !l.face_present {
            out.excluded_no_face += 1;
            continue;
        }
        let (predicted, actual) = match channel {
            EvalChannel::Eye => (p.eye.map(EyeState::is_positive), l.eye.is_positive()),
            EvalChannel::Mouth => (p.mouth.map(MouthState::is_positive), l.mouth.is_positive()),
        };
        match predicted {
            Some(predicted) => out.matrix.record(predicted, actual),
            None => out.excluded_unpredicted += 1,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Generalized,
    Personalized,
    External,
}

impl Method {
    fn row_name(self, channel: EvalChannel) -> &'static str {
        match (self, channel) {
            (Method::Generalized, EvalChannel::Eye) => "Generalized EAR",
            (Method::Personalized, EvalChannel::Eye) => "Personalized EAR",
            (Method::External, EvalChannel::Eye) => "External (Eye)",
            (Method::Generalized, EvalChannel::Mouth) => "Generalized MAR",
            (Method::Personalized, EvalChannel::Mouth) => "Personalized MAR",
            (Method::External, EvalChannel::Mouth) => "External (Mouth)",
        }
    }

    fn approach(self) -> &'static str {
        match self {
            Method::Generalized | Method::Personalized => "Threshold-based",
            Method::External => "Learning-based",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelResult {
    pub accuracy: Option<f64>,
    pub positive_recall: Option<f64>,
    pub negative_recall: Option<f64>,
    #[serde(flatten)]
    pub evaluation: ChannelEvaluation,
}

impl From<ChannelEvaluation> for ChannelResult {
    fn from(evaluation: ChannelEvaluation) -> Self {
        Self {
            accuracy: evaluation.accuracy().ok(),
            positive_recall: evaluation.matrix.positive_recall(),
            negative_recall: evaluation.matrix.negative_recall(),
            evaluation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub method: Method,
    pub eye: ChannelResult,
    pub mouth: ChannelResult,
}

impl MethodResult {
    pub fn channel(&self, channel: EvalChannel) -> &ChannelResult {
        match channel {
            EvalChannel::Eye => &self.eye,
            EvalChannel::Mouth => &self.mouth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub frames: usize,
    pub methods: Vec<MethodResult>,
}

impl ComparisonReport {
    pub fn method(&self, method: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Evaluates one pipeline run's records against labels on both channels.
pub fn evaluate_records(
    records: &[FrameRecord],
    labels: &[FrameLabel],
) -> Result<(ChannelEvaluation, ChannelEvaluation), EvalError> {
    let preds: Vec<Prediction> = records.iter().map(Prediction::from).collect();
    Ok((
        confusion(&preds, labels, EvalChannel::Eye)?,
        confusion(&preds, labels, EvalChannel::Mouth)?,
    ))
}

/// Runs the pipeline once per method over identical frames and config,
/// then scores each run's per-frame states against `labels`.
pub fn compare(
    frames: &[LandmarkFrame],
    labels: &[FrameLabel],
    personalized: &CalibrationProfile,
    generalized: &CalibrationProfile,
    external: Option<&ExternalStates>,
    config: &PipelineConfig,
) -> Result<ComparisonReport, EvalError> {
    let mut jobs: Vec<(Method, &CalibrationProfile, ClassifierSource)> = vec![
        (Method::Generalized, generalized, ClassifierSource::Threshold),
        (Method::Personalized, personalized, ClassifierSource::Threshold),
    ];
    if let Some(states) = external {
        // profile only supplies the evidence thresholds in external mode
        jobs.push((
            Method::External,
            personalized,
            ClassifierSource::External(states.clone()),
        ));
    }

    let results: Vec<Result<MethodResult, EvalError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|(method, profile, source)| {
                scope.spawn(move || {
                    let out = run_session(frames, profile, config, source)?;
                    let (eye, mouth) = evaluate_records(&out.records, labels)?;
                    Ok(MethodResult {
                        method,
                        eye: eye.into(),
                        mouth: mouth.into(),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("comparison worker panicked"))
            .collect()
    });
    Ok(ComparisonReport {
        frames: frames.len(),
        methods: results.into_iter().collect::<Result<_, _>>()?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationChannel {
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    pub pooled: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationMethod {
    pub method: Method,
    pub eye: PopulationChannel,
    pub mouth: PopulationChannel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationReport {
    pub drivers: usize,
    pub methods: Vec<PopulationMethod>,
}

impl PopulationReport {
    pub fn method(&self, method: Method) -> Option<&PopulationMethod> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Mean per-driver accuracy and pooled matrices, per method and channel.
/// Methods missing from any driver's report are dropped.
pub fn aggregate(reports: &[ComparisonReport]) -> Result<PopulationReport, EvalError> {
    let Some(first) = reports.first() else {
        return Err(EvalError::UndefinedAccuracy);
    };
    let mut methods = Vec::new();
    for m in first.methods.iter().map(|m| m.method) {
        let rows: Option<Vec<&MethodResult>> = reports.iter().map(|r| r.method(m)).collect();
        let Some(rows) = rows else { continue };
        let channel = |ch: EvalChannel| -> Result<PopulationChannel, EvalError> {
            let mut pooled = ConfusionMatrix::default();
            let mut sum = 0.0;
            let mut min = f64::INFINITY;
            for row in &rows {
                let r = row.channel(ch);
                pooled += r.evaluation.matrix;
                let acc = r.accuracy.ok_or(EvalError::UndefinedAccuracy)?;
                sum += acc;
                min = min.min(acc);
            }
            Ok(PopulationChannel {
                mean_accuracy: sum / rows.len() as f64,
                min_accuracy: min,
                pooled,
            })
        };
        methods.push(PopulationMethod {
            method: m,
            eye: channel(EvalChannel::Eye)?,
            mouth: channel(EvalChannel::Mouth)?,
        });
    }
    Ok(PopulationReport {
        drivers: reports.len(),
        methods,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

fn table_header(out: &mut String, title: &str) {
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{:<20} {:<16} {:>12}", "Method", "Approach", "Accuracy (%)");
    let _ = writeln!(out, "{}", "-".repeat(50));
}

fn channel_title(ch: EvalChannel) -> &'static str {
    match ch {
        EvalChannel::Eye => "Eye state detection",
        EvalChannel::Mouth => "Yawning detection",
    }
}

fn matrix_line(out: &mut String, name: &str, ch: EvalChannel, m: &ConfusionMatrix) {
    let (pos, neg) = ch.classes();
    let _ = writeln!(
        out,
        "{:<20} {pos} {:>6}  {neg} {:>6}   tp={} tn={} fp={} fn={}",
        name,
        pct(m.positive_recall()),
        pct(m.negative_recall()),
        m.tp,
        m.tn,
        m.fp,
        m.fn_
    );
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for ch in [EvalChannel::Eye, EvalChannel::Mouth] {
            table_header(&mut out, channel_title(ch));
            for m in &self.methods {
                let _ = writeln!(
                    out,
                    "{:<20} {:<16} {:>12}",
                    m.method.row_name(ch),
                    m.method.approach(),
                    pct(m.channel(ch).accuracy)
                );
            }
            out.push('\n');
        }
        let _ = writeln!(out, "Confusion matrices (per-class accuracy, %)");
        for ch in [EvalChannel::Eye, EvalChannel::Mouth] {
            for m in &self.methods {
                matrix_line(&mut out, m.method.row_name(ch), ch, &m.channel(ch).evaluation.matrix);
            }
        }
        if let Some(m) = self.methods.first() {
            let e = &m.eye.evaluation;
            let _ = writeln!(
                out,
                "\nframes={} excluded_no_face={} excluded_unpredicted={}",
                self.frames, e.excluded_no_face, e.excluded_unpredicted
            );
        }
        f.write_str(&out)
    }
}

impl fmt::Display for PopulationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(out, "Population of {} drivers (mean per-driver accuracy)\n", self.drivers);
        for ch in [EvalChannel::Eye, EvalChannel::Mouth] {
            table_header(&mut out, channel_title(ch));
            for m in &self.methods {
                let c = match ch {
                    EvalChannel::Eye => &m.eye,
                    EvalChannel::Mouth => &m.mouth,
                };
                let _ = writeln!(
                    out,
                    "{:<20} {:<16} {:>12}",
                    m.method.row_name(ch),
                    m.method.approach(),
                    pct(Some(c.mean_accuracy))
                );
            }
            out.push('\n');
        }
        let _ = writeln!(out, "Pooled confusion matrices (per-class accuracy, %)");
        for ch in [EvalChannel::Eye, EvalChannel::Mouth] {
            for m in &self.methods {
                let c = match ch {
                    EvalChannel::Eye => &m.eye,
                    EvalChannel::Mouth => &m.mouth,
                };
                matrix_line(&mut out, m.method.row_name(ch), ch, &c.pooled);
            }
        }
        f.write_str(&out)
    }
}

/// Report for a single prediction stream on one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelReport {
    pub channel: EvalChannel,
    #[serde(flatten)]
    pub result: ChannelResult,
}

impl fmt::Display for ChannelReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (pos, neg) = self.channel.classes();
        let m = &self.result.evaluation.matrix;
        writeln!(f, "channel: {}", self.channel.as_str())?;
        writeln!(f, "accuracy: {}%", pct(self.result.accuracy))?;
        writeln!(f, "{:>18} {:>10} {:>10}", "", format!("pred {pos}"), format!("pred {neg}"))?;
        writeln!(f, "{:>18} {:>10} {:>10}", format!("actual {pos}"), m.tp, m.fn_)?;
        writeln!(f, "{:>18} {:>10} {:>10}", format!("actual {neg}"), m.fp, m.tn)?;
        writeln!(
            f,
            "{pos}: {}%  {neg}: {}%",
            pct(self.result.positive_recall),
            pct(self.result.negative_recall)
        )?;
        writeln!(
            f,
            "excluded_no_face={} excluded_unpredicted={}",
            self.result.evaluation.excluded_no_face, self.result.evaluation.excluded_unpredicted
        )
    }
}
