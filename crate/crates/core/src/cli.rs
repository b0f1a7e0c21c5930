//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input or format error (including usage
//! errors), 2 domain failure such as a failed calibration. Alerts never
//! change the exit code. Every file argument accepts `-` for standard
//! input or output; file outputs are written to a temporary sibling and
//! renamed into place only on success.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tempfile::NamedTempFile;

use crate::calibration::{
    calibrate, generalized_profile, CalibrationConfig, CalibrationError, CalibrationProfile,
    GeneralizedConfig,
};
use crate::eval::{self, ChannelReport, EvalChannel, FrameLabel, Prediction};
use crate::io::{self as fmtio, IoError, ProfileFile};
use crate::landmarks::{map_for, LandmarkFrame};
use crate::metrics::MetricSample;
use crate::pipeline::{
    ClassifierSource, ExternalStates, Pipeline, PipelineConfig, PipelineError, SustainDurations,
};
use crate::synth::{self, PopulationSpec, ScriptError};

#[derive(Debug)]
enum CliError {
    Input(String),
    Domain(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Domain(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Domain(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::InvalidConfig(_) => CliError::Input(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<ScriptError> for CliError {
    fn from(e: ScriptError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<eval::EvalError> for CliError {
    fn from(e: eval::EvalError) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "drowsewatch", version, about = "Driver drowsiness monitoring from facial landmark streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Derive a personalized profile from a neutral-pose recording.
    Calibrate(CalibrateArgs),
    /// Stream frames through the pipeline and emit alert events.
    Run(RunArgs),
    /// Render a session script (or a driver population) into frames and labels.
    Synth(SynthArgs),
    /// Score per-frame records against labels on one channel.
    Eval(EvalArgs),
    /// Compare generalized, personalized and external decisions against labels.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Clone)]
struct CalibrationFlags {
    /// Calibration recording length, seconds.
    #[arg(long, default_value_t = 5.0)]
    duration: f64,
    #[arg(long, default_value_t = 0.75)]
    ear_factor: f64,
    #[arg(long, default_value_t = 1.40)]
    mar_factor: f64,
    #[arg(long, default_value_t = 1.25)]
    head_factor: f64,
    /// Minimum face-present frames in the calibration window.
    #[arg(long, default_value_t = 30)]
    min_samples: usize,
}

impl CalibrationFlags {
    fn config(&self) -> CalibrationConfig {
        CalibrationConfig {
            ear_factor: self.ear_factor,
            mar_factor: self.mar_factor,
            head_factor: self.head_factor,
            duration: self.duration,
            min_samples: self.min_samples,
            ..CalibrationConfig::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
struct PipelineFlags {
    /// Smoothing buffer length, frames.
    #[arg(long, default_value_t = 15)]
    buffer: usize,
    #[arg(long, default_value_t = 1.0)]
    eyes_sustain: f64,
    #[arg(long, default_value_t = 1.5)]
    mouth_sustain: f64,
    #[arg(long, default_value_t = 2.0)]
    head_sustain: f64,
    #[arg(long, default_value_t = 3.0)]
    presence_sustain: f64,
    #[arg(long, default_value_t = 0.0)]
    perclos_sustain: f64,
    /// Condition-free frames before a channel may alert again.
    #[arg(long, default_value_t = 15)]
    rearm_frames: usize,
    /// PERCLOS window, seconds.
    #[arg(long, default_value_t = 30.0)]
    perclos_window: f64,
    /// PERCLOS alarm limit, percent.
    #[arg(long, default_value_t = 20.0)]
    perclos_limit: f64,
    /// Majority-vote external states over the smoothing buffer.
    #[arg(long)]
    external_vote: bool,
}

impl PipelineFlags {
    fn config(&self) -> CliResult<PipelineConfig> {
        let c = PipelineConfig {
            buffer_capacity: self.buffer,
            sustain: SustainDurations {
                eyes: self.eyes_sustain,
                mouth: self.mouth_sustain,
                head: self.head_sustain,
                presence: self.presence_sustain,
                perclos: self.perclos_sustain,
            },
            rearm_frames: self.rearm_frames,
            perclos_window: self.perclos_window,
            perclos_limit: self.perclos_limit,
            external_vote: self.external_vote,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Debug, Clone)]
struct GeneralizedFlags {
    #[arg(long, default_value_t = 0.21)]
    generalized_ear: f64,
    #[arg(long, default_value_t = 0.60)]
    generalized_mar: f64,
    #[arg(long, default_value_t = 0.80)]
    generalized_head: f64,
}

impl GeneralizedFlags {
    fn profile(&self) -> CliResult<CalibrationProfile> {
        for (name, v) in [
            ("--generalized-ear", self.generalized_ear),
            ("--generalized-mar", self.generalized_mar),
            ("--generalized-head", self.generalized_head),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Input(format!("{name} must be positive")));
            }
        }
        Ok(generalized_profile(&GeneralizedConfig {
            ear_threshold: self.generalized_ear,
            mar_threshold: self.generalized_mar,
            head_drop_limit: self.generalized_head,
        }))
    }
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Landmark frames (JSON lines).
    #[arg(long)]
    input: PathBuf,
    /// Profile output path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    calibration: CalibrationFlags,
    /// Value of the profile's created_at field, Unix seconds. Defaults to
    /// $SOURCE_DATE_EPOCH, else 0.
    #[arg(long)]
    created_at: Option<u64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    /// External classifier states; switches decisions to external mode.
    #[arg(long)]
    external: Option<PathBuf>,
    /// Ring the terminal bell on every alert.
    #[arg(long)]
    bell: bool,
    /// Event log destination.
    #[arg(long, default_value = "-")]
    out: PathBuf,
    /// Per-frame record log destination.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Write the per-frame decisions in external-state format.
    #[arg(long)]
    states_out: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Session script (JSON). Acts as the template with --population.
    #[arg(long)]
    script: PathBuf,
    /// Frame output (single session).
    #[arg(long, required_unless_present = "population")]
    out: Option<PathBuf>,
    /// Ground-truth label output (single session).
    #[arg(long, required_unless_present = "population")]
    labels: Option<PathBuf>,
    /// Overrides the script's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Generate this many drivers into --out-dir instead of one session.
    #[arg(long, requires = "out_dir")]
    population: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Baseline EAR range as LO,HI.
    #[arg(long, default_value = "0.18,0.38", value_parser = parse_range)]
    ear_range: (f64, f64),
    /// Baseline MAR range as LO,HI.
    #[arg(long, default_value = "0.30,0.50", value_parser = parse_range)]
    mar_range: (f64, f64),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
    Both,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ChannelArg {
    Eye,
    Mouth,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Per-frame records from `run --records`.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum)]
    channel: ChannelArg,
    #[arg(long, value_enum, default_value_t = ReportFormat::Both)]
    format: ReportFormat,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long, required_unless_present = "population")]
    input: Option<PathBuf>,
    #[arg(long, required_unless_present = "population")]
    labels: Option<PathBuf>,
    /// Personalized profile; calibrated from the input when omitted.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    external: Option<PathBuf>,
    /// Directory of driver subdirectories holding frames.jsonl and
    /// labels.jsonl (plus optional profile.json and external.jsonl).
    #[arg(long, conflicts_with_all = ["input", "labels", "profile", "external"])]
    population: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Both)]
    format: ReportFormat,
    #[command(flatten)]
    generalized: GeneralizedFlags,
    #[command(flatten)]
    calibration: CalibrationFlags,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got \"{s}\""))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

/// Parses `args` and runs the selected subcommand; returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Run(a) => cmd_run(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("drowsewatch: {}", e.message());
            e.code()
        }
    }
}

// ---- plumbing ----------------------------------------------------------------

fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn open_input(path: &Path) -> CliResult<Box<dyn BufRead>> {
    if is_stdio(path) {
        Ok(Box::new(BufReader::new(io::stdin().lock())))
    } else {
        let f = File::open(path)
            .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
        Ok(Box::new(BufReader::new(f)))
    }
}

/// Output that only appears at its final path after `commit`.
enum Sink {
    Stdout(BufWriter<io::Stdout>),
    File {
        tmp: BufWriter<NamedTempFile>,
        target: PathBuf,
    },
}

impl Sink {
    fn create(path: &Path) -> CliResult<Self> {
        if is_stdio(path) {
            return Ok(Sink::Stdout(BufWriter::new(io::stdout())));
        }
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = NamedTempFile::new_in(dir)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        Ok(Sink::File {
            tmp: BufWriter::new(tmp),
            target: path.to_path_buf(),
        })
    }

    fn commit(self) -> CliResult {
        match self {
            Sink::Stdout(mut w) => w.flush()?,
            Sink::File { tmp, target } => {
                let tmp = tmp.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
                tmp.persist(&target)
                    .map_err(|e| CliError::Input(format!("cannot write {}: {e}", target.display())))?;
            }
        }
        Ok(())
    }
}

impl Write for Sink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            Sink::Stdout(w) => w.write(buf),
            Sink::File { tmp, .. } => tmp.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            Sink::Stdout(w) => w.flush(),
            Sink::File { tmp, .. } => tmp.flush(),
        }
    }
}

fn read_all_frames(path: &Path) -> CliResult<Vec<LandmarkFrame>> {
    Ok(fmtio::read_frames(open_input(path)?).collect::<Result<_, _>>()?)
}

fn read_profile_file(path: &Path) -> CliResult<CalibrationProfile> {
    Ok(fmtio::read_profile(open_input(path)?)?.profile)
}

fn samples_of(frames: &[LandmarkFrame]) -> CliResult<Vec<MetricSample>> {
    frames
        .iter()
        .map(|f| {
            MetricSample::from_frame(f, map_for(f.scheme()))
                .map_err(|e| CliError::Input(format!("frame t={:.3}: {e}", f.t())))
        })
        .collect()
}

fn created_at(flag: Option<u64>) -> u64 {
    flag.or_else(|| std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok())
        .unwrap_or(0)
}

// ---- subcommands ---------------------------------------------------------------

fn cmd_calibrate(a: CalibrateArgs) -> CliResult {
    let mut samples = Vec::new();
    let cutoff_after = a.calibration.duration;
    let mut first_t = None;
    // only the calibration window is needed; stop reading past it
    for frame in fmtio::read_frames(open_input(&a.input)?) {
        let frame = frame?;
        let first = *first_t.get_or_insert(frame.t());
        if frame.t() - first >= cutoff_after {
            break;
        }
        samples.extend(samples_of(std::slice::from_ref(&frame))?);
    }
    let profile = calibrate(&samples, &a.calibration.config())?;
    let file = ProfileFile {
        profile,
        created_at: created_at(a.created_at),
    };
    let mut sink = Sink::create(&a.out)?;
    fmtio::write_profile(&mut sink, &file)?;
    sink.commit()?;

    let p = &file.profile;
    let summary = format!(
        "baseline_ear={:.6} baseline_mar={:.6} baseline_head_drop={:.6}\n\
         ear_threshold={:.6} mar_threshold={:.6} head_drop_limit={:.6} frames_used={}",
        p.baseline_ear,
        p.baseline_mar,
        p.baseline_head_drop,
        p.ear_threshold,
        p.mar_threshold,
        p.head_drop_limit,
        p.frames_used
    );
    if is_stdio(&a.out) {
        eprintln!("{summary}");
    } else {
        println!("{summary}");
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> CliResult {
    let config = a.pipeline.config()?;
    let profile = read_profile_file(&a.profile)?;
    let classifier = match &a.external {
        Some(path) => ClassifierSource::External(fmtio::read_external_states(open_input(path)?)?),
        None => ClassifierSource::Threshold,
    };
    let mut pipeline = Pipeline::new(profile, config, classifier)?;
    let mut events = Sink::create(&a.out)?;
    let mut records = a.records.as_deref().map(Sink::create).transpose()?;
    let mut states = a.states_out.as_deref().map(Sink::create).transpose()?;

    let start = Instant::now();
    for frame in fmtio::read_frames(open_input(&a.input)?) {
        let out = pipeline.step(&frame?)?;
        for e in &out.events {
            writeln!(events, "{}", fmtio::event_line(e))?;
            if a.bell {
                eprint!("\x07");
            }
        }
        if !out.events.is_empty() {
            events.flush()?;
        }
        if let Some(sink) = records.as_mut() {
            writeln!(sink, "{}", fmtio::record_line(&out.record))?;
        }
        if let Some(sink) = states.as_mut() {
            fmtio::write_external_states(sink, std::iter::once(&out.record))?;
        }
    }
    events.commit()?;
    if let Some(s) = records {
        s.commit()?;
    }
    if let Some(s) = states {
        s.commit()?;
    }
    eprintln!("summary: {}", pipeline.summary(start.elapsed().as_secs_f64()));
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> CliResult {
    let mut script = fmtio::read_script(open_input(&a.script)?)?;
    if let Some(seed) = a.seed {
        script.seed = seed;
    }
    match (a.population, a.out_dir) {
        (Some(n), Some(dir)) => {
            let spec = PopulationSpec {
                n,
                baseline_ear_range: a.ear_range,
                baseline_mar_range: a.mar_range,
                seed: script.seed,
                template: script,
            };
            let scripts = synth::population_scripts(&spec)?;
            fs::create_dir_all(&dir)?;
            for (i, s) in scripts.iter().enumerate() {
                let (frames, truth) = synth::generate(s)?;
                let sub = dir.join(format!("driver_{i:03}"));
                fs::create_dir_all(&sub)?;
                let mut f = Sink::create(&sub.join("frames.jsonl"))?;
                fmtio::write_frames(&mut f, &frames)?;
                let mut l = Sink::create(&sub.join("labels.jsonl"))?;
                fmtio::write_labels(&mut l, &truth.labels)?;
                let mut sc = Sink::create(&sub.join("script.json"))?;
                fmtio::write_script(&mut sc, s)?;
                f.commit()?;
                l.commit()?;
                sc.commit()?;
            }
            eprintln!("wrote {} drivers to {}", scripts.len(), dir.display());
        }
        _ => {
            let (frames, truth) = synth::generate(&script)?;
            let out = a.out.expect("clap enforces --out");
            let labels = a.labels.expect("clap enforces --labels");
            let mut f = Sink::create(&out)?;
            fmtio::write_frames(&mut f, &frames)?;
            let mut l = Sink::create(&labels)?;
            fmtio::write_labels(&mut l, &truth.labels)?;
            f.commit()?;
            l.commit()?;
            eprintln!("wrote {} frames, {} episodes", frames.len(), truth.episodes.len());
        }
    }
    Ok(())
}

fn print_report<T: std::fmt::Display + serde::Serialize>(report: &T, format: ReportFormat) -> CliResult {
    let mut out = BufWriter::new(io::stdout());
    if matches!(format, ReportFormat::Text | ReportFormat::Both) {
        write!(out, "{report}")?;
    }
    if format == ReportFormat::Both {
        writeln!(out)?;
    }
    if matches!(format, ReportFormat::Json | ReportFormat::Both) {
        let json = serde_json::to_string_pretty(report).map_err(|e| CliError::Input(e.to_string()))?;
        writeln!(out, "{json}")?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CliResult {
    let records = fmtio::read_records(open_input(&a.pred)?)?;
    let labels = fmtio::read_labels(open_input(&a.labels)?)?;
    let preds: Vec<Prediction> = records.iter().map(Prediction::from).collect();
    let channel = match a.channel {
        ChannelArg::Eye => EvalChannel::Eye,
        ChannelArg::Mouth => EvalChannel::Mouth,
    };
    let evaluation = eval::confusion(&preds, &labels, channel)?;
    let report = ChannelReport {
        channel,
        result: evaluation.into(),
    };
    print_report(&report, a.format)
}

struct DriverInputs {
    frames: Vec<LandmarkFrame>,
    labels: Vec<FrameLabel>,
    profile: Option<CalibrationProfile>,
    external: Option<ExternalStates>,
}

fn compare_one(
    d: &DriverInputs,
    generalized: &CalibrationProfile,
    calibration: &CalibrationConfig,
    config: &PipelineConfig,
) -> CliResult<eval::ComparisonReport> {
    let personalized = match &d.profile {
        Some(p) => p.clone(),
        None => calibrate(&samples_of(&d.frames)?, calibration)?,
    };
    Ok(eval::compare(
        &d.frames,
        &d.labels,
        &personalized,
        generalized,
        d.external.as_ref(),
        config,
    )?)
}

fn cmd_compare(a: CompareArgs) -> CliResult {
    let config = a.pipeline.config()?;
    let generalized = a.generalized.profile()?;
    let calibration = a.calibration.config();
    if let Some(dir) = &a.population {
        let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("frames.jsonl").is_file())
            .collect();
        subdirs.sort();
        if subdirs.is_empty() {
            return Err(CliError::Input(format!(
                "{} holds no driver directories with frames.jsonl",
                dir.display()
            )));
        }
        let mut reports = Vec::with_capacity(subdirs.len());
        for sub in &subdirs {
            let optional = |name: &str| Some(sub.join(name)).filter(|p| p.is_file());
            let d = DriverInputs {
                frames: read_all_frames(&sub.join("frames.jsonl"))?,
                labels: fmtio::read_labels(open_input(&sub.join("labels.jsonl"))?)?,
                profile: optional("profile.json").map(|p| read_profile_file(&p)).transpose()?,
                external: optional("external.jsonl")
                    .map(|p| -> CliResult<_> { Ok(fmtio::read_external_states(open_input(&p)?)?) })
                    .transpose()?,
            };
            reports.push(
                compare_one(&d, &generalized, &calibration, &config)
                    .map_err(|e| prefix_error(e, sub))?,
            );
        }
        let report = eval::aggregate(&reports)?;
        return print_report(&report, a.format);
    }

    let input = a.input.as_deref().expect("clap enforces --input");
    let labels = a.labels.as_deref().expect("clap enforces --labels");
    let d = DriverInputs {
        frames: read_all_frames(input)?,
        labels: fmtio::read_labels(open_input(labels)?)?,
        profile: a.profile.as_deref().map(read_profile_file).transpose()?,
        external: a
            .external
            .as_deref()
            .map(|p| -> CliResult<_> { Ok(fmtio::read_external_states(open_input(p)?)?) })
            .transpose()?,
    };
    let report = compare_one(&d, &generalized, &calibration, &config)?;
    print_report(&report, a.format)
}

fn prefix_error(e: CliError, dir: &Path) -> CliError {
    match e {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", dir.display())),
        CliError::Domain(m) => CliError::Domain(format!("{}: {m}", dir.display())),
    }
}
