mod common;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use drowsewatch::io as fmtio;
use drowsewatch::synth::{DriverProfile, EventKind, SessionScript};

use common::*;

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drowsewatch"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn bin_stdin(dir: &Path, args: &[&str], input: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_drowsewatch"))
        .args(args)
        .current_dir(dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn write_script(dir: &Path, name: &str, script: &SessionScript) {
    let mut doc = Vec::new();
    fmtio::write_script(&mut doc, script).unwrap();
    std::fs::write(dir.join(name), doc).unwrap();
}

fn synth_session(dir: &Path) {
    write_script(dir, "script.json", &debounce_script(true));
    let out = bin(dir, &["synth", "--script", "script.json", "--out", "frames.jsonl", "--labels", "labels.jsonl"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(bin(dir.path(), &["--version"]).status.code(), Some(0));
    assert_eq!(bin(dir.path(), &["run", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(dir.path(), &[]).status.code(), Some(1));
    assert_eq!(bin(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(bin(dir.path(), &["calibrate", "--input", "x.jsonl"]).status.code(), Some(1));
}

#[test]
fn missing_or_malformed_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["calibrate", "--input", "nope.jsonl", "--out", "p.json"]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(dir.path().join("bad.jsonl"), "{\"t\": 0.0, \"scheme\": \"semantic\"\n").unwrap();
    let out = bin(dir.path(), &["calibrate", "--input", "bad.jsonl", "--out", "p.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    assert!(!dir.path().join("p.json").exists());
}

#[test]
fn short_calibration_exits_2_without_writing_a_profile() {
    let dir = tempfile::tempdir().unwrap();
    write_script(dir.path(), "short.json", &SessionScript::new(30.0, 3.0, DriverProfile::default()));
    let out = bin(dir.path(), &["synth", "--script", "short.json", "--out", "f.jsonl", "--labels", "l.jsonl"]);
    assert!(out.status.success());
    let out = bin(dir.path(), &["calibrate", "--input", "f.jsonl", "--out", "p.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient calibration duration"));
    assert!(!dir.path().join("p.json").exists());
}

#[test]
fn calibrate_then_run_emits_events_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    synth_session(dir.path());
    let out = bin(dir.path(), &["calibrate", "--input", "frames.jsonl", "--out", "profile.json"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("ear_threshold="));

    let out = bin(dir.path(), &["run", "--input", "frames.jsonl", "--profile", "profile.json"]);
    assert_eq!(out.status.code(), Some(0));
    let events = fmtio::read_events(out.stdout.as_slice()).unwrap();
    let kinds: Vec<&str> = events.iter().map(|e| e.kind.as_str()).collect();
    assert_eq!(kinds, ["eyes_closed", "yawning"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("summary"));
}

#[test]
fn run_reads_frames_from_stdin() {
    let dir = tempfile::tempdir().unwrap();
    synth_session(dir.path());
    bin(dir.path(), &["calibrate", "--input", "frames.jsonl", "--out", "profile.json"]);
    let frames = std::fs::read(dir.path().join("frames.jsonl")).unwrap();
    let piped = bin_stdin(dir.path(), &["run", "--input", "-", "--profile", "profile.json"], &frames);
    let direct = bin(dir.path(), &["run", "--input", "frames.jsonl", "--profile", "profile.json"]);
    assert!(piped.status.success());
    assert_eq!(piped.stdout, direct.stdout);
}

#[test]
fn out_of_order_stream_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    synth_session(dir.path());
    bin(dir.path(), &["calibrate", "--input", "frames.jsonl", "--out", "profile.json"]);
    let text = std::fs::read_to_string(dir.path().join("frames.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(200, 201);
    std::fs::write(dir.path().join("swapped.jsonl"), lines.join("\n") + "\n").unwrap();
    let out = bin(dir.path(), &["run", "--input", "swapped.jsonl", "--profile", "profile.json", "--out", "ev.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("ev.jsonl").exists());
}

#[test]
fn eval_and_compare_report_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    synth_session(dir.path());
    bin(dir.path(), &["calibrate", "--input", "frames.jsonl", "--out", "profile.json"]);
    let out = bin(
        dir.path(),
        &["run", "--input", "frames.jsonl", "--profile", "profile.json", "--records", "rec.jsonl", "--states-out", "st.jsonl"],
    );
    assert!(out.status.success());

    let out = bin(dir.path(), &["eval", "--pred", "rec.jsonl", "--labels", "labels.jsonl", "--channel", "mouth", "--format", "json"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["channel"], "mouth");
    assert!(report["accuracy"].as_f64().unwrap() > 95.0);

    let out = bin(dir.path(), &["compare", "--input", "frames.jsonl", "--labels", "labels.jsonl", "--external", "st.jsonl", "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let methods = report["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 3);
    // external states are the personalized run's own decisions
    assert_eq!(methods[1]["eye"], methods[2]["eye"]);
    assert_eq!(methods[1]["mouth"], methods[2]["mouth"]);

    let out = bin(dir.path(), &["compare", "--input", "frames.jsonl", "--labels", "labels.jsonl", "--format", "text"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Personalized EAR") && text.contains("Generalized MAR"));
}

#[test]
fn population_synth_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let mut template = population_template(0.3);
    template.duration = 60.0;
    template.events.retain(|e| e.start_t + e.length_s <= 60.0);
    template.events.push(ev(EventKind::Yawn, 50.0, 3.0));
    write_script(dir.path(), "template.json", &template);
    let out = bin(dir.path(), &["synth", "--script", "template.json", "--population", "4", "--out-dir", "pop"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for i in 0..4 {
        assert!(dir.path().join(format!("pop/driver_{i:03}/frames.jsonl")).is_file());
    }
    let out = bin(dir.path(), &["compare", "--population", "pop", "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["drivers"], 4);
    let pers = &report["methods"][1];
    assert_eq!(pers["method"], "personalized");
    assert!(pers["eye"]["mean_accuracy"].as_f64().unwrap() > 95.0);
}
