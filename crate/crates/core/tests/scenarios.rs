mod common;

use drowsewatch::io::{self as fmtio, IoError, ProfileFile};
use drowsewatch::pipeline::{ExternalState, ExternalStates, EyeState, MouthState, PipelineError};
use drowsewatch::synth::{DriverProfile, EventKind, SessionScript};
use drowsewatch::{
    generate, run_session, AlertKind, ClassifierSource, LandmarkFrame, Pipeline, PipelineConfig,
    Scheme,
};

use common::*;

fn session(events: &[(EventKind, f64, f64)], duration: f64) -> SessionScript {
    let mut s = SessionScript::new(FPS, duration, DriverProfile::default());
    s.events = events.iter().map(|&(k, t, l)| ev(k, t, l)).collect();
    s
}

fn alerts(script: &SessionScript) -> Vec<drowsewatch::AlertEvent> {
    let frames = render(script);
    let profile = personalize(&frames);
    run_session(&frames, &profile, &PipelineConfig::default(), ClassifierSource::Threshold)
        .unwrap()
        .events
}

#[test]
fn a_single_blink_is_silent() {
    assert!(alerts(&session(&[(EventKind::Blink, 7.0, 0.1)], 10.0)).is_empty());
}

#[test]
fn two_second_closure_fires_once_after_one_second() {
    let events = alerts(&session(&[(EventKind::SustainedClosure, 7.0, 2.0)], 12.0));
    assert_eq!(events.len(), 1, "{events:?}");
    let e = &events[0];
    assert_eq!(e.kind, AlertKind::EyesClosed);
    assert!((e.emitted_t - e.onset_t - 1.0).abs() <= 1.0 / FPS + 1e-9);
    // smoothing delays onset by a few frames past the scripted start
    assert!(e.onset_t > 7.0 && e.onset_t < 7.0 + 15.0 / FPS);
    assert!(e.value < e.threshold);
}

#[test]
fn ten_seconds_without_a_face_is_one_driver_missing() {
    let events = alerts(&session(&[(EventKind::Dropout, 7.0, 10.0)], 20.0));
    assert_eq!(events.len(), 1, "{events:?}");
    let e = &events[0];
    assert_eq!(e.kind, AlertKind::DriverMissing);
    assert!((e.onset_t - 7.0).abs() <= 1.0 / FPS);
    assert!((e.emitted_t - e.onset_t - 3.0).abs() <= 1.0 / FPS + 1e-9);
}

#[test]
fn head_nod_raises_head_down() {
    let events = alerts(&session(&[(EventKind::HeadNod, 7.0, 4.0)], 14.0));
    let kinds: Vec<_> = events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds, [AlertKind::HeadDown]);
}

#[test]
fn frequent_closures_push_perclos_over_the_limit() {
    let mut evs = Vec::new();
    for i in 0..14 {
        // short enough that even the smoothed closure stays under the eyes sustain time
        evs.push((EventKind::SustainedClosure, 6.0 + 2.5 * i as f64, 0.6));
    }
    let events = alerts(&session(&evs, 42.0));
    let kinds: Vec<_> = events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds, [AlertKind::PerclosHigh], "{events:?}");
    assert!(events[0].value > 20.0);
    assert!(events[0].emitted_t >= 30.0);
}

#[test]
fn repeated_episodes_rearm_between_alerts() {
    let events = alerts(&session(
        &[(EventKind::Yawn, 7.0, 3.0), (EventKind::Yawn, 14.0, 3.0)],
        20.0,
    ));
    let kinds: Vec<_> = events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds, [AlertKind::Yawning, AlertKind::Yawning]);
}

#[test]
fn external_mode_replays_threshold_decisions() {
    let script = debounce_script(true);
    let frames = render(&script);
    let profile = personalize(&frames);
    let config = PipelineConfig::default();
    let a = run_session(&frames, &profile, &config, ClassifierSource::Threshold).unwrap();
    let states = ExternalStates::from_records(&a.records);
    let b = run_session(&frames, &profile, &config, ClassifierSource::External(states)).unwrap();
    assert_eq!(event_log(&a.events), event_log(&b.events));
    assert_eq!(a.records, b.records);
}

#[test]
fn external_mode_needs_a_state_for_every_face_frame() {
    let frames = render(&session(&[], 7.0));
    let profile = personalize(&frames);
    let mut states = ExternalStates::new();
    for f in &frames[..100] {
        states.insert(
            f.t(),
            ExternalState { eye: EyeState::Open, mouth: MouthState::Normal, head: None },
        );
    }
    let err = run_session(&frames, &profile, &PipelineConfig::default(), ClassifierSource::External(states))
        .unwrap_err();
    assert!(matches!(err, PipelineError::MissingLabel { t } if (t - frames[100].t()).abs() < 1e-9));
}

#[test]
fn out_of_order_frames_are_rejected() {
    let frames = render(&session(&[], 7.0));
    let profile = personalize(&frames);
    let mut p = Pipeline::new(profile, PipelineConfig::default(), ClassifierSource::Threshold).unwrap();
    p.step(&frames[5]).unwrap();
    assert!(matches!(p.step(&frames[5]), Err(PipelineError::StreamOrder { .. })));
    assert!(matches!(p.step(&frames[4]), Err(PipelineError::StreamOrder { .. })));
    p.step(&frames[6]).unwrap();
}

#[test]
fn no_face_frames_freeze_the_smoothing_buffers() {
    let frames = render(&session(&[(EventKind::Dropout, 7.0, 1.0)], 9.0));
    let profile = personalize(&frames);
    let out = run_session(&frames, &profile, &PipelineConfig::default(), ClassifierSource::Threshold).unwrap();
    let before = out.records.iter().rev().find(|r| r.t < 7.0).unwrap();
    let gap = out.records.iter().find(|r| r.t > 7.5).unwrap();
    assert!(!gap.face_present);
    assert_eq!((gap.ear, gap.eye), (None, None));
    let after = out.records.iter().find(|r| r.t >= 8.0).unwrap();
    assert!(after.face_present);
    assert_eq!(before.ear_smoothed, after.ear_smoothed);
}

#[test]
fn builtin_schemes_drive_the_pipeline() {
    // embed semantic points into dlib and mesh layouts and expect identical metrics
    let frames = render(&session(&[(EventKind::SustainedClosure, 7.0, 2.0)], 11.0));
    let profile = personalize(&frames);
    let config = PipelineConfig::default();
    let reference = run_session(&frames, &profile, &config, ClassifierSource::Threshold).unwrap();
    for scheme in [Scheme::Dlib68, Scheme::Mesh468] {
        let map = drowsewatch::landmarks::map_for(scheme);
        let embedded: Vec<LandmarkFrame> = frames
            .iter()
            .map(|f| {
                if !f.face_present() {
                    return LandmarkFrame::absent(f.t(), scheme).unwrap();
                }
                let sp = drowsewatch::landmarks::to_semantic(f, drowsewatch::landmarks::map_for(Scheme::Semantic))
                    .unwrap()
                    .unwrap();
                let mut pts = vec![drowsewatch::Point::new(0.0, 0.0); scheme.point_count()];
                for (i, &k) in map.eye_left_indices.iter().enumerate() {
                    pts[k] = sp.left_eye[i];
                }
                for (i, &k) in map.eye_right_indices.iter().enumerate() {
                    pts[k] = sp.right_eye[i];
                }
                for (i, &k) in map.mouth_indices.iter().enumerate() {
                    pts[k] = sp.mouth[i];
                }
                pts[map.nose_tip_index] = sp.nose_tip;
                LandmarkFrame::new(f.t(), scheme, pts).unwrap()
            })
            .collect();
        let out = run_session(&embedded, &profile, &config, ClassifierSource::Threshold).unwrap();
        assert_eq!(event_log(&out.events), event_log(&reference.events), "{scheme:?}");
    }
}

// ---- formats ----------------------------------------------------------------

#[test]
fn frame_files_round_trip_through_text() {
    let mut script = debounce_script(true);
    script.events.push(ev(EventKind::Dropout, 20.0, 1.0));
    let (frames, truth) = generate(&script).unwrap();
    let mut text = Vec::new();
    fmtio::write_frames(&mut text, &frames).unwrap();
    let back: Vec<LandmarkFrame> = fmtio::read_frames(text.as_slice()).collect::<Result<_, _>>().unwrap();
    let mut again = Vec::new();
    fmtio::write_frames(&mut again, &back).unwrap();
    assert_eq!(text, again);
    for (a, b) in frames.iter().zip(&back) {
        for (p, q) in a.points().iter().zip(b.points()) {
            assert!((p.x - q.x).abs() <= 5e-7 && (p.y - q.y).abs() <= 5e-7);
        }
    }

    let mut labels = Vec::new();
    fmtio::write_labels(&mut labels, &truth.labels).unwrap();
    assert_eq!(fmtio::read_labels(labels.as_slice()).unwrap(), truth.labels);
}

#[test]
fn frame_reader_reports_the_failing_line() {
    let text = "{\"t\":0.000,\"scheme\":\"semantic\",\"face\":false,\"points\":[]}\n\
                \n\
                {\"t\":0.033,\"scheme\":\"dlib68\",\"face\":true,\"points\":[[1,2]]}\n";
    let results: Vec<_> = fmtio::read_frames(text.as_bytes()).collect();
    assert!(results[0].is_ok());
    match &results[1] {
        Err(IoError::Parse { line, .. }) => assert_eq!(*line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn frame_reader_rejects_time_going_backwards() {
    let text = "{\"t\":1.000,\"scheme\":\"semantic\",\"face\":false,\"points\":[]}\n\
                {\"t\":0.500,\"scheme\":\"semantic\",\"face\":false,\"points\":[]}\n";
    let results: Vec<_> = fmtio::read_frames(text.as_bytes()).collect();
    assert!(matches!(results[1], Err(IoError::StreamOrder { line: 2, .. })));
}

#[test]
fn frame_reader_tolerates_depth_and_unknown_keys() {
    let mut pts = String::new();
    for i in 0..21 {
        if i > 0 {
            pts.push(',');
        }
        pts.push_str(&format!("[{},{},0.5]", i * 10, i * 3));
    }
    let text = format!("{{\"t\":0.0,\"scheme\":\"semantic\",\"face\":true,\"points\":[{pts}],\"camera\":\"cab\"}}\n");
    let frame = fmtio::read_frames(text.as_bytes()).next().unwrap().unwrap();
    assert_eq!(frame.points().len(), 21);
    assert_eq!(frame.points()[4].x, 40.0);
}

#[test]
fn profile_version_is_checked() {
    let frames = render(&session(&[], 6.0));
    let profile = personalize(&frames);
    let mut doc = Vec::new();
    fmtio::write_profile(&mut doc, &ProfileFile { profile, created_at: 0 }).unwrap();
    let text = String::from_utf8(doc).unwrap().replace("\"format_version\": 1", "\"format_version\": 9");
    assert!(matches!(
        fmtio::read_profile(text.as_bytes()),
        Err(IoError::UnsupportedVersion { found: 9, .. })
    ));
}

#[test]
fn profile_documents_list_keys_alphabetically() {
    let frames = render(&session(&[], 6.0));
    let doc = fmtio::profile_document(&ProfileFile { profile: personalize(&frames), created_at: 0 });
    let keys: Vec<&str> = doc
        .lines()
        .filter_map(|l| l.trim().strip_prefix('"')?.split('"').next())
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(keys.contains(&"created_at") && keys.contains(&"format_version"));
}

#[test]
fn external_vote_smooths_flickering_labels() {
    let frames = render(&session(&[], 8.0));
    let profile = personalize(&frames);
    let mut states = ExternalStates::new();
    for (k, f) in frames.iter().enumerate() {
        // one closed frame in every three never wins a majority
        let closed = k % 3 == 1 || (90..150).contains(&k);
        states.insert(
            f.t(),
            ExternalState { eye: EyeState::from_positive(closed), mouth: MouthState::Normal, head: None },
        );
    }
    let raw = run_session(&frames, &profile, &PipelineConfig::default(), ClassifierSource::External(states.clone()))
        .unwrap();
    let voted_config = PipelineConfig { external_vote: true, ..PipelineConfig::default() };
    let voted = run_session(&frames, &profile, &voted_config, ClassifierSource::External(states)).unwrap();

    let closed = |r: &drowsewatch::pipeline::FrameRecord| r.eye == Some(EyeState::Closed);
    assert!(closed(&raw.records[31]));
    assert!(!closed(&voted.records[31]));
    // the majority lags into the solid closed run and releases shortly after it
    let voted_closed: Vec<usize> = (0..frames.len()).filter(|&k| closed(&voted.records[k])).collect();
    assert!(voted_closed.first().is_some_and(|&k| (91..98).contains(&k)), "{voted_closed:?}");
    assert!(voted_closed.iter().all(|&k| (91..166).contains(&k)), "{voted_closed:?}");
    let kinds: Vec<_> = voted.events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds, [AlertKind::EyesClosed]);
}
