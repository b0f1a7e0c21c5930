#![allow(dead_code)]

use drowsewatch::synth::{DriverProfile, EventKind, PopulationSpec, ScriptEvent, SessionScript};
use drowsewatch::{
    calibrate, generate, AlertEvent, CalibrationConfig, CalibrationProfile, LandmarkFrame,
    MetricSample,
};
use drowsewatch::landmarks::map_for;

pub const FPS: f64 = 30.0;

pub fn ev(kind: EventKind, start: f64, len: f64) -> ScriptEvent {
    ScriptEvent::new(kind, start, len)
}

/// Neutral lead-in for calibration, then a mix of every event kind.
pub fn population_template(noise_sigma: f64) -> SessionScript {
    use EventKind::*;
    let mut s = SessionScript::new(FPS, 300.0, DriverProfile::default());
    s.events = vec![
        ev(Blink, 20.0, 0.1),
        ev(SustainedClosure, 40.0, 2.0),
        ev(Yawn, 60.0, 3.0),
        ev(Blink, 75.0, 0.1),
        ev(Talk, 100.0, 8.0),
        ev(HeadNod, 120.0, 3.0),
        ev(Blink, 140.0, 0.1),
        ev(Yawn, 160.0, 3.0),
        ev(SustainedClosure, 200.0, 2.0),
        ev(Talk, 230.0, 6.0),
        ev(Dropout, 250.0, 2.0),
    ];
    s.noise_sigma = noise_sigma;
    s.seed = 7;
    s
}

pub fn population_spec(n: usize, noise_sigma: f64, seed: u64) -> PopulationSpec {
    PopulationSpec {
        n,
        baseline_ear_range: (0.18, 0.38),
        baseline_mar_range: (0.30, 0.50),
        template: population_template(noise_sigma),
        seed,
    }
}

/// Ten short blinks and five talk spells after a 6 s neutral lead-in.
pub fn debounce_script(with_episodes: bool) -> SessionScript {
    use EventKind::*;
    let mut s = SessionScript::new(FPS, 60.0, DriverProfile::default());
    for i in 0..10 {
        // 3, 4 or 5 frames
        let len = (3 + i % 3) as f64 / FPS;
        s.events.push(ev(Blink, 7.0 + 2.0 * i as f64, len));
    }
    for i in 0..5 {
        s.events.push(ev(Talk, 28.0 + 3.0 * i as f64, 2.0));
    }
    if with_episodes {
        s.events.push(ev(SustainedClosure, 45.0, 2.0));
        s.events.push(ev(Yawn, 52.0, 2.0));
    }
    s.noise_sigma = 0.2;
    s.seed = 11;
    s
}

pub fn samples(frames: &[LandmarkFrame]) -> Vec<MetricSample> {
    frames
        .iter()
        .map(|f| MetricSample::from_frame(f, map_for(f.scheme())).unwrap())
        .collect()
}

pub fn personalize(frames: &[LandmarkFrame]) -> CalibrationProfile {
    calibrate(&samples(frames), &CalibrationConfig::default()).unwrap()
}

pub fn render(script: &SessionScript) -> Vec<LandmarkFrame> {
    generate(script).unwrap().0
}

pub fn event_log(events: &[AlertEvent]) -> Vec<u8> {
    let mut out = Vec::new();
    drowsewatch::io::write_events(&mut out, events).unwrap();
    out
}
