use std::time::Duration;

use drive::pipeline::{run_pipeline, Controls, Outcome, Pacing, Pipeline, PipelineOptions, Stylizer};
use drive::sink::{CollectSink, Sink};
use drive::source::SyntheticSource;
use drive_core::config::PipelineConfig;

const COST: Duration = Duration::from_millis(50);
const INPUT_FPS: f64 = 30.0;

fn options() -> PipelineOptions {
    PipelineOptions::new(PipelineConfig { width: 64, height: 64, ..PipelineConfig::default() })
        .pacing(Pacing::Fixed { fps: INPUT_FPS })
        .stylizer(Stylizer::Delay(COST))
}

#[test]
fn fifty_ms_stylizer_at_thirty_fps_emits_twenty() {
    let sink = CollectSink::new();
    let report = run_pipeline(options(), Box::new(SyntheticSource::new(64, 64, 150, INPUT_FPS)), vec![Box::new(sink.clone())]).unwrap();

    let fps = report.output_fps();
    let drop = report.drop_rate();
    assert!((fps - 20.0).abs() <= 1.0, "output {fps:.2} fps");
    assert!((drop - 1.0 / 3.0).abs() <= 0.03, "drop rate {drop:.3}");
    assert!(report.peak_resident <= 3, "peak resident {}", report.peak_resident);
    assert_eq!(report.frames_in, report.frames_out + report.dropped);

    // emitted frames stay in order, and none waits more than the cost plus
    // two input periods
    let ids = &report.emitted_ids;
    assert!(ids.windows(2).all(|w| w[0] < w[1]));
    let bound = COST.as_nanos() as u64 + 2 * (1e9 / INPUT_FPS) as u64;
    for r in report.records.iter().filter(|r| !r.dropped) {
        assert!(r.end_to_end_ns <= bound, "frame {} took {} ms", r.frame_id, r.end_to_end_ns as f64 / 1e6);
        assert!(r.is_consistent());
    }
    assert!(sink.outputs().iter().all(|o| o.outcome == Outcome::Styled));
    let last = sink.snapshots().last().copied().unwrap();
    assert_eq!(last.frames_in, report.frames_in);
    assert_eq!(last.frames_dropped, report.dropped);
}

#[test]
fn resident_frames_stay_bounded_under_a_stalled_stylizer() {
    let opts = options().stylizer(Stylizer::Delay(Duration::from_millis(400)));
    let report = run_pipeline(opts, Box::new(SyntheticSource::new(64, 64, 60, 60.0)), vec![]).unwrap();
    assert!(report.peak_resident <= 3, "{}", report.peak_resident);
    assert!(report.dropped > 40);
}

#[test]
fn disabling_enhancement_mid_run_switches_to_passthrough() {
    let sink = CollectSink::new();
    let sinks: Vec<Box<dyn Sink>> = vec![Box::new(sink.clone())];
    let controls = Controls::new(true);
    let p = Pipeline::start(options(), Box::new(SyntheticSource::new(64, 64, 120, INPUT_FPS)), sinks, controls.clone()).unwrap();
    std::thread::sleep(Duration::from_millis(1500));
    controls.set_enhancement(false);
    let toggled_at = sink.outputs().len();
    let report = p.join();

    let outs = sink.outputs();
    let first_pass = outs.iter().position(|o| o.outcome == Outcome::Passthrough).expect("passthrough after toggle");
    // at most the frame already in the stylizer is still styled after the toggle
    assert!(first_pass <= toggled_at + 1, "{first_pass} vs {toggled_at}");
    assert!(outs[..first_pass].iter().all(|o| o.outcome == Outcome::Styled));
    assert!(outs[first_pass..].iter().all(|o| o.outcome == Outcome::Passthrough && o.styled == o.raw));
    assert!(report.passthrough as usize == outs.len() - first_pass);
}
