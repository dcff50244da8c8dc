//! The real-time loop: source pump, stylize dispatch and publish, three
//! threads joined only by latest-value cells.
//!
//! Frames that arrive while the dispatch stage is busy replace each other in
//! the source cell; every displaced frame counts as dropped. With `Lockstep`
//! pacing both cells are waited on instead, so nothing is dropped and the
//! output is a pure function of the source (used by `bench` and replay
//! determinism checks).

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use drive_core::conditioning::{canny, canny_spatially_varying, ConditionMap, ThresholdField};
use drive_core::config::{ConfigError, PipelineConfig};
use drive_core::frame::{resize_bilinear, Frame};
use drive_core::metrics::{LatencyRecord, MetricsAggregator, MetricsSnapshot};
use drive_core::simworld::ControlInput;
use drive_core::stylizer::{mock_stylize, seed_for_frame, SeedPolicy, StageTimings, StyleRequest, StyleResult};
use drive_core::wire::{decode_control, ControlUpdate, Topic};

use crate::broker::{BrokerClient, Hub, Outbox, Pop};
use crate::cell::{LatestCell, ResidentGauge, ResidentToken, Take};
use crate::sink::Sink;
use crate::source::FrameSource;
use crate::worker::{RemoteError, RemoteStylizer};

pub const METRICS_INTERVAL: Duration = Duration::from_millis(500);

/// Operator state shared with the control topic.
#[derive(Debug)]
pub struct Controls {
    enhancement: AtomicBool,
    field: Mutex<Option<ThresholdField>>,
    drive: Mutex<ControlInput>,
}

impl Controls {
    pub fn new(enhancement_enabled: bool) -> Arc<Self> {
        Arc::new(Self {
            enhancement: AtomicBool::new(enhancement_enabled),
            field: Mutex::new(None),
            drive: Mutex::new(ControlInput::default()),
        })
    }

    pub fn enhancement_enabled(&self) -> bool {
        self.enhancement.load(Ordering::SeqCst)
    }

    pub fn set_enhancement(&self, on: bool) {
        self.enhancement.store(on, Ordering::SeqCst);
    }

    pub fn field(&self) -> Option<ThresholdField> {
        *self.field.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Invalid fields are ignored and leave the previous one in place.
    pub fn set_field(&self, field: Option<ThresholdField>) {
        if field.as_ref().is_none_or(|f| f.validate().is_ok()) {
            *self.field.lock().unwrap_or_else(|e| e.into_inner()) = field;
        }
    }

    pub fn drive_input(&self) -> ControlInput {
        *self.drive.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn set_drive_input(&self, input: ControlInput) {
        *self.drive.lock().unwrap_or_else(|e| e.into_inner()) = input;
    }

    pub fn apply(&self, c: &ControlUpdate) {
        self.set_drive_input(ControlInput { steer: c.steer as f64, throttle: c.throttle as f64, brake: c.brake as f64 });
        self.set_enhancement(c.enhancement_enabled);
        self.set_field(c.field);
    }
}

/// Feed `control` messages from an in-process hub into `controls`.
pub fn spawn_control_listener(hub: &Hub, controls: Arc<Controls>, stop: Arc<AtomicBool>) -> JoinHandle<()> {
    let outbox = Outbox::new();
    hub.subscribe(Topic::Control, &outbox);
    thread::Builder::new()
        .name("control".into())
        .spawn(move || {
            while !stop.load(Ordering::SeqCst) {
                match outbox.pop_wait(Some(Duration::from_millis(50))) {
                    Pop::Item(env) => {
                        if let Ok(c) = decode_control(&env) {
                            controls.apply(&c);
                        }
                    }
                    Pop::Timeout => {}
                    Pop::Closed => return,
                }
            }
        })
        .expect("spawn control listener")
}

/// Same as [`spawn_control_listener`] for a broker in another process.
pub fn spawn_remote_control_listener(mut client: BrokerClient, controls: Arc<Controls>, stop: Arc<AtomicBool>) -> JoinHandle<()> {
    thread::Builder::new()
        .name("control".into())
        .spawn(move || {
            if client.subscribe(Topic::Control.name()).is_err() || client.set_read_timeout(Some(Duration::from_millis(100))).is_err() {
                return;
            }
            while !stop.load(Ordering::SeqCst) {
                match client.recv() {
                    Ok(env) => {
                        if let Ok(c) = decode_control(&env) {
                            controls.apply(&c);
                        }
                    }
                    Err(e) if e.is_timeout() => {}
                    Err(_) => return,
                }
            }
        })
        .expect("spawn control listener")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// Release one frame every `1/fps` seconds.
    Fixed { fps: f64 },
    /// Release frames at their own timestamps, relative to the first.
    Timestamps,
    /// Release the next frame once the previous one has been picked up, and
    /// never overwrite a processed frame.
    Lockstep,
}

pub enum Stylizer {
    Mock,
    /// Mock output, but each frame occupies the dispatch stage for exactly
    /// this long (measured from when dispatch picks the frame up).
    Delay(Duration),
    /// Returns the input unchanged with no cost.
    Identity,
    Remote(RemoteStylizer),
}

enum Failure {
    /// The frame is lost (timeout or worker error).
    Drop,
    /// Worker unreachable: show the unstyled frame.
    Passthrough,
}

impl Stylizer {
    pub fn name(&self) -> &'static str {
        match self {
            Stylizer::Mock => "mock",
            Stylizer::Delay(_) => "delay",
            Stylizer::Identity => "identity",
            Stylizer::Remote(_) => "remote",
        }
    }

    fn run(&mut self, req: &StyleRequest, picked_up: Instant) -> Result<StyleResult, Failure> {
        match self {
            Stylizer::Mock => mock_stylize(req).map_err(|_| Failure::Drop),
            Stylizer::Delay(cost) => {
                let r = mock_stylize(req).map_err(|_| Failure::Drop);
                sleep_until(picked_up + *cost, None);
                r
            }
            Stylizer::Identity => Ok(StyleResult { frame: req.frame.clone(), timings: StageTimings::default(), worker_id: "identity".into() }),
            Stylizer::Remote(r) => r.stylize(req).map_err(|e| match e {
                RemoteError::Unavailable => Failure::Passthrough,
                _ => Failure::Drop,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Styled,
    Passthrough,
}

/// One emitted frame triple.
#[derive(Debug, Clone)]
pub struct Output {
    /// Source frame at the configured resolution.
    pub raw: Frame,
    pub condition: ConditionMap,
    pub styled: Frame,
    pub outcome: Outcome,
    pub timings: Option<StageTimings>,
}

pub struct PipelineOptions {
    pub config: PipelineConfig,
    pub pacing: Pacing,
    pub stylizer: Stylizer,
    pub metrics_interval: Duration,
}

impl PipelineOptions {
    pub fn new(config: PipelineConfig) -> Self {
        let pacing = Pacing::Fixed { fps: config.target_fps };
        Self { config, pacing, stylizer: Stylizer::Mock, metrics_interval: METRICS_INTERVAL }
    }

    pub fn pacing(mut self, p: Pacing) -> Self {
        self.pacing = p;
        self
    }

    pub fn stylizer(mut self, s: Stylizer) -> Self {
        self.stylizer = s;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineReport {
    /// Emitted and dropped frames, in the order the publish stage saw them.
    pub records: Vec<LatencyRecord>,
    /// Completion time of every emitted frame, ns since pipeline start.
    pub publish_ns: Vec<u64>,
    pub emitted_ids: Vec<u64>,
    pub snapshot: MetricsSnapshot,
    pub peak_resident: usize,
    pub frames_in: u64,
    pub frames_out: u64,
    pub dropped: u64,
    pub passthrough: u64,
    pub elapsed_ns: u64,
    pub source_error: Option<String>,
}

impl PipelineReport {
    /// Output rate between the first and last emitted frame.
    pub fn output_fps(&self) -> f64 {
        match (self.publish_ns.first(), self.publish_ns.last()) {
            (Some(&a), Some(&b)) if b > a => (self.publish_ns.len() - 1) as f64 * 1e9 / (b - a) as f64,
            _ => 0.0,
        }
    }

    pub fn drop_rate(&self) -> f64 {
        if self.frames_in == 0 {
            0.0
        } else {
            self.dropped as f64 / self.frames_in as f64
        }
    }
}

struct Captured {
    frame: Frame,
    start_ns: u64,
    capture_ns: u64,
    _token: ResidentToken,
}

struct Processed {
    out: Output,
    record: LatencyRecord,
    start_ns: u64,
    handed_ns: u64,
    _token: ResidentToken,
}

struct Shared {
    epoch: Instant,
    stop: Arc<AtomicBool>,
    gauge: Arc<ResidentGauge>,
    frames_in: AtomicU64,
    displaced: AtomicU64,
    passthrough: AtomicU64,
    dropped_records: Mutex<Vec<LatencyRecord>>,
    source_error: Mutex<Option<String>>,
}

impl Shared {
    fn now_ns(&self) -> u64 {
        self.epoch.elapsed().as_nanos() as u64
    }
}

pub struct Pipeline {
    shared: Arc<Shared>,
    controls: Arc<Controls>,
    threads: Vec<JoinHandle<()>>,
    report: Arc<Mutex<Option<PipelineReport>>>,
}

impl Pipeline {
    pub fn start(
        opts: PipelineOptions,
        source: Box<dyn FrameSource>,
        sinks: Vec<Box<dyn Sink>>,
        controls: Arc<Controls>,
    ) -> Result<Self, ConfigError> {
        opts.config.validate()?;
        let shared = Arc::new(Shared {
            epoch: Instant::now(),
            stop: Arc::new(AtomicBool::new(false)),
            gauge: ResidentGauge::new(),
            frames_in: AtomicU64::new(0),
            displaced: AtomicU64::new(0),
            passthrough: AtomicU64::new(0),
            dropped_records: Mutex::new(Vec::new()),
            source_error: Mutex::new(None),
        });
        let source_cell = Arc::new(LatestCell::<Captured>::new());
        let display_cell = Arc::new(LatestCell::<Processed>::new());
        let report = Arc::new(Mutex::new(None));
        let lockstep = opts.pacing == Pacing::Lockstep;

        let pump = {
            let (shared, cell, pacing) = (shared.clone(), source_cell.clone(), opts.pacing);
            thread::Builder::new().name("pump".into()).spawn(move || pump(source, pacing, &shared, &cell))
        };
        let dispatch = {
            let (shared, input, output, controls) = (shared.clone(), source_cell.clone(), display_cell.clone(), controls.clone());
            let (config, stylizer) = (opts.config.clone(), opts.stylizer);
            thread::Builder::new()
                .name("dispatch".into())
                .spawn(move || dispatch(config, stylizer, lockstep, &shared, &controls, &input, &output))
        };
        let publish = {
            let (shared, cell, report, interval) = (shared.clone(), display_cell.clone(), report.clone(), opts.metrics_interval);
            thread::Builder::new().name("publish".into()).spawn(move || {
                let r = publish(sinks, interval, &shared, &cell);
                *report.lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
            })
        };
        let threads = [pump, dispatch, publish].into_iter().map(|t| t.expect("spawn pipeline thread")).collect();
        Ok(Self { shared, controls, threads, report })
    }

    pub fn controls(&self) -> &Arc<Controls> {
        &self.controls
    }

    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        self.shared.stop.clone()
    }

    /// Stop pulling new frames; frames already inside are still emitted.
    pub fn stop(&self) {
        self.shared.stop.store(true, Ordering::SeqCst);
    }

    pub fn resident(&self) -> usize {
        self.shared.gauge.current()
    }

    pub fn join(self) -> PipelineReport {
        for t in self.threads {
            let _ = t.join();
        }
        let mut r = self.report.lock().unwrap_or_else(|e| e.into_inner()).take().unwrap_or_default();
        r.source_error = self.shared.source_error.lock().unwrap_or_else(|e| e.into_inner()).take();
        r
    }
}

/// Run to completion (source exhausted) and return the report.
pub fn run_pipeline(
    opts: PipelineOptions,
    source: Box<dyn FrameSource>,
    sinks: Vec<Box<dyn Sink>>,
) -> Result<PipelineReport, ConfigError> {
    let controls = Controls::new(opts.config.enhancement_enabled);
    Ok(Pipeline::start(opts, source, sinks, controls)?.join())
}

/// Sleep until `t`, waking early if `stop` is raised.
fn sleep_until(t: Instant, stop: Option<&AtomicBool>) {
    loop {
        let now = Instant::now();
        if now >= t || stop.is_some_and(|s| s.load(Ordering::SeqCst)) {
            return;
        }
        thread::sleep((t - now).min(Duration::from_millis(20)));
    }
}

fn pump(mut source: Box<dyn FrameSource>, pacing: Pacing, shared: &Shared, cell: &LatestCell<Captured>) {
    let began = Instant::now();
    let mut first_ts: Option<u64> = None;
    let mut n: u64 = 0;
    loop {
        if shared.stop.load(Ordering::SeqCst) {
            break;
        }
        match pacing {
            Pacing::Lockstep => {
                if !cell.wait_empty() {
                    break;
                }
            }
            Pacing::Fixed { fps } => {
                sleep_until(began + Duration::from_secs_f64(n as f64 / fps), Some(&shared.stop));
            }
            Pacing::Timestamps => {}
        }
        if shared.stop.load(Ordering::SeqCst) {
            break;
        }
        let t0 = shared.now_ns();
        let frame = match source.next_frame() {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) => {
                *shared.source_error.lock().unwrap_or_else(|e| e.into_inner()) = Some(e.to_string());
                break;
            }
        };
        let capture_ns = shared.now_ns() - t0;
        let mut start_ns = t0;
        if pacing == Pacing::Timestamps {
            let base = *first_ts.get_or_insert(frame.ts_ns());
            sleep_until(began + Duration::from_nanos(frame.ts_ns().saturating_sub(base)), Some(&shared.stop));
            start_ns = shared.now_ns().saturating_sub(capture_ns);
        }
        shared.frames_in.fetch_add(1, Ordering::SeqCst);
        let gauge = &shared.gauge;
        if cell.offer_with(|| Captured { frame, start_ns, capture_ns, _token: gauge.token() }) {
            shared.displaced.fetch_add(1, Ordering::SeqCst);
        }
        n += 1;
    }
    cell.close();
}

fn dispatch(
    config: PipelineConfig,
    mut stylizer: Stylizer,
    lockstep: bool,
    shared: &Shared,
    controls: &Controls,
    input: &LatestCell<Captured>,
    output: &LatestCell<Processed>,
) {
    let policy = SeedPolicy::fixed(config.seed);
    loop {
        let c = match input.take_wait(None) {
            Take::Item(c) => c,
            Take::Closed => break,
            Take::Empty => continue,
        };
        let picked_up = Instant::now();
        let t_pick = shared.now_ns();
        let id = c.frame.id();
        let mut record = LatencyRecord { frame_id: id, capture_ns: c.capture_ns, ..Default::default() };

        let condition = resize_bilinear(&c.frame, config.width, config.height).ok().and_then(|raw| {
            let cond = match controls.field() {
                Some(f) => canny_spatially_varying(&raw, &f, config.canny_sigma),
                None => canny(&raw, config.canny_low, config.canny_high, config.canny_sigma),
            };
            cond.ok().map(|cond| (raw, cond))
        });
        let t_cond = shared.now_ns();
        record.condition_ns = t_cond - t_pick;
        let Some((raw, condition)) = condition else {
            drop_frame(shared, record, c.start_ns);
            continue;
        };

        let (out, rtt) = if controls.enhancement_enabled() {
            let req = StyleRequest {
                frame: raw,
                condition,
                seed: seed_for_frame(&policy, id),
                steps: config.steps,
                strength: config.strength,
                style_id: config.style_id.clone(),
            };
            let result = stylizer.run(&req, picked_up);
            let rtt = shared.now_ns() - t_cond;
            let StyleRequest { frame: raw, condition, .. } = req;
            match result {
                Ok(res) => (Output { raw, condition, styled: res.frame, outcome: Outcome::Styled, timings: Some(res.timings) }, Some(rtt)),
                Err(Failure::Passthrough) => {
                    shared.passthrough.fetch_add(1, Ordering::SeqCst);
                    (Output { styled: raw.clone(), raw, condition, outcome: Outcome::Passthrough, timings: None }, None)
                }
                Err(Failure::Drop) => {
                    drop_frame(shared, record, c.start_ns);
                    continue;
                }
            }
        } else {
            shared.passthrough.fetch_add(1, Ordering::SeqCst);
            (Output { styled: raw.clone(), raw, condition, outcome: Outcome::Passthrough, timings: None }, None)
        };
        record.stylize_rtt_ns = rtt;

        if lockstep && !output.wait_empty() {
            break;
        }
        let handed_ns = shared.now_ns();
        let Captured { start_ns, _token, .. } = c;
        if output.offer_with(|| Processed { out, record, start_ns, handed_ns, _token }) {
            shared.displaced.fetch_add(1, Ordering::SeqCst);
        }
    }
    output.close();
}

fn drop_frame(shared: &Shared, mut record: LatencyRecord, start_ns: u64) {
    record.dropped = true;
    record.stylize_rtt_ns = None;
    record.end_to_end_ns = shared.now_ns() - start_ns;
    shared.dropped_records.lock().unwrap_or_else(|e| e.into_inner()).push(record);
}

fn publish(mut sinks: Vec<Box<dyn Sink>>, interval: Duration, shared: &Shared, cell: &LatestCell<Processed>) -> PipelineReport {
    let mut agg = MetricsAggregator::new();
    agg.note_start(shared.now_ns());
    let mut report = PipelineReport::default();
    let mut next_snapshot = Instant::now() + interval;
    let mut displaced_seen = 0;

    let sync = |agg: &mut MetricsAggregator, report: &mut PipelineReport, displaced_seen: &mut u64| {
        agg.set_frames_in(shared.frames_in.load(Ordering::SeqCst));
        let d = shared.displaced.load(Ordering::SeqCst);
        agg.add_dropped(d - *displaced_seen);
        *displaced_seen = d;
        let now = shared.now_ns();
        for rec in shared.dropped_records.lock().unwrap_or_else(|e| e.into_inner()).drain(..) {
            agg.record(&rec, now);
            report.records.push(rec);
        }
    };

    loop {
        let wait = next_snapshot.saturating_duration_since(Instant::now());
        let closed = match cell.take_wait(Some(wait)) {
            Take::Item(p) => {
                let t0 = shared.now_ns();
                for s in sinks.iter_mut() {
                    s.publish(&p.out);
                }
                let done = shared.now_ns();
                let mut rec = p.record;
                rec.handoff_ns = t0 - p.handed_ns;
                rec.end_to_end_ns = done - p.start_ns;
                agg.record(&rec, done);
                report.records.push(rec);
                report.publish_ns.push(done);
                report.emitted_ids.push(rec.frame_id);
                false
            }
            Take::Empty => false,
            Take::Closed => true,
        };
        sync(&mut agg, &mut report, &mut displaced_seen);
        if closed {
            break;
        }
        if Instant::now() >= next_snapshot {
            let snap = agg.snapshot(shared.now_ns());
            for s in sinks.iter_mut() {
                s.metrics(&snap);
            }
            next_snapshot = (next_snapshot + interval).max(Instant::now());
        }
    }
    let now = shared.now_ns();
    let snap = agg.snapshot(now);
    for s in sinks.iter_mut() {
        s.metrics(&snap);
    }
    report.snapshot = snap;
    report.peak_resident = shared.gauge.peak();
    report.frames_in = snap.frames_in;
    report.frames_out = snap.frames_out;
    report.dropped = snap.frames_dropped;
    report.passthrough = shared.passthrough.load(Ordering::SeqCst);
    report.elapsed_ns = now;
    report
}
