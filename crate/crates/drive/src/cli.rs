//! Command-line entry points.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use drive_core::config::PipelineConfig;
use drive_core::evaluation::{make_report, DEFAULT_AREA_SAMPLES};
use drive_core::simworld::{RacingLine, RenderScene, TrackModel};
use serde::Serialize;

use crate::bridge::{Bridge, DEFAULT_BRIDGE_PORT};
use crate::broker::{Broker, BrokerClient, Hub, BROKER_ADDR_ENV, DEFAULT_BROKER_ADDR};
use crate::io::{self as dio, IoError};
use crate::pipeline::{
    spawn_control_listener, spawn_remote_control_listener, Controls, Pacing, Pipeline, PipelineOptions, PipelineReport,
    Stylizer,
};
use crate::sink::{HashSink, HubSink, Sink, TcpSink};
use crate::source::{new_session, spawn_sim_clock, FrameSource, ReplaySource, SimSource, SyntheticSource};
use crate::worker::{RemoteStylizer, Worker, WorkerOptions, DEFAULT_WORKER_ADDR};

pub const EXIT_USAGE: u8 = 64;
pub const EXIT_PORT_IN_USE: u8 = 2;
pub const EXIT_BAD_TRACK: u8 = 3;
pub const EXIT_REMOTE: u8 = 4;
pub const EXIT_EVAL: u8 = 5;
pub const SEED_ENV: &str = "DRIVE_SEED";

const DEFAULT_TRACK_JSON: &[u8] = include_bytes!("../data/default_track.json");

#[derive(Debug, Parser)]
#[command(name = "drive", version, about = "Real-time frame stylization loop, driving simulator and trajectory scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drive the simulator through the live pipeline.
    Run(RunArgs),
    /// Push recorded frames from a manifest through the pipeline.
    Replay(ReplayArgs),
    /// Measure throughput and latency on synthetic frames.
    Bench(BenchArgs),
    /// Score trajectory logs against the racing line.
    Eval(EvalArgs),
    /// Copy a uniform sample of manifest frames.
    Sample(SampleArgs),
    /// Serve the mock stylizer over TCP.
    WorkerMock(WorkerArgs),
    /// Run a standalone broker and console bridge.
    Broker(BrokerArgs),
}

#[derive(Debug, Clone, Copy)]
pub struct Resolution {
    pub width: u32,
    pub height: u32,
}

fn parse_resolution(s: &str) -> Result<Resolution, String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let n = |v: &str| v.trim().parse::<u32>().map_err(|_| format!("bad dimension {v:?}"));
    Ok(Resolution { width: n(w)?, height: n(h)? })
}

#[derive(Debug, Args)]
pub struct StyleArgs {
    /// Session seed for the stylizer.
    #[arg(long, env = SEED_ENV, default_value_t = 42)]
    pub seed: u64,
    /// Output resolution.
    #[arg(long, value_parser = parse_resolution, default_value = "640x480")]
    pub resolution: Resolution,
    /// Passthrough instead of stylization (study condition B).
    #[arg(long)]
    pub no_enhance: bool,
    /// Remote stylizer worker; the in-process mock is used otherwise.
    #[arg(long)]
    pub worker: Option<String>,
    #[arg(long, default_value_t = 50.0)]
    pub canny_low: f32,
    #[arg(long, default_value_t = 150.0)]
    pub canny_high: f32,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f32,
    #[arg(long, default_value_t = 0.6)]
    pub strength: f32,
}

impl StyleArgs {
    fn config(&self, fps: f64) -> PipelineConfig {
        PipelineConfig {
            width: self.resolution.width,
            height: self.resolution.height,
            target_fps: fps,
            seed: self.seed,
            canny_low: self.canny_low,
            canny_high: self.canny_high,
            canny_sigma: self.sigma,
            strength: self.strength,
            enhancement_enabled: !self.no_enhance,
            worker_endpoint: self.worker.clone().unwrap_or_else(|| DEFAULT_WORKER_ADDR.into()),
            ..PipelineConfig::default()
        }
    }

    fn stylizer(&self) -> Stylizer {
        match &self.worker {
            Some(addr) => Stylizer::Remote(RemoteStylizer::new(addr.clone())),
            None => Stylizer::Mock,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Track JSON; the shipped default track otherwise.
    #[arg(long)]
    pub track: Option<PathBuf>,
    /// Publish to this external broker instead of the embedded one.
    #[arg(long, env = BROKER_ADDR_ENV)]
    pub broker: Option<String>,
    /// Listen address of the embedded broker.
    #[arg(long, default_value = DEFAULT_BROKER_ADDR)]
    pub broker_listen: String,
    #[arg(long, default_value_t = 10.0)]
    pub fps: f64,
    #[arg(long, default_value_t = DEFAULT_BRIDGE_PORT)]
    pub console_port: u16,
    /// Trajectory log written on exit.
    #[arg(long, default_value = "trajectory.csv")]
    pub trajectory: PathBuf,
    /// Let the pure-pursuit autopilot drive, in simulated time, and stop
    /// after `--laps` start-line crossings.
    #[arg(long)]
    pub autopilot: bool,
    #[arg(long, default_value_t = 2)]
    pub laps: usize,
    /// Stop after this many seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[command(flatten)]
    pub style: StyleArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PacingArg {
    Fixed,
    Timestamps,
    Lockstep,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = PacingArg::Timestamps)]
    pub pacing: PacingArg,
    /// Frame rate for `--pacing fixed`.
    #[arg(long, default_value_t = 10.0)]
    pub fps: f64,
    /// Write styled frames as PPM files here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Publish to this broker.
    #[arg(long, env = BROKER_ADDR_ENV)]
    pub broker: Option<String>,
    #[command(flatten)]
    pub style: StyleArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StylizerArg {
    Mock,
    Remote,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 300)]
    pub frames: u64,
    #[arg(long, value_parser = parse_resolution, default_value = "640x480")]
    pub resolution: Resolution,
    #[arg(long, value_enum, default_value_t = StylizerArg::Mock)]
    pub stylizer: StylizerArg,
    #[arg(long, default_value = DEFAULT_WORKER_ADDR)]
    pub worker: String,
    #[arg(long, env = SEED_ENV, default_value_t = 42)]
    pub seed: u64,
    /// JSON report path; printed to stdout otherwise.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of `<id>_<A|B>.csv` trajectory logs.
    #[arg(long)]
    pub sessions: PathBuf,
    /// Racing line JSON (a track file also works).
    #[arg(long)]
    pub racing_line: PathBuf,
    /// Track whose start line splits laps; the shipped default otherwise.
    #[arg(long)]
    pub track: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_AREA_SAMPLES)]
    pub area_samples: usize,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(short = 'k', long = "count")]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WorkerArgs {
    #[arg(long, default_value = DEFAULT_WORKER_ADDR)]
    pub listen: String,
    /// Artificial inference time per request.
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,
    /// Exit after this many seconds.
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BrokerArgs {
    #[arg(long, default_value = DEFAULT_BROKER_ADDR)]
    pub listen: String,
    #[arg(long, default_value_t = DEFAULT_BRIDGE_PORT)]
    pub console_port: u16,
    #[arg(long)]
    pub duration: Option<f64>,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

fn general(e: impl std::fmt::Display) -> Failure {
    Failure::new(1, e.to_string())
}

fn bind_error(what: &str, addr: &str, e: io::Error) -> Failure {
    let code = if e.kind() == io::ErrorKind::AddrInUse { EXIT_PORT_IN_USE } else { 1 };
    Failure::new(code, format!("cannot listen on {addr} for the {what}: {e}"))
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("drive: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run(a) => run(a),
        Command::Replay(a) => replay(a),
        Command::Bench(a) => bench(a),
        Command::Eval(a) => eval(a),
        Command::Sample(a) => sample(a),
        Command::WorkerMock(a) => worker_mock(a),
        Command::Broker(a) => broker(a),
    }
}

/// Stop flag raised by SIGINT or after `duration` seconds.
fn stop_signal(duration: Option<f64>) -> Arc<AtomicBool> {
    let stop = Arc::new(AtomicBool::new(false));
    let s = stop.clone();
    // a second handler registration fails inside one process (tests); the
    // duration timer still works then
    let _ = ctrlc::set_handler(move || s.store(true, Ordering::SeqCst));
    if let Some(secs) = duration {
        let s = stop.clone();
        thread::spawn(move || {
            thread::sleep(Duration::from_secs_f64(secs.max(0.0)));
            s.store(true, Ordering::SeqCst);
        });
    }
    stop
}

fn wait_for(stop: &AtomicBool) {
    while !stop.load(Ordering::SeqCst) {
        thread::sleep(Duration::from_millis(20));
    }
}

pub fn load_track_or_default(path: Option<&Path>) -> Result<(TrackModel, RacingLine), IoError> {
    match path {
        Some(p) => dio::load_track(p),
        None => dio::track_from_json(Path::new("default_track.json"), DEFAULT_TRACK_JSON),
    }
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let (track, line) = load_track_or_default(a.track.as_deref()).map_err(|e| Failure::new(EXIT_BAD_TRACK, e.to_string()))?;
    let config = a.style.config(a.fps);
    config.validate().map_err(general)?;
    let stop = stop_signal(a.duration);
    let controls = Controls::new(config.enhancement_enabled);

    let hub = Hub::new();
    let console_addr = format!("127.0.0.1:{}", a.console_port);
    let _bridge = Bridge::bind(&console_addr, hub.clone()).map_err(|e| bind_error("console bridge", &console_addr, e))?;
    let (_broker, mut sinks, listener): (Option<Broker>, Vec<Box<dyn Sink>>, _) = match &a.broker {
        None => {
            let b = Broker::bind(&a.broker_listen, hub.clone()).map_err(|e| bind_error("broker", &a.broker_listen, e))?;
            let l = spawn_control_listener(&hub, controls.clone(), stop.clone());
            (Some(b), vec![Box::new(HubSink::new(hub.clone()))], l)
        }
        Some(addr) => {
            let addr = addr.as_str();
            let tcp = TcpSink::connect(addr).map_err(|e| Failure::new(EXIT_REMOTE, format!("broker {addr}: {e}")))?;
            let client = BrokerClient::connect(addr).map_err(|e| Failure::new(EXIT_REMOTE, format!("broker {addr}: {e}")))?;
            let l = spawn_remote_control_listener(client, controls.clone(), stop.clone());
            // the console bridge still sees frames through the local hub
            (None, vec![Box::new(tcp), Box::new(HubSink::new(hub.clone()))], l)
        }
    };

    let scene = Arc::new(RenderScene::new(track, line));
    let session = new_session(&scene);
    let (source, pacing, clock): (Box<dyn FrameSource>, Pacing, _) = if a.autopilot {
        let ticks = ((100.0 / a.fps).round() as u32).max(1);
        let src = SimSource::autopilot(scene, session.clone(), config.width, config.height, ticks, a.laps);
        (Box::new(src), Pacing::Lockstep, None)
    } else {
        let clock = spawn_sim_clock(session.clone(), controls.clone(), stop.clone());
        (Box::new(SimSource::live(scene, session.clone(), config.width, config.height)), Pacing::Fixed { fps: a.fps }, Some(clock))
    };
    let hash = HashSink::new();
    sinks.push(Box::new(hash.clone()));
    let stylizer = a.style.stylizer();
    let opts = PipelineOptions::new(config).pacing(pacing).stylizer(stylizer);
    let pipeline = Pipeline::start(opts, source, sinks, controls).map_err(general)?;
    let pstop = pipeline.stop_flag();
    let watcher = {
        let stop = stop.clone();
        thread::spawn(move || {
            while !stop.load(Ordering::SeqCst) && !pstop.load(Ordering::SeqCst) {
                thread::sleep(Duration::from_millis(20));
            }
            pstop.store(true, Ordering::SeqCst);
        })
    };
    let report = pipeline.join();
    stop.store(true, Ordering::SeqCst);
    let _ = watcher.join();
    if let Some(c) = clock {
        let _ = c.join();
    }
    let _ = listener.join();
    let traj = session.lock().unwrap_or_else(|e| e.into_inner()).trajectory().clone();
    dio::write_trajectory(&a.trajectory, &traj).map_err(general)?;
    println!("frames={} sha256={}", hash.frames(), hash.hex_digest());
    eprintln!("{}", summary_line(&report));
    eprintln!("trajectory: {} samples -> {}", traj.len(), a.trajectory.display());
    Ok(())
}

fn summary_line(r: &PipelineReport) -> String {
    format!(
        "frames in={} out={} dropped={} passthrough={} fps={:.2} p99={:.1} ms",
        r.frames_in,
        r.frames_out,
        r.dropped,
        r.passthrough,
        r.output_fps(),
        r.snapshot.p99_ns as f64 / 1e6
    )
}

fn replay(a: ReplayArgs) -> Result<(), Failure> {
    let manifest = dio::load_manifest(&a.manifest).map_err(general)?;
    let config = a.style.config(a.fps);
    let pacing = match a.pacing {
        PacingArg::Fixed => Pacing::Fixed { fps: a.fps },
        PacingArg::Timestamps => Pacing::Timestamps,
        PacingArg::Lockstep => Pacing::Lockstep,
    };
    let hash = HashSink::new();
    let mut sinks: Vec<Box<dyn Sink>> = vec![Box::new(hash.clone())];
    if let Some(addr) = &a.broker {
        sinks.push(Box::new(TcpSink::connect(addr.as_str()).map_err(|e| Failure::new(EXIT_REMOTE, format!("broker {addr}: {e}")))?));
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(|e| general(format!("{}: {e}", dir.display())))?;
        sinks.push(Box::new(PpmSink { dir: dir.clone(), failed: false }));
    }
    let opts = PipelineOptions::new(config).pacing(pacing).stylizer(a.style.stylizer());
    let controls = Controls::new(opts.config.enhancement_enabled);
    let report = Pipeline::start(opts, Box::new(ReplaySource::new(manifest)), sinks, controls).map_err(general)?.join();
    if let Some(e) = report.source_error {
        return Err(general(e));
    }
    println!("frames={} sha256={}", hash.frames(), hash.hex_digest());
    eprintln!("{}", summary_line(&report));
    Ok(())
}

/// Writes styled frames as `<id>.ppm`. Stops writing after the first
/// failure, which is reported once.
struct PpmSink {
    dir: PathBuf,
    failed: bool,
}

impl Sink for PpmSink {
    fn publish(&mut self, out: &crate::pipeline::Output) {
        if self.failed {
            return;
        }
        let p = self.dir.join(format!("{:06}.ppm", out.styled.id()));
        if let Err(e) = dio::write_ppm(&p, &out.styled) {
            eprintln!("drive: {e}; no further frames written");
            self.failed = true;
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub frames: u64,
    pub width: u32,
    pub height: u32,
    pub stylizer: String,
    pub frames_out: u64,
    pub dropped: u64,
    pub achieved_fps: f64,
    pub p50_ms: Option<f64>,
    pub p95_ms: Option<f64>,
    pub p99_ms: Option<f64>,
    pub elapsed_s: f64,
}

pub fn bench_report(frames: u64, res: Resolution, stylizer: &str, r: &PipelineReport) -> BenchReport {
    let last = r.publish_ns.last().copied().unwrap_or(0);
    let ms = |ns: u64| (r.frames_out > 0).then_some(ns as f64 / 1e6);
    BenchReport {
        frames,
        width: res.width,
        height: res.height,
        stylizer: stylizer.into(),
        frames_out: r.frames_out,
        dropped: r.dropped,
        achieved_fps: if last > 0 { r.frames_out as f64 * 1e9 / last as f64 } else { 0.0 },
        p50_ms: ms(r.snapshot.p50_ns),
        p95_ms: ms(r.snapshot.p95_ns),
        p99_ms: ms(r.snapshot.p99_ns),
        elapsed_s: r.elapsed_ns as f64 / 1e9,
    }
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    let config = PipelineConfig { width: a.resolution.width, height: a.resolution.height, seed: a.seed, ..PipelineConfig::default() };
    config.validate().map_err(general)?;
    let stylizer = match a.stylizer {
        StylizerArg::Mock => Stylizer::Mock,
        StylizerArg::Remote => {
            let mut r = RemoteStylizer::new(a.worker.clone());
            r.connect().map_err(|e| Failure::new(EXIT_REMOTE, format!("worker {}: {e}", a.worker)))?;
            Stylizer::Remote(r)
        }
    };
    let name = stylizer.name();
    let started = Instant::now();
    let src = SyntheticSource::new(a.resolution.width, a.resolution.height, a.frames, config.target_fps);
    let opts = PipelineOptions::new(config).pacing(Pacing::Lockstep).stylizer(stylizer);
    let controls = Controls::new(true);
    let report = Pipeline::start(opts, Box::new(src), Vec::new(), controls).map_err(general)?.join();
    let mut out = bench_report(a.frames, a.resolution, name, &report);
    out.elapsed_s = started.elapsed().as_secs_f64();
    let text = serde_json::to_string_pretty(&out).map_err(general)? + "\n";
    match &a.report {
        Some(p) => fs::write(p, text).map_err(|e| general(format!("{}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let fail = |e: &dyn std::fmt::Display| Failure::new(EXIT_EVAL, e.to_string());
    let sessions = dio::load_sessions(&a.sessions).map_err(|e| fail(&e))?;
    let line = dio::load_racing_line(&a.racing_line).map_err(|e| fail(&e))?;
    let (track, _) = load_track_or_default(a.track.as_deref()).map_err(|e| fail(&e))?;
    let report = make_report(&sessions, &track.start_line(), &line, a.area_samples).map_err(|e| fail(&e))?;
    fs::write(&a.out, report.to_csv()).map_err(|e| fail(&format!("{}: {e}", a.out.display())))?;
    print!("{}", report.to_table());
    Ok(())
}

fn sample(a: SampleArgs) -> Result<(), Failure> {
    let manifest = dio::load_manifest(&a.manifest).map_err(general)?;
    let indices = drive_core::manifest::sample_indices(manifest.len(), a.k).map_err(general)?;
    fs::create_dir_all(&a.out).map_err(|e| general(format!("{}: {e}", a.out.display())))?;
    let base = PathBuf::from(&manifest.base_dir);
    let mut text = String::new();
    for &i in &indices {
        let e = &manifest.entries[i];
        let src = if Path::new(&e.path).is_absolute() { PathBuf::from(&e.path) } else { base.join(&e.path) };
        let name = format!("{i:06}_{}", src.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
        fs::copy(&src, a.out.join(&name)).map_err(|err| general(format!("{}: {err}", src.display())))?;
        text.push_str(&format!("{name}\t{}\n", e.ts_ns));
    }
    fs::write(a.out.join("manifest.tsv"), text).map_err(general)?;
    let list: Vec<String> = indices.iter().map(|i| i.to_string()).collect();
    println!("sampled {} of {}: {}", indices.len(), manifest.len(), list.join(","));
    Ok(())
}

fn worker_mock(a: WorkerArgs) -> Result<(), Failure> {
    let opts = WorkerOptions { delay: Duration::from_millis(a.delay_ms), ..WorkerOptions::default() };
    let w = Worker::bind(&a.listen, opts).map_err(|e| bind_error("worker", &a.listen, e))?;
    eprintln!("mock worker on {}", w.local_addr());
    wait_for(&stop_signal(a.duration));
    w.shutdown();
    Ok(())
}

fn broker(a: BrokerArgs) -> Result<(), Failure> {
    let hub = Hub::new();
    let b = Broker::bind(&a.listen, hub.clone()).map_err(|e| bind_error("broker", &a.listen, e))?;
    let console_addr = format!("127.0.0.1:{}", a.console_port);
    let _bridge = Bridge::bind(&console_addr, hub).map_err(|e| bind_error("console bridge", &console_addr, e))?;
    eprintln!("broker on {}, console bridge on {console_addr}", b.local_addr());
    wait_for(&stop_signal(a.duration));
    b.shutdown();
    Ok(())
}
