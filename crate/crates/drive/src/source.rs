//! Frame sources feeding the pipeline pump.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use drive_core::evaluation::directed_crossings;
use drive_core::frame::Frame;
use drive_core::geometry::{Segment, Vec2};
use drive_core::manifest::FrameManifest;
use drive_core::simworld::{
    render_frame, CameraIntrinsics, CameraMount, PurePursuit, RenderScene, SimSession, VehicleState, TICK_NS,
};

use crate::io::{read_ppm, IoError};
use crate::pipeline::Controls;

pub trait FrameSource: Send {
    /// Next frame, or `None` once the source is exhausted.
    fn next_frame(&mut self) -> Result<Option<Frame>, IoError>;
}

/// PPM frames listed in a replay manifest. Frame ids are 1-based manifest
/// positions; timestamps come from the manifest.
pub struct ReplaySource {
    manifest: FrameManifest,
    base: PathBuf,
    next: usize,
}

impl ReplaySource {
    pub fn new(manifest: FrameManifest) -> Self {
        let base = PathBuf::from(&manifest.base_dir);
        Self { manifest, base, next: 0 }
    }

    pub fn len(&self) -> usize {
        self.manifest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.is_empty()
    }
}

impl FrameSource for ReplaySource {
    fn next_frame(&mut self) -> Result<Option<Frame>, IoError> {
        let Some(e) = self.manifest.entries.get(self.next) else { return Ok(None) };
        self.next += 1;
        let path = resolve(&self.base, &e.path);
        read_ppm(&path, self.next as u64, e.ts_ns, "replay").map(Some)
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Deterministic moving test pattern: diagonal gradient, a sliding bright
/// bar and a fixed checker block, so edge maps are never empty.
pub struct SyntheticSource {
    width: u32,
    height: u32,
    count: u64,
    period_ns: u64,
    next: u64,
}

impl SyntheticSource {
    pub fn new(width: u32, height: u32, count: u64, fps: f64) -> Self {
        let period_ns = if fps > 0.0 { (1e9 / fps).round() as u64 } else { 0 };
        Self { width, height, count, period_ns, next: 0 }
    }
}

pub fn synthetic_frame(id: u64, ts_ns: u64, width: u32, height: u32) -> Frame {
    let (w, h) = (width as u64, height as u64);
    let bar = (id * 7) % w.max(1);
    let mut px = Vec::with_capacity((w * h * 3) as usize);
    for y in 0..h {
        for x in 0..w {
            let g = ((x + y) * 255 / (w + h).max(1)) as u8;
            let rgb = if x >= bar && x < bar + w / 16 + 1 {
                [250, 250, 250]
            } else if (x * 8 / w.max(1) + y * 6 / h.max(1)) % 2 == 0 && y > h / 2 {
                [30, 30, 30]
            } else {
                [g, 255 - g, (g / 2).wrapping_add((id % 64) as u8)]
            };
            px.extend_from_slice(&rgb);
        }
    }
    Frame::rgb(id, ts_ns, width, height, px, "synthetic").expect("pattern matches dimensions")
}

impl FrameSource for SyntheticSource {
    fn next_frame(&mut self) -> Result<Option<Frame>, IoError> {
        if self.next >= self.count {
            return Ok(None);
        }
        let i = self.next;
        self.next += 1;
        Ok(Some(synthetic_frame(i + 1, i * self.period_ns, self.width, self.height)))
    }
}

pub type SimHandle = Arc<Mutex<SimSession>>;

/// Camera view of a simulation session.
pub struct SimSource {
    scene: Arc<RenderScene>,
    session: SimHandle,
    intr: CameraIntrinsics,
    mount: CameraMount,
    width: u32,
    height: u32,
    next_id: u64,
    autopilot: Option<Autopilot>,
}

/// Lockstep driver: advances the session a fixed number of ticks per frame
/// and ends the source after the requested number of start-line crossings.
struct Autopilot {
    driver: PurePursuit,
    ticks_per_frame: u32,
    start_line: Segment,
    laps: usize,
    crossings: usize,
}

impl SimSource {
    /// Renders whatever state the session holds; something else advances it
    /// (see [`spawn_sim_clock`]).
    pub fn live(scene: Arc<RenderScene>, session: SimHandle, width: u32, height: u32) -> Self {
        Self {
            scene,
            session,
            intr: CameraIntrinsics::for_resolution(width, height),
            mount: CameraMount::default(),
            width,
            height,
            next_id: 1,
            autopilot: None,
        }
    }

    /// Pure-pursuit autopilot along the scene's racing line, `ticks_per_frame`
    /// simulation ticks between frames, finishing after `laps` crossings.
    pub fn autopilot(scene: Arc<RenderScene>, session: SimHandle, width: u32, height: u32, ticks_per_frame: u32, laps: usize) -> Self {
        let driver = PurePursuit::new(scene.racing_line().points());
        let start_line = scene.track().start_line();
        let mut s = Self::live(scene, session, width, height);
        s.autopilot = Some(Autopilot { driver, ticks_per_frame: ticks_per_frame.max(1), start_line, laps, crossings: 0 });
        s
    }

    pub fn session(&self) -> &SimHandle {
        &self.session
    }
}

impl FrameSource for SimSource {
    fn next_frame(&mut self) -> Result<Option<Frame>, IoError> {
        let state = {
            let mut s = self.session.lock().unwrap_or_else(|e| e.into_inner());
            if let Some(ap) = self.autopilot.as_mut() {
                if ap.crossings >= ap.laps {
                    return Ok(None);
                }
                for _ in 0..ap.ticks_per_frame {
                    let before = *s.state();
                    let input = ap.driver.control(&before);
                    s.set_input(input);
                    let after = *s.tick();
                    let seg = [Vec2::new(before.x, before.y), Vec2::new(after.x, after.y)];
                    ap.crossings += directed_crossings(&seg, &ap.start_line).len();
                    if ap.crossings >= ap.laps {
                        break;
                    }
                }
            }
            *s.state()
        };
        let id = self.next_id;
        self.next_id += 1;
        let (frame, _) = render_frame(&self.scene, &state, &self.intr, &self.mount, self.width, self.height, id);
        Ok(Some(frame))
    }
}

/// Session at the track's start pose, at rest.
pub fn new_session(scene: &RenderScene) -> SimHandle {
    let (p, heading) = scene.track().start_pose();
    Arc::new(Mutex::new(SimSession::new(VehicleState::at(p.x, p.y, heading, 0.0))))
}

/// Advance `session` in real time, one tick per 10 ms, sampling the driver
/// input from `controls` once per tick.
pub fn spawn_sim_clock(session: SimHandle, controls: Arc<Controls>, stop: Arc<AtomicBool>) -> JoinHandle<()> {
    thread::Builder::new()
        .name("sim-clock".into())
        .spawn(move || {
            let tick = Duration::from_nanos(TICK_NS);
            let mut next = Instant::now() + tick;
            while !stop.load(Ordering::SeqCst) {
                let now = Instant::now();
                if now < next {
                    thread::sleep(next - now);
                }
                next += tick;
                let mut s = session.lock().unwrap_or_else(|e| e.into_inner());
                s.set_input(controls.drive_input());
                s.tick();
            }
        })
        .expect("spawn sim clock")
}
