//! Flat-shaded ground-plane renderer.
//!
//! Each pixel casts a ray through its center onto the ground plane and takes
//! the color of the topmost layer there, which reproduces painter's order
//! sky, grass, asphalt, lane markings, arrows. Lane markings and arrows are
//! only drawn within [`MARKING_RANGE`] so distant paint does not alias into
//! sub-pixel speckle. The lane-marking mask is produced from the same
//! classification, so it is exactly the set of lane-white pixels.

use alloc::vec;
use alloc::vec::Vec;

use crate::frame::Frame;
use crate::geometry::{in_triangle, Segment, Vec2};
use crate::simworld::camera::{CameraIntrinsics, CameraMount, CameraPose};
use crate::simworld::track::{ArrowMarker, RacingLine, TrackModel, ARROW_FRONT};
use crate::simworld::vehicle::VehicleState;

pub const SKY: [u8; 3] = [135, 180, 235];
pub const GRASS: [u8; 3] = [70, 130, 60];
pub const ASPHALT: [u8; 3] = [90, 90, 90];
pub const LANE_WHITE: [u8; 3] = [240, 240, 240];
pub const ARROW_YELLOW: [u8; 3] = [235, 200, 40];

pub const MARKING_WIDTH: f64 = 0.15;
/// Paint is drawn up to this ground distance from the camera, meters.
pub const MARKING_RANGE: f64 = 40.0;
/// Ground beyond this distance renders as grass.
pub const GROUND_RANGE: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Sky,
    Grass,
    Asphalt,
    LaneMarking,
    Arrow,
}

impl Surface {
    pub fn color(self) -> [u8; 3] {
        match self {
            Surface::Sky => SKY,
            Surface::Grass => GRASS,
            Surface::Asphalt => ASPHALT,
            Surface::LaneMarking => LANE_WHITE,
            Surface::Arrow => ARROW_YELLOW,
        }
    }
}

/// Uniform bucket grid over items with an axis-aligned footprint. Each item
/// is registered in every cell its footprint (grown by `margin`) touches, so
/// a single-cell lookup returns every item within `margin` of the query.
#[derive(Debug, Clone)]
struct Grid {
    origin: Vec2,
    cell: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<u32>>,
}

impl Grid {
    fn build(boxes: &[(Vec2, Vec2)], cell: f64, margin: f64) -> Self {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (a, b) in boxes {
            lo = Vec2::new(lo.x.min(a.x), lo.y.min(a.y));
            hi = Vec2::new(hi.x.max(b.x), hi.y.max(b.y));
        }
        if boxes.is_empty() {
            lo = Vec2::ZERO;
            hi = Vec2::ZERO;
        }
        let origin = lo - Vec2::new(margin + cell, margin + cell);
        let cols = libm::ceil((hi.x - origin.x + margin + cell) / cell) as usize + 1;
        let rows = libm::ceil((hi.y - origin.y + margin + cell) / cell) as usize + 1;
        let mut cells = vec![Vec::new(); cols * rows];
        for (i, (a, b)) in boxes.iter().enumerate() {
            let c0 = ((a.x - margin - origin.x) / cell) as usize;
            let c1 = ((b.x + margin - origin.x) / cell) as usize;
            let r0 = ((a.y - margin - origin.y) / cell) as usize;
            let r1 = ((b.y + margin - origin.y) / cell) as usize;
            for r in r0..=r1.min(rows - 1) {
                for c in c0..=c1.min(cols - 1) {
                    cells[r * cols + c].push(i as u32);
                }
            }
        }
        Self { origin, cell, cols, rows, cells }
    }

    fn query(&self, p: Vec2) -> &[u32] {
        let cx = (p.x - self.origin.x) / self.cell;
        let cy = (p.y - self.origin.y) / self.cell;
        if cx < 0.0 || cy < 0.0 {
            return &[];
        }
        let (c, r) = (cx as usize, cy as usize);
        if c >= self.cols || r >= self.rows {
            return &[];
        }
        &self.cells[r * self.cols + c]
    }
}

/// Track plus racing line with spatial indices, built once per session.
#[derive(Debug, Clone)]
pub struct RenderScene {
    track: TrackModel,
    line: RacingLine,
    segments: Vec<Segment>,
    segment_grid: Grid,
    arrows: Vec<[Vec2; 3]>,
    arrow_grid: Grid,
}

fn bbox(points: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

impl RenderScene {
    pub fn new(track: TrackModel, line: RacingLine) -> Self {
        let segments: Vec<Segment> = track.centerline().windows(2).map(|w| Segment::new(w[0], w[1])).collect();
        let seg_boxes: Vec<_> = segments.iter().map(|s| bbox(&[s.a, s.b])).collect();
        let segment_grid = Grid::build(&seg_boxes, 10.0, track.half_width() + MARKING_WIDTH);
        let arrows: Vec<[Vec2; 3]> = line.arrows().iter().map(ArrowMarker::triangle).collect();
        let arrow_boxes: Vec<_> = arrows.iter().map(|t| bbox(t)).collect();
        let arrow_grid = Grid::build(&arrow_boxes, 4.0, 0.0);
        Self { track, line, segments, segment_grid, arrows, arrow_grid }
    }

    pub fn default_scene() -> Self {
        let track = TrackModel::default_track();
        let line = RacingLine::offset_heuristic(&track, crate::simworld::track::DEFAULT_ARROW_SPACING);
        Self::new(track, line)
    }

    pub fn track(&self) -> &TrackModel {
        &self.track
    }
    pub fn racing_line(&self) -> &RacingLine {
        &self.line
    }

    /// Distance to the centerline when it is within the indexed margin.
    fn centerline_distance(&self, p: Vec2) -> Option<f64> {
        self.segment_grid
            .query(p)
            .iter()
            .map(|&i| self.segments[i as usize].distance_to(p).0)
            .reduce(f64::min)
    }

    fn on_arrow(&self, p: Vec2) -> bool {
        self.arrow_grid.query(p).iter().any(|&i| {
            let [a, b, c] = self.arrows[i as usize];
            in_triangle(p, a, b, c)
        })
    }

    /// Surface at a ground point, `range` meters from the camera.
    pub fn surface_at(&self, p: Vec2, range: f64) -> Surface {
        if range > GROUND_RANGE {
            return Surface::Grass;
        }
        let paint = range <= MARKING_RANGE;
        if paint && range <= MARKING_RANGE + ARROW_FRONT && self.on_arrow(p) {
            return Surface::Arrow;
        }
        let hw = self.track.half_width();
        match self.centerline_distance(p) {
            Some(d) if paint && (d - hw).abs() <= MARKING_WIDTH / 2.0 => Surface::LaneMarking,
            Some(d) if d <= hw => Surface::Asphalt,
            _ => Surface::Grass,
        }
    }
}

/// Binary lane-marking mask, 255 where the frame shows lane paint.
pub type LaneMask = crate::conditioning::GrayImage;

/// Render the driver view and the exact lane-marking mask.
pub fn render_frame(
    scene: &RenderScene,
    state: &VehicleState,
    intr: &CameraIntrinsics,
    mount: &CameraMount,
    width: u32,
    height: u32,
    id: u64,
) -> (Frame, LaneMask) {
    let pose = CameraPose::from_vehicle(state, mount);
    let (w, h) = (width as usize, height as usize);
    let mut pixels = Vec::with_capacity(w * h * 3);
    let mut mask = vec![0u8; w * h];
    let cam = Vec2::new(state.x, state.y);
    for j in 0..h {
        for i in 0..w {
            let surface = match pose.ground_point(intr, i as f64 + 0.5, j as f64 + 0.5) {
                None => Surface::Sky,
                Some(g) => scene.surface_at(g, g.dist(cam)),
            };
            if surface == Surface::LaneMarking {
                mask[j * w + i] = 255;
            }
            pixels.extend_from_slice(&surface.color());
        }
    }
    let frame = Frame::rgb(id, state.t_ns, width, height, pixels, "sim").expect("render buffer matches dimensions");
    (frame, LaneMask::new(width, height, mask))
}

/// Boundary pixels of a binary mask: set pixels with at least one unset
/// 4-neighbor (the image border counts as unset).
pub fn mask_boundary(mask: &LaneMask) -> Vec<(usize, usize)> {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let set = |x: isize, y: isize| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && mask.get(x as usize, y as usize) == 255;
    let mut out = Vec::new();
    for y in 0..h as isize {
        for x in 0..w as isize {
            if set(x, y) && !(set(x - 1, y) && set(x + 1, y) && set(x, y - 1) && set(x, y + 1)) {
                out.push((x as usize, y as usize));
            }
        }
    }
    out
}
