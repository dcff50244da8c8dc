//! Closed track geometry and the racing line drawn on it.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::geometry::{cumulative_lengths, polyline_length, segments_intersect, Segment, Vec2};

/// Two miles in meters.
pub const TWO_MILES_M: f64 = 3218.69;
pub const DEFAULT_HALF_WIDTH: f64 = 6.0;
pub const DEFAULT_ARROW_SPACING: f64 = 10.0;
pub const DEFAULT_CURVE_RADIUS: f64 = 200.0;

#[derive(Debug, Clone, PartialEq)]
pub enum TrackError {
    TooFewPoints,
    NotClosed,
    HalfWidth(f64),
    SelfIntersecting { a: usize, b: usize },
    NonFinite,
    LineOutsideTrack { index: usize, distance: f64 },
}

impl fmt::Display for TrackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrackError::TooFewPoints => f.write_str("centerline needs at least 4 points"),
            TrackError::NotClosed => f.write_str("centerline must be closed (first point == last point)"),
            TrackError::HalfWidth(w) => write!(f, "half width must be positive, got {w}"),
            TrackError::SelfIntersecting { a, b } => write!(f, "centerline segments {a} and {b} intersect"),
            TrackError::NonFinite => f.write_str("coordinates must be finite"),
            TrackError::LineOutsideTrack { index, distance } => {
                write!(f, "racing line point {index} lies {distance:.2} m from the centerline, outside the track")
            }
        }
    }
}

impl core::error::Error for TrackError {}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackModel {
    centerline: Vec<Vec2>,
    half_width: f64,
    start_line: Segment,
    length: f64,
}

impl TrackModel {
    pub fn new(centerline: Vec<Vec2>, half_width: f64, start_line: Segment) -> Result<Self, TrackError> {
        if centerline.len() < 4 {
            return Err(TrackError::TooFewPoints);
        }
        let finite = |p: &Vec2| p.x.is_finite() && p.y.is_finite();
        if !centerline.iter().all(finite) || !finite(&start_line.a) || !finite(&start_line.b) {
            return Err(TrackError::NonFinite);
        }
        if centerline.first() != centerline.last() {
            return Err(TrackError::NotClosed);
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(TrackError::HalfWidth(half_width));
        }
        let n = centerline.len() - 1;
        for i in 0..n {
            for j in i + 2..n {
                // first and last segments share the closing vertex
                if i == 0 && j == n - 1 {
                    continue;
                }
                if segments_intersect(centerline[i], centerline[i + 1], centerline[j], centerline[j + 1]) {
                    return Err(TrackError::SelfIntersecting { a: i, b: j });
                }
            }
        }
        let length = polyline_length(&centerline);
        Ok(Self { centerline, half_width, start_line, length })
    }

    /// Stadium course traversed counter-clockwise: two straights joined by
    /// semicircles, starting at `(0, -radius)` heading `+x`. The start line
    /// crosses the bottom straight at `x = 0`; a crossing in `+x` is forward.
    pub fn stadium(straight: f64, radius: f64, half_width: f64, spacing: f64) -> Result<Self, TrackError> {
        let mut pts = Vec::new();
        let half = straight / 2.0;
        let line = |pts: &mut Vec<Vec2>, a: Vec2, b: Vec2| {
            let n = libm::ceil(a.dist(b) / spacing).max(1.0) as usize;
            for i in 0..n {
                pts.push(a.lerp(b, i as f64 / n as f64));
            }
        };
        let arc = |pts: &mut Vec<Vec2>, c: Vec2, from: f64| {
            let n = libm::ceil(PI * radius / spacing).max(2.0) as usize;
            for i in 0..n {
                let t = from + PI * i as f64 / n as f64;
                pts.push(c + Vec2::from_angle(t) * radius);
            }
        };
        line(&mut pts, Vec2::new(0.0, -radius), Vec2::new(half, -radius));
        arc(&mut pts, Vec2::new(half, 0.0), -PI / 2.0);
        line(&mut pts, Vec2::new(half, radius), Vec2::new(-half, radius));
        arc(&mut pts, Vec2::new(-half, 0.0), PI / 2.0);
        line(&mut pts, Vec2::new(-half, -radius), Vec2::new(0.0, -radius));
        pts.push(pts[0]);
        let reach = half_width + 2.0;
        let start = Segment::new(Vec2::new(0.0, -radius + reach), Vec2::new(0.0, -radius - reach));
        Self::new(pts, half_width, start)
    }

    /// Stadium scaled so the centerline is two miles long.
    pub fn default_track() -> Self {
        let r = DEFAULT_CURVE_RADIUS;
        let straight = (TWO_MILES_M - 2.0 * PI * r) / 2.0;
        Self::stadium(straight, r, DEFAULT_HALF_WIDTH, 5.0).expect("default stadium is valid")
    }

    pub fn centerline(&self) -> &[Vec2] {
        &self.centerline
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn start_line(&self) -> Segment {
        self.start_line
    }
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Distance from `p` to the centerline (brute force over segments).
    pub fn distance_to_centerline(&self, p: Vec2) -> f64 {
        self.centerline
            .windows(2)
            .map(|w| Segment::new(w[0], w[1]).distance_to(p).0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.distance_to_centerline(p) <= self.half_width
    }

    /// Pose at the start of the centerline, facing along it.
    pub fn start_pose(&self) -> (Vec2, f64) {
        let a = self.centerline[0];
        (a, (self.centerline[1] - a).angle())
    }
}

/// A racing-line arrow painted on the asphalt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrowMarker {
    pub position: Vec2,
    pub heading: f64,
}

pub const ARROW_FRONT: f64 = 1.2;
pub const ARROW_BACK: f64 = 0.8;
pub const ARROW_HALF_WIDTH: f64 = 0.5;

impl ArrowMarker {
    /// Triangle vertices: tip, back-left, back-right.
    pub fn triangle(&self) -> [Vec2; 3] {
        let f = Vec2::from_angle(self.heading);
        let l = f.perp();
        [
            self.position + f * ARROW_FRONT,
            self.position - f * ARROW_BACK + l * ARROW_HALF_WIDTH,
            self.position - f * ARROW_BACK - l * ARROW_HALF_WIDTH,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RacingLine {
    points: Vec<Vec2>,
    arrows: Vec<ArrowMarker>,
}

impl RacingLine {
    /// Racing line through `points` with arrows every `spacing` meters.
    pub fn from_points(points: Vec<Vec2>, spacing: f64) -> Self {
        let arrows = place_arrows(&points, spacing);
        Self { points, arrows }
    }

    /// Centerline shifted toward the inside of each bend by up to half the
    /// half-width, in proportion to the locally averaged curvature.
    pub fn offset_heuristic(track: &TrackModel, spacing: f64) -> Self {
        let c = track.centerline();
        let n = c.len() - 1;
        let prev = |i: usize| c[(i + n - 1) % n];
        let next = |i: usize| c[(i + 1) % n];
        // signed curvature, positive when turning left
        let kappa: Vec<f64> = (0..n)
            .map(|i| {
                let (a, b, d) = (prev(i), c[i], next(i));
                let turn = libm::atan2((b - a).cross(d - b), (b - a).dot(d - b));
                let len = (a.dist(b) + b.dist(d)) / 2.0;
                if len > 0.0 { turn / len } else { 0.0 }
            })
            .collect();
        let avg_len = track.length() / n as f64;
        let half_window = libm::ceil(30.0 / avg_len.max(1e-9)) as isize;
        let smoothed: Vec<f64> = (0..n as isize)
            .map(|i| {
                let sum: f64 = (-half_window..=half_window).map(|k| kappa[(i + k).rem_euclid(n as isize) as usize]).sum();
                sum / (2 * half_window + 1) as f64
            })
            .collect();
        let max_offset = 0.5 * track.half_width();
        let mut pts: Vec<Vec2> = (0..n)
            .map(|i| {
                let tangent = (next(i) - prev(i)).normalized();
                let offset = max_offset * (smoothed[i] * 250.0).clamp(-1.0, 1.0);
                c[i] + tangent.perp() * offset
            })
            .collect();
        pts.push(pts[0]);
        Self::from_points(pts, spacing)
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }
    pub fn arrows(&self) -> &[ArrowMarker] {
        &self.arrows
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.points)
    }

    pub fn check_within(&self, track: &TrackModel) -> Result<(), TrackError> {
        for (index, p) in self.points.iter().enumerate() {
            let distance = track.distance_to_centerline(*p);
            if distance > track.half_width() {
                return Err(TrackError::LineOutsideTrack { index, distance });
            }
        }
        Ok(())
    }
}

fn place_arrows(points: &[Vec2], spacing: f64) -> Vec<ArrowMarker> {
    let mut out = Vec::new();
    if points.len() < 2 || !(spacing > 0.0) {
        return out;
    }
    let cum = cumulative_lengths(points);
    let total = cum[cum.len() - 1];
    let mut seg = 0;
    let mut s = 0.0;
    while s < total {
        while seg + 2 < cum.len() && cum[seg + 1] <= s {
            seg += 1;
        }
        let (a, b) = (points[seg], points[seg + 1]);
        let l = cum[seg + 1] - cum[seg];
        if l > 0.0 {
            let t = (s - cum[seg]) / l;
            out.push(ArrowMarker { position: a.lerp(b, t), heading: (b - a).angle() });
        }
        s += spacing;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn default_track_is_two_miles() {
        let t = TrackModel::default_track();
        assert!((t.length() - 3219.0).abs() / 3219.0 < 0.01, "{}", t.length());
        assert_eq!(t.centerline().first(), t.centerline().last());
    }

    #[test]
    fn stadium_runs_counter_clockwise() {
        let t = TrackModel::stadium(100.0, 30.0, 5.0, 2.0).unwrap();
        let area = crate::geometry::shoelace(&t.centerline()[..t.centerline().len() - 1]);
        assert!(area > 0.0);
    }

    #[test]
    fn invalid_tracks() {
        let sq = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
        let start = Segment::new(Vec2::ZERO, Vec2::new(0.0, 1.0));
        assert_eq!(TrackModel::new(sq.clone(), 1.0, start).unwrap_err(), TrackError::NotClosed);
        let mut closed = sq.clone();
        closed.push(sq[0]);
        assert_eq!(TrackModel::new(closed.clone(), 0.0, start).unwrap_err(), TrackError::HalfWidth(0.0));
        TrackModel::new(closed, 0.2, start).unwrap();
        let bowtie = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(0.0, 0.0)];
        assert!(matches!(TrackModel::new(bowtie, 0.1, start).unwrap_err(), TrackError::SelfIntersecting { .. }));
    }

    #[test]
    fn racing_line_stays_on_asphalt_and_cuts_inside() {
        let t = TrackModel::default_track();
        let rl = RacingLine::offset_heuristic(&t, DEFAULT_ARROW_SPACING);
        rl.check_within(&t).unwrap();
        // on the right-hand bend the line sits inside the centerline radius
        let mid_bend = rl.points().iter().copied().filter(|p| p.x > 600.0).map(|p| (p - Vec2::new(490.5, 0.0)).norm());
        assert!(mid_bend.fold(f64::INFINITY, f64::min) < 198.0);
        for a in rl.arrows() {
            for v in a.triangle() {
                assert!(t.distance_to_centerline(v) < t.half_width() - 0.5);
            }
        }
    }

    #[test]
    fn arrows_are_evenly_spaced_and_ordered() {
        let pts = vec![Vec2::new(0.0, 0.0), Vec2::new(35.0, 0.0)];
        let rl = RacingLine::from_points(pts, 10.0);
        let xs: Vec<f64> = rl.arrows().iter().map(|a| a.position.x).collect();
        assert_eq!(xs, vec![0.0, 10.0, 20.0, 30.0]);
    }
}
