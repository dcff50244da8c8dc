//! Planar geometry in meters.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use crate::math::KahanSum;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            Vec2::new(self.x / n, self.y / n)
        }
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        Vec2::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    pub fn from_angle(theta: f64) -> Vec2 {
        Vec2::new(libm::cos(theta), libm::sin(theta))
    }

    pub fn angle(self) -> f64 {
        libm::atan2(self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(p: [f64; 2]) -> Self {
        Vec2::new(p[0], p[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(p: Vec2) -> Self {
        [p.x, p.y]
    }
}

/// A directed segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    /// Distance from `p` to the closest point of the segment, plus the
    /// parameter of that point in `[0, 1]`.
    pub fn distance_to(&self, p: Vec2) -> (f64, f64) {
        let d = self.b - self.a;
        let len2 = d.dot(d);
        let t = if len2 == 0.0 {
            0.0
        } else {
            ((p - self.a).dot(d) / len2).clamp(0.0, 1.0)
        };
        (p.dist(self.a + d * t), t)
    }
}

/// Total length of a polyline.
pub fn polyline_length(points: &[Vec2]) -> f64 {
    points
        .windows(2)
        .map(|w| w[0].dist(w[1]))
        .collect::<KahanSum>()
        .total()
}

/// Cumulative arc length at every vertex (first entry 0).
pub fn cumulative_lengths(points: &[Vec2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in points.windows(2) {
        acc += w[0].dist(w[1]);
        out.push(acc);
    }
    out
}

/// Resample a polyline to `n` points spaced uniformly by arc length. The
/// first and last points are reproduced exactly. Returns `None` for fewer
/// than two input points, `n < 2`, or a zero-length curve.
pub fn resample_uniform(points: &[Vec2], n: usize) -> Option<Vec<Vec2>> {
    if points.len() < 2 || n < 2 {
        return None;
    }
    let cum = cumulative_lengths(points);
    let total = *cum.last()?;
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for i in 0..n {
        if i == n - 1 {
            out.push(*points.last()?);
            break;
        }
        let s = total * (i as f64) / ((n - 1) as f64);
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        // skip zero-length segments
        while seg + 2 < cum.len() && cum[seg + 1] - cum[seg] == 0.0 {
            seg += 1;
        }
        let l = cum[seg + 1] - cum[seg];
        let t = if l > 0.0 { ((s - cum[seg]) / l).clamp(0.0, 1.0) } else { 0.0 };
        out.push(points[seg].lerp(points[seg + 1], t));
    }
    Some(out)
}

/// Signed area of a simple polygon (counter-clockwise positive), computed
/// relative to its first vertex.
pub fn shoelace(poly: &[Vec2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let o = poly[0];
    let mut acc = KahanSum::new();
    for i in 0..poly.len() {
        let p = poly[i] - o;
        let q = poly[(i + 1) % poly.len()] - o;
        acc.add(p.cross(q));
    }
    acc.total() / 2.0
}

/// Point-in-triangle test (inclusive of edges).
pub fn in_triangle(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> bool {
    let d1 = (b - a).cross(p - a);
    let d2 = (c - b).cross(p - b);
    let d3 = (a - c).cross(p - c);
    let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(has_neg && has_pos)
}

/// Proper or touching intersection of segments `p1p2` and `q1q2`.
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
        (b - a).cross(c - a)
    }
    fn on_seg(a: Vec2, b: Vec2, p: Vec2) -> bool {
        p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    }
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_seg(q1, q2, p1))
        || (d2 == 0.0 && on_seg(q1, q2, p2))
        || (d3 == 0.0 && on_seg(p1, p2, q1))
        || (d4 == 0.0 && on_seg(p1, p2, q2))
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut r = libm::fmod(a + core::f64::consts::PI, two_pi);
    if r < 0.0 {
        r += two_pi;
    }
    let out = r - core::f64::consts::PI;
    if out <= -core::f64::consts::PI {
        out + two_pi
    } else {
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn resample_keeps_endpoints_and_spacing() {
        let pts = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)];
        let r = resample_uniform(&pts, 5).unwrap();
        assert_eq!(r[0], pts[0]);
        assert_eq!(r[4], pts[2]);
        assert!((r[2].x - 1.0).abs() < 1e-12 && r[2].y.abs() < 1e-12);
        assert!(resample_uniform(&[Vec2::ZERO, Vec2::ZERO], 4).is_none());
    }

    #[test]
    fn shoelace_unit_square() {
        let sq = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
        assert_eq!(shoelace(&sq), 1.0);
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * core::f64::consts::PI) - core::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn intersections() {
        let o = Vec2::ZERO;
        assert!(segments_intersect(o, Vec2::new(2.0, 2.0), Vec2::new(0.0, 2.0), Vec2::new(2.0, 0.0)));
        assert!(!segments_intersect(o, Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 1.0)));
    }
}
