//! Driving-task metrics: lap splitting, discrete Fréchet distance, area
//! between curves, speed statistics and per-condition reports.
//!
//! Standard deviations are population deviations. Report rows aggregate one
//! value per session (its scoring lap), so `std` is the spread across
//! sessions.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write};

use crate::geometry::{resample_uniform, shoelace, Segment, Vec2};
use crate::math::mean_std;
use crate::simworld::session::{Trajectory, TrajectorySample};

pub const DEFAULT_AREA_SAMPLES: usize = 200;
pub const MPS_TO_KMH: f64 = 3.6;

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    IncompleteSession { crossings: usize },
    EmptyInput,
    DegenerateCurve,
    EmptyLap,
    MissingCondition(Condition),
    Session { id: String, source: alloc::boxed::Box<EvalError> },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::IncompleteSession { crossings } => {
                write!(f, "incomplete session: {crossings} start-line crossing(s), need 2")
            }
            EvalError::EmptyInput => f.write_str("empty polyline"),
            EvalError::DegenerateCurve => f.write_str("degenerate zero-length curve"),
            EvalError::EmptyLap => f.write_str("empty lap"),
            EvalError::MissingCondition(c) => write!(f, "no sessions for condition {c}"),
            EvalError::Session { id, source } => write!(f, "session {id}: {source}"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Study condition: A with enhancement, B passthrough.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    A,
    B,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::A => "A",
            Condition::B => "B",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "A" | "a" => Some(Condition::A),
            "B" | "b" => Some(Condition::B),
            _ => None,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Laps between directed start-line crossings. The first lap runs from the
/// start of the recording to the first crossing and is the warmup lap.
/// Adjacent laps share their boundary sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LapSet {
    pub laps: Vec<Trajectory>,
    pub warmup_excluded: bool,
    /// Index of the first sample at or past the line, per crossing.
    pub crossings: Vec<usize>,
}

impl LapSet {
    /// The lap that is scored: the one after the warmup.
    pub fn scoring_lap(&self) -> Option<&Trajectory> {
        self.laps.get(if self.warmup_excluded { 1 } else { 0 })
    }
}

/// Signed distance of `p` from the start line's supporting line, positive on
/// the forward side (left normal of `b - a`).
fn line_side(line: &Segment, p: Vec2) -> f64 {
    (line.b - line.a).perp().dot(p - line.a)
}

/// Indices `i + 1` where the path goes from strictly behind the start line
/// to on-or-ahead of it, through the segment itself.
pub fn directed_crossings(points: &[Vec2], line: &Segment) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..points.len().saturating_sub(1) {
        let (p, q) = (points[i], points[i + 1]);
        let (sp, sq) = (line_side(line, p), line_side(line, q));
        if !(sp < 0.0 && sq >= 0.0) {
            continue;
        }
        // where the step meets the supporting line, as a fraction along it
        let t = sp / (sp - sq);
        let hit = p.lerp(q, t);
        let d = line.b - line.a;
        let u = (hit - line.a).dot(d) / d.dot(d);
        if (0.0..=1.0).contains(&u) {
            out.push(i + 1);
        }
    }
    out
}

pub fn split_laps(traj: &Trajectory, start_line: &Segment) -> Result<LapSet, EvalError> {
    let points = traj.points();
    let crossings = directed_crossings(&points, start_line);
    if crossings.len() < 2 {
        return Err(EvalError::IncompleteSession { crossings: crossings.len() });
    }
    let s = traj.samples();
    let mut laps = Vec::with_capacity(crossings.len());
    let mut begin = 0usize;
    for &c in &crossings {
        let lap: Vec<TrajectorySample> = s[begin..=c].to_vec();
        laps.push(Trajectory::from_samples(lap).expect("sub-range of an ordered trajectory"));
        begin = c;
    }
    Ok(LapSet { laps, warmup_excluded: true, crossings })
}

/// Euclidean distance as `sqrt(dx² + dy²)`.
#[inline]
pub fn point_distance(a: Vec2, b: Vec2) -> f64 {
    let (dx, dy) = (a.x - b.x, a.y - b.y);
    libm::sqrt(dx * dx + dy * dy)
}

/// Discrete Fréchet distance by dynamic programming with a single rolling
/// row over the shorter input.
pub fn discrete_frechet(p: &[Vec2], q: &[Vec2]) -> Result<f64, EvalError> {
    if p.is_empty() || q.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    // distance is symmetric, so iterate rows over the longer sequence
    let (long, short) = if p.len() >= q.len() { (p, q) } else { (q, p) };
    let mut row: Vec<f64> = Vec::with_capacity(short.len());
    let mut acc = f64::NEG_INFINITY;
    for &s in short {
        acc = acc.max(point_distance(long[0], s));
        row.push(acc);
    }
    for &a in &long[1..] {
        // diag holds c(i-1, j-1) as the row is overwritten left to right
        let mut diag = row[0];
        row[0] = row[0].max(point_distance(a, short[0]));
        for j in 1..short.len() {
            let up = row[j];
            let best = diag.min(up).min(row[j - 1]);
            diag = up;
            row[j] = best.max(point_distance(a, short[j]));
        }
    }
    Ok(row[short.len() - 1])
}

/// Area between two curves: both are resampled to `n` points by arc length
/// and the absolute areas of the quads `(Pᵢ, Pᵢ₊₁, Qᵢ₊₁, Qᵢ)` are summed.
pub fn area_between(p: &[Vec2], q: &[Vec2], n: usize) -> Result<f64, EvalError> {
    if p.len() < 2 || q.len() < 2 || n < 2 {
        return Err(EvalError::EmptyInput);
    }
    let rp = resample_uniform(p, n).ok_or(EvalError::DegenerateCurve)?;
    let rq = resample_uniform(q, n).ok_or(EvalError::DegenerateCurve)?;
    let mut total = crate::math::KahanSum::new();
    for i in 0..n - 1 {
        total.add(libm::fabs(shoelace(&[rp[i], rp[i + 1], rq[i + 1], rq[i]])));
    }
    Ok(total.total())
}

/// Mean and population std of scoring-lap speeds, km/h.
pub fn speed_stats(laps: &LapSet) -> Result<(f64, f64), EvalError> {
    let lap = laps.scoring_lap().ok_or(EvalError::EmptyLap)?;
    let speeds: Vec<f64> = lap.samples().iter().map(|s| s.speed * MPS_TO_KMH).collect();
    mean_std(&speeds).ok_or(EvalError::EmptyLap)
}

/// Closed racing line re-threaded to start at the vertex nearest `from`, so
/// it is traversed in the same phase as a lap that starts there.
pub fn align_closed_line(line: &[Vec2], from: Vec2) -> Vec<Vec2> {
    let mut pts = line.to_vec();
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.is_empty() {
        return pts;
    }
    let k = (0..pts.len())
        .min_by(|&a, &b| point_distance(pts[a], from).total_cmp(&point_distance(pts[b], from)))
        .unwrap_or(0);
    pts.rotate_left(k);
    pts.push(pts[0]);
    pts
}

/// Per-session metrics over the scoring lap.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionMetrics {
    pub id: String,
    pub condition: Condition,
    pub frechet_m: f64,
    pub area_m2: f64,
    pub speed_mean_kmh: f64,
    pub speed_sd_kmh: f64,
}

pub fn session_metrics(
    id: &str,
    condition: Condition,
    traj: &Trajectory,
    start_line: &Segment,
    racing_line: &[Vec2],
    area_samples: usize,
) -> Result<SessionMetrics, EvalError> {
    let wrap = |e: EvalError| EvalError::Session { id: id.to_string(), source: alloc::boxed::Box::new(e) };
    let laps = split_laps(traj, start_line).map_err(wrap)?;
    let lap = laps.scoring_lap().ok_or(EvalError::EmptyLap).map_err(wrap)?;
    let pts = lap.points();
    let reference = align_closed_line(racing_line, pts[0]);
    let frechet_m = discrete_frechet(&pts, &reference).map_err(wrap)?;
    let area_m2 = area_between(&pts, &reference, area_samples).map_err(wrap)?;
    let (speed_mean_kmh, speed_sd_kmh) = speed_stats(&laps).map_err(wrap)?;
    Ok(SessionMetrics { id: id.to_string(), condition, frechet_m, area_m2, speed_mean_kmh, speed_sd_kmh })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values).unwrap_or((0.0, 0.0));
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub n_participants: usize,
    pub frechet_m: Stat,
    pub area_m2: Stat,
    pub speed_kmh: Stat,
    /// Within-lap speed std, aggregated across sessions.
    pub speed_sd_kmh: Stat,
}

impl ConditionSummary {
    fn rows(&self) -> [(&'static str, Stat); 4] {
        [
            ("frechet_m", self.frechet_m),
            ("area_m2", self.area_m2),
            ("speed_kmh", self.speed_kmh),
            ("speed_sd_kmh", self.speed_sd_kmh),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub conditions: Vec<ConditionSummary>,
    pub sessions: Vec<SessionMetrics>,
}

/// One recorded drive.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub condition: Condition,
    pub trajectory: Trajectory,
}

pub fn make_report(
    sessions: &[Session],
    start_line: &Segment,
    racing_line: &[Vec2],
    area_samples: usize,
) -> Result<EvalReport, EvalError> {
    let metrics = sessions
        .iter()
        .map(|s| session_metrics(&s.id, s.condition, &s.trajectory, start_line, racing_line, area_samples))
        .collect::<Result<Vec<_>, _>>()?;
    let mut conditions = Vec::new();
    for c in [Condition::A, Condition::B] {
        let group: Vec<&SessionMetrics> = metrics.iter().filter(|m| m.condition == c).collect();
        if group.is_empty() {
            return Err(EvalError::MissingCondition(c));
        }
        let col = |f: fn(&SessionMetrics) -> f64| Stat::of(&group.iter().map(|m| f(m)).collect::<Vec<_>>());
        conditions.push(ConditionSummary {
            condition: c,
            n_participants: group.len(),
            frechet_m: col(|m| m.frechet_m),
            area_m2: col(|m| m.area_m2),
            speed_kmh: col(|m| m.speed_mean_kmh),
            speed_sd_kmh: col(|m| m.speed_sd_kmh),
        });
    }
    Ok(EvalReport { conditions, sessions: metrics })
}

impl EvalReport {
    pub fn condition(&self, c: Condition) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|s| s.condition == c)
    }

    /// `condition,metric,mean,std` with shortest round-trip floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,metric,mean,std\n");
        for c in &self.conditions {
            for (name, s) in c.rows() {
                let _ = writeln!(out, "{},{},{:?},{:?}", c.condition, name, s.mean, s.std);
            }
        }
        out
    }

    /// Aligned plain-text table, two decimals.
    pub fn to_table(&self) -> String {
        let header = ["condition", "n", "metric", "mean", "std"];
        let mut rows: Vec<[String; 5]> = Vec::new();
        for c in &self.conditions {
            for (name, s) in c.rows() {
                rows.push([
                    c.condition.to_string(),
                    c.n_participants.to_string(),
                    name.to_string(),
                    format!("{:.2}", s.mean),
                    format!("{:.2}", s.std),
                ]);
            }
        }
        let mut widths = header.map(str::len);
        for r in &rows {
            for (w, cell) in widths.iter_mut().zip(r) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: [&str; 5]| {
            for (i, cell) in cells.iter().enumerate() {
                if i < 3 {
                    let _ = write!(out, "{:<w$}", cell, w = widths[i]);
                } else {
                    let _ = write!(out, "{:>w$}", cell, w = widths[i]);
                }
                out.push_str(if i + 1 < cells.len() { "  " } else { "\n" });
            }
        };
        line(header);
        for r in &rows {
            line([&r[0], &r[1], &r[2], &r[3], &r[4]]);
        }
        out
    }
}

/// `mean=48.43 km/h, std=1.93` style summary.
pub fn format_stat(mean: f64, std: f64, unit: &str) -> String {
    format!("mean={mean:.2} {unit}, std={std:.2}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    fn traj(points: &[(f64, f64, f64)]) -> Trajectory {
        Trajectory::from_samples(
            points.iter().enumerate().map(|(i, &(x, y, s))| TrajectorySample { t_ns: i as u64 * 10, x, y, speed: s }).collect(),
        )
        .unwrap()
    }

    /// Circle of radius 10 about the origin, CCW from (0, -10), with the
    /// start line crossing it at x = 0.
    fn circle_laps(laps: usize, per_lap: usize) -> (Trajectory, Segment) {
        let pts: Vec<(f64, f64, f64)> = (0..=laps * per_lap + 1)
            .map(|i| {
                let a = -PI / 2.0 + 2.0 * PI * i as f64 / per_lap as f64;
                (10.0 * libm::cos(a), 10.0 * libm::sin(a), 10.0)
            })
            .collect();
        (traj(&pts), Segment::new(v(0.0, -5.0), v(0.0, -15.0)))
    }

    #[test]
    fn two_lap_circle_splits_evenly() {
        let (t, line) = circle_laps(2, 100);
        let laps = split_laps(&t, &line).unwrap();
        assert_eq!(laps.laps.len(), 2);
        assert!(laps.warmup_excluded);
        let (a, b) = (laps.laps[0].len() as i64, laps.laps[1].len() as i64);
        assert!((a - b).abs() <= 1, "{a} vs {b}");
    }

    #[test]
    fn no_crossing_is_incomplete() {
        let t = traj(&[(1.0, -10.0, 1.0), (2.0, -10.0, 1.0), (3.0, -10.0, 1.0)]);
        let e = split_laps(&t, &Segment::new(v(0.0, -5.0), v(0.0, -15.0))).unwrap_err();
        assert_eq!(e, EvalError::IncompleteSession { crossings: 0 });
        assert!(e.to_string().starts_with("incomplete session"));
    }

    #[test]
    fn reverse_crossings_do_not_count() {
        let pts: Vec<(f64, f64, f64)> = (0..=200)
            .map(|i| {
                let a = -PI / 2.0 - 2.0 * PI * i as f64 / 100.0;
                (10.0 * libm::cos(a), 10.0 * libm::sin(a), 10.0)
            })
            .collect();
        let e = split_laps(&traj(&pts), &Segment::new(v(0.0, -5.0), v(0.0, -15.0))).unwrap_err();
        assert!(matches!(e, EvalError::IncompleteSession { .. }));
    }

    #[test]
    fn crossing_outside_the_segment_is_ignored() {
        let t = traj(&[(-1.0, 0.0, 1.0), (1.0, 0.0, 1.0), (-1.0, 0.0, 1.0), (1.0, 0.0, 1.0)]);
        assert!(directed_crossings(&t.points(), &Segment::new(v(0.0, -5.0), v(0.0, -15.0))).is_empty());
    }

    #[test]
    fn frechet_examples() {
        let p = [v(0.0, 0.0), v(1.0, 0.0)];
        let q = [v(0.0, 1.0), v(1.0, 1.0)];
        assert_eq!(discrete_frechet(&p, &q).unwrap(), 1.0);
        assert_eq!(discrete_frechet(&p, &p).unwrap(), 0.0);
        assert_eq!(discrete_frechet(&[], &q), Err(EvalError::EmptyInput));
        // the coupling must reach the far end of the longer curve
        let r = [v(0.0, 0.0), v(5.0, 0.0), v(1.0, 0.0)];
        assert_eq!(discrete_frechet(&p, &r).unwrap(), 4.0);
    }

    #[test]
    fn area_examples() {
        let p = [v(0.0, 0.0), v(2.0, 0.0)];
        assert_eq!(area_between(&p, &[v(0.0, 1.0), v(2.0, 1.0)], 200).unwrap(), 2.0);
        assert!((area_between(&p, &[v(0.0, 0.0), v(2.0, 2.0)], 200).unwrap() - 2.0).abs() <= 1e-6);
        assert_eq!(area_between(&p, &p, 200).unwrap(), 0.0);
        assert_eq!(area_between(&p, &[v(1.0, 1.0), v(1.0, 1.0)], 200), Err(EvalError::DegenerateCurve));
    }

    #[test]
    fn speed_examples() {
        let lap = |speeds: &[f64]| {
            let t = traj(&speeds.iter().enumerate().map(|(i, &s)| (i as f64, 0.0, s)).collect::<Vec<_>>());
            LapSet { laps: vec![t.clone(), t], warmup_excluded: true, crossings: vec![] }
        };
        assert_eq!(speed_stats(&lap(&[10.0; 8])).unwrap(), (36.0, 0.0));
        let (m, s) = speed_stats(&lap(&[10.0, 14.0, 10.0, 14.0])).unwrap();
        assert!((m - 43.2).abs() < 1e-12 && (s - 7.2).abs() < 1e-12);
    }

    #[test]
    fn stat_formatting() {
        assert_eq!(format_stat(48.4321, 1.9349, "km/h"), "mean=48.43 km/h, std=1.93");
    }

    #[test]
    fn aligned_line_starts_near_point() {
        let sq = [v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0), v(0.0, 0.0)];
        let a = align_closed_line(&sq, v(1.1, 1.2));
        assert_eq!(a, vec![v(1.0, 1.0), v(0.0, 1.0), v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0)]);
    }

    #[test]
    fn report_identical_conditions_and_single_sessions() {
        let (t, line) = circle_laps(2, 100);
        let ring: Vec<Vec2> = (0..=64).map(|i| Vec2::from_angle(-PI / 2.0 + 2.0 * PI * i as f64 / 64.0) * 11.0).collect();
        let sessions = [
            Session { id: "s1".into(), condition: Condition::A, trajectory: t.clone() },
            Session { id: "s2".into(), condition: Condition::B, trajectory: t },
        ];
        let r = make_report(&sessions, &line, &ring, 200).unwrap();
        let (a, b) = (r.condition(Condition::A).unwrap(), r.condition(Condition::B).unwrap());
        assert_eq!(a.frechet_m, b.frechet_m);
        assert_eq!(a.area_m2, b.area_m2);
        assert_eq!(a.frechet_m.std, 0.0);
        // radial gap 1 m plus at most half a ring chord along the curve
        assert!(a.frechet_m.mean >= 1.0 && a.frechet_m.mean < 1.2, "{}", a.frechet_m.mean);
        assert_eq!(a.speed_kmh.mean, 36.0);
        let csv = r.to_csv();
        assert!(csv.starts_with("condition,metric,mean,std\nA,frechet_m,"));
        assert_eq!(csv.lines().count(), 9);
        assert_eq!(r.to_table().lines().count(), 9);
    }

    #[test]
    fn report_annotates_failing_session() {
        let (t, line) = circle_laps(2, 100);
        let short = traj(&[(1.0, -10.0, 1.0), (2.0, -10.0, 1.0)]);
        let ring = [v(0.0, -10.0), v(10.0, 0.0), v(0.0, 10.0), v(0.0, -10.0)];
        let sessions = [
            Session { id: "ok".into(), condition: Condition::A, trajectory: t },
            Session { id: "p7-B".into(), condition: Condition::B, trajectory: short },
        ];
        let e = make_report(&sessions, &line, &ring, 50).unwrap_err();
        assert!(e.to_string().starts_with("session p7-B: incomplete session"), "{e}");
    }

    fn poly() -> impl Strategy<Value = Vec<Vec2>> {
        proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0).prop_map(|(x, y)| v(x, y)), 1..12)
    }

    proptest! {
        #[test]
        fn frechet_symmetric_and_bounded(p in poly(), q in poly()) {
            let d = discrete_frechet(&p, &q).unwrap();
            prop_assert_eq!(d, discrete_frechet(&q, &p).unwrap());
            prop_assert!(d >= 0.0);
            let lower = p.iter().map(|a| q.iter().map(|b| point_distance(*a, *b)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
            prop_assert!(lower <= d);
            prop_assert_eq!(discrete_frechet(&p, &p).unwrap(), 0.0);
        }

        #[test]
        fn frechet_translation_invariant(p in poly(), q in poly(), dx in -100.0f64..100.0, dy in -100.0f64..100.0) {
            let t = |s: &[Vec2]| s.iter().map(|a| v(a.x + dx, a.y + dy)).collect::<Vec<_>>();
            let d0 = discrete_frechet(&p, &q).unwrap();
            prop_assert!((discrete_frechet(&t(&p), &t(&q)).unwrap() - d0).abs() <= 1e-9 * (1.0 + d0));
        }

        #[test]
        fn area_symmetric_scaled_translated(p in poly(), q in poly(), s in 0.1f64..10.0, dx in -100.0f64..100.0) {
            prop_assume!(p.len() >= 2 && q.len() >= 2);
            if let Ok(a) = area_between(&p, &q, 64) {
                let tol = 1e-9 * (1.0 + a);
                prop_assert!((area_between(&q, &p, 64).unwrap() - a).abs() <= tol);
                let sc = |c: &[Vec2]| c.iter().map(|z| *z * s).collect::<Vec<_>>();
                prop_assert!((area_between(&sc(&p), &sc(&q), 64).unwrap() - a * s * s).abs() <= 1e-9 * (1.0 + a * s * s));
                let tr = |c: &[Vec2]| c.iter().map(|z| v(z.x + dx, z.y)).collect::<Vec<_>>();
                prop_assert!((area_between(&tr(&p), &tr(&q), 64).unwrap() - a).abs() <= 1e-7 * (1.0 + a));
            }
        }
    }
}
