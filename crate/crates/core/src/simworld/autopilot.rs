//! Pure-pursuit driver that follows a closed path at a fixed target speed.

use alloc::vec::Vec;

use crate::geometry::Vec2;
use crate::simworld::vehicle::{ControlInput, VehicleState, MAX_WHEEL_ANGLE, WHEELBASE};

pub const TARGET_SPEED: f64 = 12.5;
pub const MIN_LOOKAHEAD: f64 = 6.0;
pub const LOOKAHEAD_GAIN: f64 = 0.8;
const SPEED_GAIN: f64 = 1.0;
/// Path vertices searched ahead of the cursor for the nearest point.
const SEARCH_WINDOW: usize = 40;

#[derive(Debug, Clone)]
pub struct PurePursuit {
    path: Vec<Vec2>,
    cursor: Option<usize>,
    pub target_speed: f64,
}

impl PurePursuit {
    /// `path` is closed (first point repeated at the end) with at least 3
    /// distinct vertices.
    pub fn new(path: &[Vec2]) -> Self {
        let mut path = path.to_vec();
        if path.len() > 1 && path.first() == path.last() {
            path.pop();
        }
        assert!(path.len() >= 3, "pure pursuit needs at least 3 path points");
        Self { path, cursor: None, target_speed: TARGET_SPEED }
    }

    fn nearest(&mut self, p: Vec2) -> usize {
        let n = self.path.len();
        let best = |range: &mut dyn Iterator<Item = usize>| {
            range.min_by(|&a, &b| self.path[a].dist(p).total_cmp(&self.path[b].dist(p))).unwrap()
        };
        let i = match self.cursor {
            None => best(&mut (0..n)),
            Some(c) => best(&mut (0..SEARCH_WINDOW.min(n)).map(|k| (c + k) % n)),
        };
        self.cursor = Some(i);
        i
    }

    pub fn control(&mut self, s: &VehicleState) -> ControlInput {
        let pos = Vec2::new(s.x, s.y);
        let n = self.path.len();
        let lookahead = MIN_LOOKAHEAD.max(LOOKAHEAD_GAIN * s.speed);
        let mut i = self.nearest(pos);
        for _ in 0..n {
            if self.path[i].dist(pos) >= lookahead {
                break;
            }
            i = (i + 1) % n;
        }
        let d = self.path[i] - pos;
        let alpha = d.angle() - s.heading;
        let ld = d.norm().max(1e-6);
        let delta = libm::atan(2.0 * WHEELBASE * libm::sin(alpha) / ld);
        let steer = (delta / MAX_WHEEL_ANGLE).clamp(-1.0, 1.0);
        let e = SPEED_GAIN * (self.target_speed - s.speed);
        ControlInput { steer, throttle: e.clamp(0.0, 1.0), brake: (-e).clamp(0.0, 1.0) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::session::SimSession;
    use crate::simworld::track::TrackModel;

    #[test]
    fn laps_the_default_track_inside_the_lane() {
        let track = TrackModel::default_track();
        let (p, h) = track.start_pose();
        let mut pilot = PurePursuit::new(track.centerline());
        let mut sim = SimSession::new(VehicleState::at(p.x, p.y, h, 0.0));
        let mut worst: f64 = 0.0;
        for k in 0..30_000 {
            let u = pilot.control(sim.state());
            sim.set_input(u);
            sim.tick();
            if k % 10 == 0 {
                let s = sim.state();
                worst = worst.max(track.distance_to_centerline(Vec2::new(s.x, s.y)));
            }
        }
        assert!(worst < 1.0, "max deviation {worst}");
        let s = sim.state();
        assert!(s.speed > 11.0 && s.speed < 13.89);
    }
}
