//! Fixed-tick simulation session with trajectory recording.

use alloc::vec::Vec;

use crate::geometry::Vec2;
use crate::simworld::vehicle::{step_vehicle, ControlInput, VehicleState};

/// 100 Hz physics tick.
pub const TICK_NS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t_ns: u64,
    pub x: f64,
    pub y: f64,
    /// m/s
    pub speed: f64,
}

impl TrajectorySample {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Time-ordered vehicle samples; timestamps strictly increase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonMonotonic {
    pub index: usize,
}

impl core::fmt::Display for NonMonotonic {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "sample {} does not advance time", self.index)
    }
}

impl core::error::Error for NonMonotonic {}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: Vec<TrajectorySample>) -> Result<Self, NonMonotonic> {
        if let Some(i) = samples.windows(2).position(|w| w[1].t_ns <= w[0].t_ns) {
            return Err(NonMonotonic { index: i + 1 });
        }
        Ok(Self { samples })
    }

    pub fn push(&mut self, s: TrajectorySample) -> Result<(), NonMonotonic> {
        if self.samples.last().is_some_and(|l| s.t_ns <= l.t_ns) {
            return Err(NonMonotonic { index: self.samples.len() });
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
    pub fn points(&self) -> Vec<Vec2> {
        self.samples.iter().map(TrajectorySample::position).collect()
    }
}

/// Vehicle integrated at [`TICK_NS`]; the most recent input wins.
#[derive(Debug, Clone)]
pub struct SimSession {
    state: VehicleState,
    input: ControlInput,
    trajectory: Trajectory,
}

impl SimSession {
    pub fn new(start: VehicleState) -> Self {
        let mut trajectory = Trajectory::new();
        trajectory.samples.push(sample_of(&start));
        Self { state: start, input: ControlInput::default(), trajectory }
    }

    pub fn set_input(&mut self, input: ControlInput) {
        self.input = input;
    }

    pub fn input(&self) -> ControlInput {
        self.input
    }

    pub fn tick(&mut self) -> &VehicleState {
        self.state = step_vehicle(&self.state, &self.input, TICK_NS as f64 * 1e-9);
        self.trajectory.samples.push(sample_of(&self.state));
        &self.state
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }
    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }
    pub fn into_trajectory(self) -> Trajectory {
        self.trajectory
    }
}

fn sample_of(s: &VehicleState) -> TrajectorySample {
    TrajectorySample { t_ns: s.t_ns, x: s.x, y: s.y, speed: s.speed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_record_samples() {
        let mut s = SimSession::new(VehicleState::at(0.0, 0.0, 0.0, 5.0));
        s.set_input(ControlInput { throttle: 1.0, ..Default::default() });
        s.set_input(ControlInput { brake: 1.0, ..Default::default() });
        s.tick();
        assert_eq!(s.trajectory().len(), 2);
        assert_eq!(s.state().t_ns, TICK_NS);
        assert!(s.state().speed < 5.0);
    }

    #[test]
    fn rejects_time_regression() {
        let a = TrajectorySample { t_ns: 5, x: 0.0, y: 0.0, speed: 0.0 };
        assert_eq!(Trajectory::from_samples(alloc::vec![a, a]), Err(NonMonotonic { index: 1 }));
        let mut t = Trajectory::new();
        t.push(a).unwrap();
        assert!(t.push(TrajectorySample { t_ns: 4, ..a }).is_err());
    }
}
