//! Kinematic bicycle model, integrated with forward Euler.

pub const WHEELBASE: f64 = 2.7;
/// 50 km/h.
pub const V_MAX: f64 = 13.89;
pub const MAX_WHEEL_ANGLE: f64 = 0.5;
pub const A_THROTTLE: f64 = 3.0;
pub const A_BRAKE: f64 = 6.0;
pub const C_DRAG: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub t_ns: u64,
}

impl VehicleState {
    pub fn at(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Self { x, y, heading, speed: speed.clamp(0.0, V_MAX), t_ns: 0 }
    }
}

/// Driver input. Out-of-range values are clamped when applied.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub steer: f64,
    pub throttle: f64,
    pub brake: f64,
}

impl ControlInput {
    pub fn clamped(self) -> Self {
        let c = |v: f64, lo: f64| if v.is_nan() { 0.0 } else { v.clamp(lo, 1.0) };
        Self { steer: c(self.steer, -1.0), throttle: c(self.throttle, 0.0), brake: c(self.brake, 0.0) }
    }

    pub fn wheel_angle(&self) -> f64 {
        self.clamped().steer * MAX_WHEEL_ANGLE
    }
}

/// Advance the vehicle by `dt` seconds, `0 < dt <= 0.1`.
pub fn step_vehicle(state: &VehicleState, input: &ControlInput, dt: f64) -> VehicleState {
    assert!(dt > 0.0 && dt <= 0.1, "dt must lie in (0, 0.1], got {dt}");
    let u = input.clamped();
    let v = state.speed;
    let delta = u.steer * MAX_WHEEL_ANGLE;
    let accel = A_THROTTLE * u.throttle - A_BRAKE * u.brake - C_DRAG * v;
    VehicleState {
        x: state.x + v * libm::cos(state.heading) * dt,
        y: state.y + v * libm::sin(state.heading) * dt,
        heading: state.heading + v / WHEELBASE * libm::tan(delta) * dt,
        speed: (v + accel * dt).clamp(0.0, V_MAX),
        t_ns: state.t_ns + libm::round(dt * 1e9) as u64,
    }
}
