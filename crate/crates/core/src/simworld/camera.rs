//! Pinhole driver camera.
//!
//! Camera axes: X right, Y down, Z forward along the optical axis. The
//! camera sits `height` meters above the vehicle origin and is pitched down
//! by `-pitch` radians.

use crate::geometry::Vec2;
use crate::simworld::vehicle::VehicleState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self { fx: 500.0, fy: 500.0, cx: 320.0, cy: 240.0 }
    }
}

impl CameraIntrinsics {
    /// Default intrinsics scaled to another resolution.
    pub fn for_resolution(width: u32, height: u32) -> Self {
        let s = width as f64 / 640.0;
        Self { fx: 500.0 * s, fy: 500.0 * s, cx: width as f64 / 2.0, cy: height as f64 / 2.0 }
    }

    pub fn is_valid(&self, width: u32, height: u32) -> bool {
        self.fx > 0.0
            && self.fy > 0.0
            && (0.0..=width as f64).contains(&self.cx)
            && (0.0..=height as f64).contains(&self.cy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraMount {
    pub height: f64,
    /// Negative looks down.
    pub pitch: f64,
}

impl Default for CameraMount {
    fn default() -> Self {
        Self { height: 1.2, pitch: -(5.0f64).to_radians() }
    }
}

/// World-space camera pose derived from the vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: [f64; 3],
    pub yaw: f64,
    pub pitch: f64,
}

impl CameraPose {
    pub fn from_vehicle(state: &VehicleState, mount: &CameraMount) -> Self {
        Self { position: [state.x, state.y, mount.height], yaw: state.heading, pitch: mount.pitch }
    }

    /// World point into camera coordinates.
    pub fn to_camera(&self, world: [f64; 3]) -> [f64; 3] {
        let (dx, dy, dz) = (world[0] - self.position[0], world[1] - self.position[1], world[2] - self.position[2]);
        let (s, c) = (libm::sin(self.yaw), libm::cos(self.yaw));
        let fwd = dx * c + dy * s;
        let left = -dx * s + dy * c;
        let down_pitch = -self.pitch;
        let (sp, cp) = (libm::sin(down_pitch), libm::cos(down_pitch));
        [-left, -fwd * sp - dz * cp, fwd * cp - dz * sp]
    }

    /// Camera-frame direction into (forward, left, up) vehicle axes.
    fn to_vehicle_dir(&self, d: [f64; 3]) -> (f64, f64, f64) {
        let down_pitch = -self.pitch;
        let (sp, cp) = (libm::sin(down_pitch), libm::cos(down_pitch));
        let fwd = d[2] * cp - d[1] * sp;
        let up = -d[2] * sp - d[1] * cp;
        (fwd, -d[0], up)
    }

    /// Ground-plane (z = 0) point seen through image coordinate `(u, v)`,
    /// if the ray points below the horizon.
    pub fn ground_point(&self, intr: &CameraIntrinsics, u: f64, v: f64) -> Option<Vec2> {
        let d = [(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0];
        let (f, l, up) = self.to_vehicle_dir(d);
        if up >= -1e-9 {
            return None;
        }
        let t = self.position[2] / -up;
        let (fw, lw) = (f * t, l * t);
        let (s, c) = (libm::sin(self.yaw), libm::cos(self.yaw));
        Some(Vec2::new(self.position[0] + fw * c - lw * s, self.position[1] + fw * s + lw * c))
    }
}

/// Result of projecting a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pixel { u: f64, v: f64 },
    BehindCamera,
}

pub const MIN_DEPTH: f64 = 0.01;

/// Project a point already expressed in camera coordinates.
pub fn project_camera_point(intr: &CameraIntrinsics, p: [f64; 3]) -> Projection {
    let [x, y, z] = p;
    if z <= MIN_DEPTH {
        return Projection::BehindCamera;
    }
    Projection::Pixel { u: intr.fx * x / z + intr.cx, v: intr.fy * y / z + intr.cy }
}

/// Rigid transform into the camera frame, then pinhole projection.
pub fn project_point(intr: &CameraIntrinsics, pose: &CameraPose, world: [f64; 3]) -> Projection {
    project_camera_point(intr, pose.to_camera(world))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_point_hits_principal_point() {
        let k = CameraIntrinsics::default();
        assert_eq!(project_camera_point(&k, [0.0, 0.0, 10.0]), Projection::Pixel { u: 320.0, v: 240.0 });
        assert_eq!(project_camera_point(&k, [1.0, 0.0, 10.0]), Projection::Pixel { u: 370.0, v: 240.0 });
        assert_eq!(project_camera_point(&k, [0.0, 0.0, -1.0]), Projection::BehindCamera);
        assert_eq!(project_camera_point(&k, [0.0, 0.0, 0.005]), Projection::BehindCamera);
    }

    #[test]
    fn ground_ray_round_trips_through_projection() {
        let k = CameraIntrinsics::default();
        let state = VehicleState::at(10.0, -4.0, 0.7, 5.0);
        let pose = CameraPose::from_vehicle(&state, &CameraMount::default());
        let g = pose.ground_point(&k, 123.5, 400.5).unwrap();
        match project_point(&k, &pose, [g.x, g.y, 0.0]) {
            Projection::Pixel { u, v } => {
                assert!((u - 123.5).abs() < 1e-9 && (v - 400.5).abs() < 1e-9);
            }
            Projection::BehindCamera => panic!("ground point behind camera"),
        }
        assert!(pose.ground_point(&k, 320.0, 100.0).is_none());
    }

    #[test]
    fn bottom_row_sees_about_two_meters_ahead() {
        let k = CameraIntrinsics::default();
        let pose = CameraPose::from_vehicle(&VehicleState::default(), &CameraMount::default());
        let g = pose.ground_point(&k, 320.0, 479.5).unwrap();
        assert!((g.x - 2.0).abs() < 0.1 && g.y.abs() < 1e-9, "{g:?}");
    }
}
