//! Desk-scale driving world: a closed two-mile track with a racing line of
//! arrow markers, a kinematic bicycle vehicle, a flat-shaded pinhole
//! renderer, an overlay compositor and trajectory recording.

pub mod autopilot;
pub mod camera;
pub mod overlay;
pub mod render;
pub mod session;
pub mod track;
pub mod vehicle;

pub use autopilot::PurePursuit;
pub use camera::{CameraIntrinsics, CameraMount, Projection};
pub use overlay::{overlay_blend, RgbaImage};
pub use render::{render_frame, LaneMask, RenderScene};
pub use session::{SimSession, Trajectory, TrajectorySample, TICK_NS};
pub use track::{ArrowMarker, RacingLine, TrackError, TrackModel};
pub use vehicle::{step_vehicle, ControlInput, VehicleState, A_BRAKE, A_THROTTLE, C_DRAG, MAX_WHEEL_ANGLE, V_MAX, WHEELBASE};
