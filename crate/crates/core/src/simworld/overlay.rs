//! Alpha compositing of an RGBA overlay onto an RGB frame.

use alloc::vec;
use alloc::vec::Vec;

use crate::frame::{Frame, FrameError, PixelFormat};
use crate::simworld::camera::{CameraIntrinsics, CameraMount, CameraPose};
use crate::simworld::render::{RenderScene, Surface, ARROW_YELLOW};
use crate::simworld::vehicle::VehicleState;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbaImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RgbaImage {
    pub fn transparent(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![0; width as usize * height as usize * 4] }
    }

    pub fn set(&mut self, x: usize, y: usize, rgba: [u8; 4]) {
        let i = (y * self.width as usize + x) * 4;
        self.data[i..i + 4].copy_from_slice(&rgba);
    }
}

/// `round((o*a + b*(255-a)) / 255)` per channel, half up, in integers.
#[inline]
pub fn blend_channel(o: u8, b: u8, a: u8) -> u8 {
    let n = o as u32 * a as u32 + b as u32 * (255 - a as u32);
    ((2 * n + 255) / 510) as u8
}

pub fn overlay_blend(base: &Frame, overlay: &RgbaImage) -> Result<Frame, FrameError> {
    if base.format() != PixelFormat::Rgb8 {
        return Err(FrameError::WrongFormat { expected: PixelFormat::Rgb8, actual: base.format() });
    }
    if base.width() != overlay.width || base.height() != overlay.height {
        return Err(FrameError::DimensionMismatch);
    }
    let px: Vec<u8> = base
        .pixels()
        .chunks_exact(3)
        .zip(overlay.data.chunks_exact(4))
        .flat_map(|(b, o)| [blend_channel(o[0], b[0], o[3]), blend_channel(o[1], b[1], o[3]), blend_channel(o[2], b[2], o[3])])
        .collect();
    base.with_pixels(px)
}

/// Racing-line arrows alone, opaque on a transparent background.
pub fn render_arrow_overlay(
    scene: &RenderScene,
    state: &VehicleState,
    intr: &CameraIntrinsics,
    mount: &CameraMount,
    width: u32,
    height: u32,
) -> RgbaImage {
    let pose = CameraPose::from_vehicle(state, mount);
    let cam = crate::geometry::Vec2::new(state.x, state.y);
    let mut img = RgbaImage::transparent(width, height);
    let [r, g, b] = ARROW_YELLOW;
    for j in 0..height as usize {
        for i in 0..width as usize {
            if let Some(p) = pose.ground_point(intr, i as f64 + 0.5, j as f64 + 0.5) {
                if scene.surface_at(p, p.dist(cam)) == Surface::Arrow {
                    img.set(i, j, [r, g, b, 255]);
                }
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::render::render_frame;

    #[test]
    fn half_alpha_blend() {
        assert_eq!(blend_channel(200, 100, 128), 150);
        assert_eq!(blend_channel(200, 100, 255), 200);
        assert_eq!(blend_channel(200, 100, 0), 100);
    }

    #[test]
    fn blend_matches_float_rounding() {
        for a in 0..=255u32 {
            for (o, b) in [(0u32, 255u32), (255, 0), (17, 230), (128, 127)] {
                let exact = (o * a + b * (255 - a)) as f64 / 255.0;
                assert_eq!(blend_channel(o as u8, b as u8, a as u8) as f64, (exact + 0.5).floor());
            }
        }
    }

    #[test]
    fn transparent_overlay_is_identity() {
        let f = Frame::solid(1, 8, 4, [9, 99, 199]).unwrap();
        assert_eq!(overlay_blend(&f, &RgbaImage::transparent(8, 4)).unwrap(), f);
        assert!(overlay_blend(&f, &RgbaImage::transparent(4, 4)).is_err());
    }

    #[test]
    fn arrow_overlay_matches_rendered_arrows() {
        let scene = RenderScene::default_scene();
        let st = VehicleState::at(450.0, -200.0, 0.2, 0.0);
        let (k, m) = (CameraIntrinsics::for_resolution(320, 240), CameraMount::default());
        let (frame, _) = render_frame(&scene, &st, &k, &m, 320, 240, 0);
        let ov = render_arrow_overlay(&scene, &st, &k, &m, 320, 240);
        for y in 0..240 {
            for x in 0..320 {
                let opaque = ov.data[(y * 320 + x) * 4 + 3] == 255;
                assert_eq!(opaque, frame.rgb_at(x as u32, y as u32) == ARROW_YELLOW);
            }
        }
    }
}
