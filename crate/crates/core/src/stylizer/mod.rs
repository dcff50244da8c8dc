//! The stylizer boundary: request/result types, the fixed-seed policy and a
//! deterministic mock that stands in for the diffusion worker.
//!
//! The mock honors the two contracts the real worker is built around:
//! identical inputs give identical outputs (noise comes from a counter-based
//! hash of `(seed, x, y)`, never from time or frame id), and every pixel the
//! condition map marks as an edge is copied through unchanged.

mod tone_lut;

use alloc::string::{String, ToString};
use core::fmt;

use crate::conditioning::ConditionMap;
use crate::frame::{Frame, PixelFormat};
use crate::math::{clamp_u8, div_floor};

pub use tone_lut::TONE_LUT;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_STRENGTH: f32 = 0.6;
pub const DEFAULT_STYLE: &str = "thunderhill";
/// Noise amplitude before `strength` scaling.
pub const NOISE_AMPLITUDE: i32 = 24;

/// Seeding policy. Only one mode exists: every frame of a session is
/// stylized with the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPolicy {
    FixedPerSession { session_seed: u64 },
}

impl Default for SeedPolicy {
    fn default() -> Self {
        SeedPolicy::FixedPerSession { session_seed: DEFAULT_SEED }
    }
}

impl SeedPolicy {
    pub fn fixed(session_seed: u64) -> Self {
        SeedPolicy::FixedPerSession { session_seed }
    }
}

pub fn seed_for_frame(policy: &SeedPolicy, _frame_id: u64) -> u64 {
    match *policy {
        SeedPolicy::FixedPerSession { session_seed } => session_seed,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StyleError {
    DimensionMismatch,
    FrameIdMismatch { frame: u64, condition: u64 },
    WrongFormat(PixelFormat),
    Steps,
    Strength(f32),
    UnknownStyle(String),
}

impl fmt::Display for StyleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StyleError::DimensionMismatch => f.write_str("frame and condition dimensions differ"),
            StyleError::FrameIdMismatch { frame, condition } => {
                write!(f, "condition map belongs to frame {condition}, request carries frame {frame}")
            }
            StyleError::WrongFormat(p) => write!(f, "stylizer needs RGB8 input, got {p:?}"),
            StyleError::Steps => f.write_str("steps must be at least 1"),
            StyleError::Strength(s) => write!(f, "strength {s} outside [0, 1]"),
            StyleError::UnknownStyle(s) => write!(f, "unknown style {s:?}"),
        }
    }
}

impl core::error::Error for StyleError {}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleRequest {
    pub frame: Frame,
    pub condition: ConditionMap,
    pub seed: u64,
    pub steps: u16,
    pub strength: f32,
    pub style_id: String,
}

impl StyleRequest {
    /// Request with default steps, strength and style.
    pub fn new(frame: Frame, condition: ConditionMap, seed: u64) -> Self {
        Self { frame, condition, seed, steps: 1, strength: DEFAULT_STRENGTH, style_id: DEFAULT_STYLE.to_string() }
    }

    pub fn validate(&self) -> Result<(), StyleError> {
        if self.frame.format() != PixelFormat::Rgb8 {
            return Err(StyleError::WrongFormat(self.frame.format()));
        }
        if self.condition.width() != self.frame.width() || self.condition.height() != self.frame.height() {
            return Err(StyleError::DimensionMismatch);
        }
        if self.condition.frame_id() != self.frame.id() {
            return Err(StyleError::FrameIdMismatch { frame: self.frame.id(), condition: self.condition.frame_id() });
        }
        if self.steps == 0 {
            return Err(StyleError::Steps);
        }
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(StyleError::Strength(self.strength));
        }
        if self.style_id != DEFAULT_STYLE {
            return Err(StyleError::UnknownStyle(self.style_id.clone()));
        }
        Ok(())
    }
}

/// Worker-side timing breakdown, nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageTimings {
    pub encode_ns: u64,
    pub inference_ns: u64,
    pub decode_ns: u64,
    pub total_ns: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleResult {
    pub frame: Frame,
    pub timings: StageTimings,
    pub worker_id: String,
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Raw noise offset in `[-24, 24]` for pixel `(x, y)` under `seed`.
#[inline]
pub fn noise_offset(seed: u64, x: u32, y: u32) -> i32 {
    let key = ((x as u64) << 32) | y as u64;
    let h = mix64(mix64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ key);
    let span = (2 * NOISE_AMPLITUDE + 1) as u64;
    (((h >> 32) * span) >> 32) as i32 - NOISE_AMPLITUDE
}

/// Strength in thousandths; the only float touched on the noise path.
pub fn strength_milli(strength: f32) -> i64 {
    libm::floor(strength as f64 * 1000.0 + 0.5) as i64
}

/// Noise offset after strength scaling, rounded half-up.
#[inline]
pub fn scaled_offset(seed: u64, x: u32, y: u32, strength_milli: i64) -> i32 {
    div_floor(noise_offset(seed, x, y) as i64 * strength_milli + 500, 1000) as i32
}

/// Deterministic stand-in for the diffusion stylizer: tone curve, seeded
/// value noise, then verbatim copy of every edge pixel. Timings are zero;
/// callers that measure time fill them in.
pub fn mock_stylize(req: &StyleRequest) -> Result<StyleResult, StyleError> {
    req.validate()?;
    let w = req.frame.width();
    let src = req.frame.pixels();
    let cond = req.condition.data();
    let s_milli = strength_milli(req.strength);
    let mut out = src.to_vec();
    for (i, px) in out.chunks_exact_mut(3).enumerate() {
        if cond[i] == 255 {
            continue;
        }
        let (x, y) = ((i as u32) % w, (i as u32) / w);
        let off = if s_milli == 0 { 0 } else { scaled_offset(req.seed, x, y, s_milli) };
        for (c, v) in px.iter_mut().enumerate() {
            *v = clamp_u8(TONE_LUT[c][*v as usize] as i32 + off);
        }
    }
    let frame = req.frame.with_pixels(out).map_err(|_| StyleError::DimensionMismatch)?;
    Ok(StyleResult { frame, timings: StageTimings::default(), worker_id: "mock".to_string() })
}

/// Apply only the tone curve (no noise, no edge copy).
pub fn apply_lut(frame: &Frame) -> Frame {
    let out = frame
        .pixels()
        .chunks_exact(3)
        .flat_map(|p| [TONE_LUT[0][p[0] as usize], TONE_LUT[1][p[1] as usize], TONE_LUT[2][p[2] as usize]])
        .collect();
    frame.with_pixels(out).expect("same shape")
}
