//! Edge-map conditioning: grayscale, Gaussian blur, Sobel gradients and
//! Canny with hysteresis, including a gaze-driven threshold field that
//! refines edges around a focus point and coarsens them in the periphery.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::frame::{Frame, FrameError, PixelFormat};
use crate::math::round_u8;

pub const DEFAULT_LOW: f32 = 50.0;
pub const DEFAULT_HIGH: f32 = 150.0;
pub const DEFAULT_SIGMA: f32 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ConditionError {
    WrongFormat(PixelFormat),
    NonPositiveSigma(f32),
    TooSmall { width: u32, height: u32 },
    InvalidThresholds { low: f32, high: f32 },
    InvalidField(&'static str),
    DimensionMismatch,
    NonBinary,
}

impl fmt::Display for ConditionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionError::WrongFormat(p) => write!(f, "expected an RGB8 frame, got {p:?}"),
            ConditionError::NonPositiveSigma(s) => write!(f, "sigma must be positive, got {s}"),
            ConditionError::TooSmall { width, height } => {
                write!(f, "image {width}x{height} is smaller than 3x3")
            }
            ConditionError::InvalidThresholds { low, high } => {
                write!(f, "thresholds must satisfy low < high, or both zero (got {low}, {high})")
            }
            ConditionError::InvalidField(why) => write!(f, "invalid threshold field: {why}"),
            ConditionError::DimensionMismatch => f.write_str("dimension mismatch"),
            ConditionError::NonBinary => f.write_str("condition map values must be 0 or 255"),
        }
    }
}

impl core::error::Error for ConditionError {}

/// Single-channel 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize, "gray buffer size");
        Self { width, height, data }
    }

    pub fn filled(width: u32, height: u32, v: u8) -> Self {
        Self::new(width, height, vec![v; width as usize * height as usize])
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width as usize + x]
    }

    /// Clamp-to-edge access.
    #[inline]
    fn clamped(&self, x: isize, y: isize) -> u8 {
        let xi = x.clamp(0, self.width as isize - 1) as usize;
        let yi = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xi, yi)
    }

    pub fn transpose(&self) -> GrayImage {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut out = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                out[x * h + y] = self.data[y * w + x];
            }
        }
        GrayImage::new(self.height, self.width, out)
    }

    pub fn mirror_x(&self) -> GrayImage {
        let w = self.width as usize;
        let mut out = self.data.clone();
        for row in out.chunks_mut(w) {
            row.reverse();
        }
        GrayImage::new(self.width, self.height, out)
    }
}

/// Parameters a condition map was produced with.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeParams {
    Uniform { low: f32, high: f32, sigma: f32 },
    Field { field: ThresholdField, sigma: f32 },
}

/// Binary edge image aligned 1:1 with a source frame. 255 marks an edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionMap {
    frame_id: u64,
    width: u32,
    height: u32,
    data: Vec<u8>,
    params: Option<EdgeParams>,
}

impl ConditionMap {
    pub fn new(
        frame_id: u64,
        width: u32,
        height: u32,
        data: Vec<u8>,
        params: Option<EdgeParams>,
    ) -> Result<Self, ConditionError> {
        if data.len() != width as usize * height as usize {
            return Err(ConditionError::DimensionMismatch);
        }
        if data.iter().any(|&v| v != 0 && v != 255) {
            return Err(ConditionError::NonBinary);
        }
        Ok(Self { frame_id, width, height, data, params })
    }

    pub fn frame_id(&self) -> u64 {
        self.frame_id
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }
    pub fn params(&self) -> Option<&EdgeParams> {
        self.params.as_ref()
    }

    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width as usize + x] == 255
    }

    pub fn edge_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 255).count()
    }

    /// Same map without the producer parameters (as it appears on the wire).
    pub fn without_params(mut self) -> Self {
        self.params = None;
        self
    }

    /// A map with every pixel marked as edge.
    pub fn full(frame_id: u64, width: u32, height: u32) -> Self {
        Self { frame_id, width, height, data: vec![255; width as usize * height as usize], params: None }
    }

    /// A map with no edges.
    pub fn empty(frame_id: u64, width: u32, height: u32) -> Self {
        Self { frame_id, width, height, data: vec![0; width as usize * height as usize], params: None }
    }
}

/// Spatially varying Canny thresholds around a focus point: `fine` within
/// `r_inner`, `coarse` beyond `r_outer`, linear in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdField {
    pub focus: (f64, f64),
    pub r_inner: f64,
    pub r_outer: f64,
    pub fine: (f32, f32),
    pub coarse: (f32, f32),
}

impl ThresholdField {
    pub fn validate(&self) -> Result<(), ConditionError> {
        let finite = self.focus.0.is_finite() && self.focus.1.is_finite() && self.r_inner.is_finite() && self.r_outer.is_finite();
        if !finite {
            return Err(ConditionError::InvalidField("non-finite geometry"));
        }
        if !(self.r_inner >= 0.0 && self.r_inner < self.r_outer) {
            return Err(ConditionError::InvalidField("need 0 <= r_inner < r_outer"));
        }
        if !(self.fine.0 < self.fine.1) || !(self.coarse.0 < self.coarse.1) {
            return Err(ConditionError::InvalidField("each threshold pair needs low < high"));
        }
        Ok(())
    }

    /// `(low, high)` at distance `d` from the focus.
    pub fn thresholds_at_distance(&self, d: f64) -> (f32, f32) {
        if d <= self.r_inner {
            self.fine
        } else if d >= self.r_outer {
            self.coarse
        } else {
            let t = ((d - self.r_inner) / (self.r_outer - self.r_inner)) as f32;
            (
                self.fine.0 + (self.coarse.0 - self.fine.0) * t,
                self.fine.1 + (self.coarse.1 - self.fine.1) * t,
            )
        }
    }

    pub fn thresholds_at(&self, x: usize, y: usize) -> (f32, f32) {
        let d = libm::hypot(x as f64 - self.focus.0, y as f64 - self.focus.1);
        self.thresholds_at_distance(d)
    }
}

/// `y = round(0.299 R + 0.587 G + 0.114 B)`.
pub fn to_grayscale(frame: &Frame) -> Result<Frame, ConditionError> {
    let gray = gray_image(frame)?;
    Frame::new(frame.id(), frame.ts_ns(), frame.width(), frame.height(), PixelFormat::Gray8, gray.data, frame.source_id())
        .map_err(|_: FrameError| ConditionError::DimensionMismatch)
}

pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    round_u8(0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
}

fn gray_image(frame: &Frame) -> Result<GrayImage, ConditionError> {
    if frame.format() != PixelFormat::Rgb8 {
        return Err(ConditionError::WrongFormat(frame.format()));
    }
    let data = frame.pixels().chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect();
    Ok(GrayImage::new(frame.width(), frame.height(), data))
}

/// Normalized 1-D Gaussian kernel of radius `ceil(3 sigma)`, center first
/// at index `radius`.
pub fn gaussian_kernel(sigma: f32) -> Vec<f64> {
    let s = sigma as f64;
    let radius = libm::ceil(3.0 * s) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| libm::exp(-((i * i) as f64) / (2.0 * s * s)))
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f32) -> Result<GrayImage, ConditionError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(ConditionError::NonPositiveSigma(sigma));
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = (img.width as isize, img.height as isize);
    let mut tmp = vec![0f64; img.data.len()];
    for y in 0..h {
        let row = &img.data[(y * w) as usize..((y + 1) * w) as usize];
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in k.iter().enumerate() {
                let sx = (x + ki as isize - r).clamp(0, w - 1);
                acc += kv * row[sx as usize] as f64;
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![0u8; img.data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in k.iter().enumerate() {
                let sy = (y + ki as isize - r).clamp(0, h - 1);
                acc += kv * tmp[(sy * w + x) as usize];
            }
            out[(y * w + x) as usize] = round_u8(acc);
        }
    }
    Ok(GrayImage::new(img.width, img.height, out))
}

/// Gradient orientation quantized to the nearest of 0, 45, 90 and 135
/// degrees (image coordinates, y down).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Direction {
    Deg0 = 0,
    Deg45 = 1,
    Deg90 = 2,
    Deg135 = 3,
}

/// Output of [`sobel_gradients`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub width: u32,
    pub height: u32,
    pub gx: Vec<i16>,
    pub gy: Vec<i16>,
    pub mag: Vec<f32>,
    pub dir: Vec<Direction>,
}

// tan(22.5°) and tan(67.5°) scaled by 2^16
const TAN_22_5_Q16: i64 = 27146;
const TAN_67_5_Q16: i64 = 158218;

pub fn quantize_direction(gx: i32, gy: i32) -> Direction {
    let ax = (gx as i64).abs();
    let ay = (gy as i64).abs();
    if (ay << 16) <= ax * TAN_22_5_Q16 {
        Direction::Deg0
    } else if (ay << 16) >= ax * TAN_67_5_Q16 {
        Direction::Deg90
    } else if (gx > 0) == (gy > 0) {
        Direction::Deg45
    } else {
        Direction::Deg135
    }
}

/// 3x3 Sobel gradients with clamp-to-edge borders.
pub fn sobel_gradients(img: &GrayImage) -> Result<Gradients, ConditionError> {
    if img.width < 3 || img.height < 3 {
        return Err(ConditionError::TooSmall { width: img.width, height: img.height });
    }
    let (w, h) = (img.width as isize, img.height as isize);
    let n = img.data.len();
    let mut gx = Vec::with_capacity(n);
    let mut gy = Vec::with_capacity(n);
    let mut mag = Vec::with_capacity(n);
    let mut dir = Vec::with_capacity(n);
    for y in 0..h {
        for x in 0..w {
            let p = |dx: isize, dy: isize| img.clamped(x + dx, y + dy) as i32;
            let sx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
            gx.push(sx as i16);
            gy.push(sy as i16);
            mag.push(libm::sqrtf((sx * sx + sy * sy) as f32));
            dir.push(quantize_direction(sx, sy));
        }
    }
    Ok(Gradients { width: img.width, height: img.height, gx, gy, mag, dir })
}

/// Non-maximum suppression along the quantized gradient direction.
///
/// A pixel survives when its magnitude is strictly greater than the
/// neighbor behind it and at least the neighbor ahead of it, where "ahead"
/// follows the sign of the gradient. Tied ridge pairs therefore keep exactly
/// one pixel, and the choice mirrors with the image. Neighbors outside the
/// image count as zero.
pub fn non_maximum_suppression(g: &Gradients) -> Vec<f32> {
    let (w, h) = (g.width as isize, g.height as isize);
    let at = |x: isize, y: isize| -> f32 {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            g.mag[(y * w + x) as usize]
        }
    };
    let mut out = vec![0f32; g.mag.len()];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            let m = g.mag[i];
            if m == 0.0 {
                continue;
            }
            let sx = g.gx[i].signum() as isize;
            let sy = g.gy[i].signum() as isize;
            let (dx, dy) = match g.dir[i] {
                Direction::Deg0 => (sx, 0),
                Direction::Deg90 => (0, sy),
                Direction::Deg45 | Direction::Deg135 => (sx, sy),
            };
            let ahead = at(x + dx, y + dy);
            let behind = at(x - dx, y - dy);
            if m > behind && m >= ahead {
                out[i] = m;
            }
        }
    }
    out
}

/// Double threshold followed by 8-connected hysteresis from strong pixels
/// through weak ones. `thresholds(x, y)` yields the per-pixel `(low, high)`.
pub fn hysteresis(
    width: u32,
    height: u32,
    nms: &[f32],
    thresholds: impl Fn(usize, usize) -> (f32, f32),
) -> Vec<u8> {
    let (w, h) = (width as usize, height as usize);
    // 0 = none, 1 = weak, 2 = strong
    let mut class = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = nms[i];
            if m <= 0.0 {
                continue;
            }
            let (lo, hi) = thresholds(x, y);
            if m >= hi {
                class[i] = 2;
            } else if m >= lo {
                class[i] = 1;
            }
        }
    }
    let mut out = vec![0u8; w * h];
    let mut stack = Vec::new();
    for start in 0..w * h {
        if class[start] != 2 || out[start] == 255 {
            continue;
        }
        out[start] = 255;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if class[j] != 0 && out[j] == 0 {
                        out[j] = 255;
                        stack.push(j);
                    }
                }
            }
        }
    }
    out
}

fn edge_pipeline(
    frame: &Frame,
    sigma: f32,
    thresholds: impl Fn(usize, usize) -> (f32, f32),
) -> Result<Vec<u8>, ConditionError> {
    let gray = gray_image(frame)?;
    if gray.width < 3 || gray.height < 3 {
        return Err(ConditionError::TooSmall { width: gray.width, height: gray.height });
    }
    let blurred = gaussian_blur(&gray, sigma)?;
    let grads = sobel_gradients(&blurred)?;
    let nms = non_maximum_suppression(&grads);
    Ok(hysteresis(gray.width, gray.height, &nms, thresholds))
}

/// Canny edge map of an RGB frame.
pub fn canny(frame: &Frame, low: f32, high: f32, sigma: f32) -> Result<ConditionMap, ConditionError> {
    // (0, 0) is the one degenerate pair accepted: every nonzero NMS pixel is strong
    let ok = low < high || (low == 0.0 && high == 0.0);
    if !ok || !low.is_finite() || !high.is_finite() {
        return Err(ConditionError::InvalidThresholds { low, high });
    }
    let data = edge_pipeline(frame, sigma, |_, _| (low, high))?;
    ConditionMap::new(frame.id(), frame.width(), frame.height(), data, Some(EdgeParams::Uniform { low, high, sigma }))
}

/// Canny with per-pixel thresholds from a [`ThresholdField`].
pub fn canny_spatially_varying(frame: &Frame, field: &ThresholdField, sigma: f32) -> Result<ConditionMap, ConditionError> {
    field.validate()?;
    let data = edge_pipeline(frame, sigma, |x, y| field.thresholds_at(x, y))?;
    ConditionMap::new(frame.id(), frame.width(), frame.height(), data, Some(EdgeParams::Field { field: *field, sigma }))
}
