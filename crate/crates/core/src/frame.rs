//! The frame: a timestamped 8-bit pixel buffer flowing through every stage.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::math::round_u8;

/// Pixel layout of a [`Frame`]. Row-major, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PixelFormat {
    Rgb8 = 0,
    Gray8 = 1,
}

impl PixelFormat {
    pub fn channels(self) -> usize {
        match self {
            PixelFormat::Rgb8 => 3,
            PixelFormat::Gray8 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(PixelFormat::Rgb8),
            1 => Some(PixelFormat::Gray8),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameError {
    ZeroDimension,
    PixelLength { expected: usize, actual: usize },
    SourceIdTooLong(usize),
    WrongFormat { expected: PixelFormat, actual: PixelFormat },
    DimensionMismatch,
    Ppm(String),
}

impl fmt::Display for FrameError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameError::ZeroDimension => f.write_str("zero dimension"),
            FrameError::PixelLength { expected, actual } => {
                write!(f, "pixel buffer has {actual} bytes, expected {expected}")
            }
            FrameError::SourceIdTooLong(n) => write!(f, "source id is {n} bytes, limit is 255"),
            FrameError::WrongFormat { expected, actual } => {
                write!(f, "wrong pixel format: expected {expected:?}, got {actual:?}")
            }
            FrameError::DimensionMismatch => f.write_str("dimension mismatch"),
            FrameError::Ppm(msg) => write!(f, "ppm: {msg}"),
        }
    }
}

impl core::error::Error for FrameError {}

/// An immutable image with identity.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    id: u64,
    ts_ns: u64,
    width: u32,
    height: u32,
    format: PixelFormat,
    pixels: Vec<u8>,
    source_id: String,
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame")
            .field("id", &self.id)
            .field("ts_ns", &self.ts_ns)
            .field("width", &self.width)
            .field("height", &self.height)
            .field("format", &self.format)
            .field("source_id", &self.source_id)
            .finish_non_exhaustive()
    }
}

impl Frame {
    pub fn new(
        id: u64,
        ts_ns: u64,
        width: u32,
        height: u32,
        format: PixelFormat,
        pixels: Vec<u8>,
        source_id: impl Into<String>,
    ) -> Result<Self, FrameError> {
        let source_id = source_id.into();
        if width == 0 || height == 0 {
            return Err(FrameError::ZeroDimension);
        }
        let expected = width as usize * height as usize * format.channels();
        if pixels.len() != expected {
            return Err(FrameError::PixelLength { expected, actual: pixels.len() });
        }
        if source_id.len() > 255 {
            return Err(FrameError::SourceIdTooLong(source_id.len()));
        }
        Ok(Self { id, ts_ns, width, height, format, pixels, source_id })
    }

    pub fn rgb(id: u64, ts_ns: u64, width: u32, height: u32, pixels: Vec<u8>, source_id: &str) -> Result<Self, FrameError> {
        Self::new(id, ts_ns, width, height, PixelFormat::Rgb8, pixels, source_id)
    }

    /// A frame filled with one RGB color.
    pub fn solid(id: u64, width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, FrameError> {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Self::rgb(id, 0, width, height, pixels, "solid")
    }

    pub fn id(&self) -> u64 {
        self.id
    }
    pub fn ts_ns(&self) -> u64 {
        self.ts_ns
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn format(&self) -> PixelFormat {
        self.format
    }
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
    pub fn source_id(&self) -> &str {
        &self.source_id
    }
    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Same image under a new identity.
    pub fn with_identity(mut self, id: u64, ts_ns: u64) -> Self {
        self.id = id;
        self.ts_ns = ts_ns;
        self
    }

    /// Same identity, new pixel buffer of the same shape.
    pub fn with_pixels(&self, pixels: Vec<u8>) -> Result<Self, FrameError> {
        Self::new(self.id, self.ts_ns, self.width, self.height, self.format, pixels, self.source_id.clone())
    }

    /// RGB (or single gray) value at `(x, y)`.
    pub fn rgb_at(&self, x: u32, y: u32) -> [u8; 3] {
        let c = self.format.channels();
        let i = (y as usize * self.width as usize + x as usize) * c;
        match self.format {
            PixelFormat::Rgb8 => [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]],
            PixelFormat::Gray8 => [self.pixels[i]; 3],
        }
    }
}

/// Bilinear resampling with pixel-center alignment: output pixel `j` samples
/// source coordinate `(j + 0.5) * src / dst - 0.5`, clamped to the image.
pub fn resize_bilinear(frame: &Frame, w: u32, h: u32) -> Result<Frame, FrameError> {
    if w == 0 || h == 0 {
        return Err(FrameError::ZeroDimension);
    }
    if w == frame.width && h == frame.height {
        return Ok(frame.clone());
    }
    let c = frame.format.channels();
    let (sw, sh) = (frame.width as usize, frame.height as usize);
    let xs = axis_samples(sw, w as usize);
    let ys = axis_samples(sh, h as usize);
    let src = &frame.pixels;
    let mut out = Vec::with_capacity(w as usize * h as usize * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let p = |x: usize, y: usize| src[(y * sw + x) * c + ch] as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bot = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                out.push(round_u8(top * (1.0 - fy) + bot * fy));
            }
        }
    }
    Frame::new(frame.id, frame.ts_ns, w, h, frame.format, out, frame.source_id.clone())
}

fn axis_samples(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|j| {
            let s = ((j as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = libm::floor(s) as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Encode as binary PPM (`P6`) for RGB or PGM (`P5`) for gray, maxval 255.
pub fn encode_pnm(frame: &Frame) -> Vec<u8> {
    let magic = match frame.format {
        PixelFormat::Rgb8 => "P6",
        PixelFormat::Gray8 => "P5",
    };
    let header = format!("{magic}\n{} {}\n255\n", frame.width, frame.height);
    let mut out = Vec::with_capacity(header.len() + frame.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&frame.pixels);
    out
}

/// Decode a binary `P6`/`P5` image. Identity fields are supplied by the caller.
pub fn decode_pnm(bytes: &[u8], id: u64, ts_ns: u64, source_id: &str) -> Result<Frame, FrameError> {
    let err = |m: &str| FrameError::Ppm(m.to_string());
    let mut pos = 0usize;
    let mut tokens: [u32; 3] = [0; 3];
    if bytes.len() < 2 {
        return Err(err("truncated header"));
    }
    let format = match &bytes[..2] {
        b"P6" => PixelFormat::Rgb8,
        b"P5" => PixelFormat::Gray8,
        _ => return Err(err("not a binary P6/P5 file")),
    };
    pos += 2;
    for tok in tokens.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(err("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(err("expected a number in header"));
        }
        let s = core::str::from_utf8(&bytes[start..pos]).map_err(|_| err("bad header"))?;
        *tok = s.parse().map_err(|_| err("header number out of range"))?;
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(err("missing whitespace after maxval"));
    }
    pos += 1;
    let [w, h, maxval] = tokens;
    if maxval != 255 {
        return Err(FrameError::Ppm(format!("unsupported maxval {maxval}")));
    }
    let expected = w as usize * h as usize * format.channels();
    let data = &bytes[pos..];
    if data.len() != expected {
        return Err(FrameError::Ppm(format!("expected {expected} pixel bytes, found {}", data.len())));
    }
    Frame::new(id, ts_ns, w, h, format, data.to_vec(), source_id)
}

/// Checks the per-source stream invariants: ids strictly increasing and
/// timestamps non-decreasing.
#[derive(Debug, Default, Clone)]
pub struct SourceOrder {
    last: Vec<(String, u64, u64)>,
}

impl SourceOrder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` (and does not record) if `frame` violates ordering.
    pub fn admit(&mut self, frame: &Frame) -> bool {
        match self.last.iter_mut().find(|(s, _, _)| s == frame.source_id()) {
            Some(entry) => {
                if frame.id <= entry.1 || frame.ts_ns < entry.2 {
                    return false;
                }
                entry.1 = frame.id;
                entry.2 = frame.ts_ns;
                true
            }
            None => {
                self.last.push((frame.source_id.clone(), frame.id, frame.ts_ns));
                true
            }
        }
    }
}
