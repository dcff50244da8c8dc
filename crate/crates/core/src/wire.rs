//! The `DRV1` wire protocol.
//!
//! Every message is an envelope: 4-byte magic `DRV1`, version byte `1`, a
//! message-type byte, a big-endian `u32` payload length, then the payload.
//! All integers are big-endian and fixed width, floats are IEEE-754 binary32
//! big-endian. Payload layouts are documented on each codec function.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::conditioning::{ConditionMap, ThresholdField};
use crate::frame::{Frame, PixelFormat};
use crate::metrics::MetricsSnapshot;
use crate::stylizer::{StageTimings, StyleRequest, StyleResult};

pub const MAGIC: [u8; 4] = *b"DRV1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 10;
pub const MAX_PAYLOAD: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Frame = 1,
    ConditionMap = 2,
    StyleRequest = 3,
    StyleResult = 4,
    ControlUpdate = 5,
    MetricsSnapshot = 6,
    Subscribe = 7,
    Error = 8,
}

impl MsgType {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => MsgType::Frame,
            2 => MsgType::ConditionMap,
            3 => MsgType::StyleRequest,
            4 => MsgType::StyleResult,
            5 => MsgType::ControlUpdate,
            6 => MsgType::MetricsSnapshot,
            7 => MsgType::Subscribe,
            8 => MsgType::Error,
            _ => return None,
        })
    }
}

/// The fixed topic set of the broker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Topic {
    FramesRaw,
    FramesCondition,
    FramesStyled,
    Control,
    Metrics,
}

impl Topic {
    pub const ALL: [Topic; 5] = [Topic::FramesRaw, Topic::FramesCondition, Topic::FramesStyled, Topic::Control, Topic::Metrics];

    pub fn name(self) -> &'static str {
        match self {
            Topic::FramesRaw => "frames/raw",
            Topic::FramesCondition => "frames/condition",
            Topic::FramesStyled => "frames/styled",
            Topic::Control => "control",
            Topic::Metrics => "metrics",
        }
    }

    pub fn parse(name: &str) -> Option<Topic> {
        Topic::ALL.into_iter().find(|t| t.name() == name)
    }

    /// Image topics keep only the newest message per subscriber.
    pub fn is_image(self) -> bool {
        matches!(self, Topic::FramesRaw | Topic::FramesCondition | Topic::FramesStyled)
    }

    /// Message type carried on this topic.
    pub fn msg_type(self) -> MsgType {
        match self {
            Topic::FramesRaw | Topic::FramesStyled => MsgType::Frame,
            Topic::FramesCondition => MsgType::ConditionMap,
            Topic::Control => MsgType::ControlUpdate,
            Topic::Metrics => MsgType::MetricsSnapshot,
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireError {
    ShortRead,
    BadMagic,
    BadVersion(u8),
    UnknownType(u8),
    LengthMismatch { declared: usize, available: usize },
    Oversize(usize),
    WrongType { expected: MsgType, got: MsgType },
    InvalidTopic(String),
    Payload(&'static str),
}

impl fmt::Display for WireError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WireError::ShortRead => f.write_str("short read"),
            WireError::BadMagic => f.write_str("bad magic"),
            WireError::BadVersion(v) => write!(f, "bad version {v}"),
            WireError::UnknownType(t) => write!(f, "unknown type {t}"),
            WireError::LengthMismatch { declared, available } => {
                write!(f, "length mismatch: header declares {declared} payload bytes, {available} present")
            }
            WireError::Oversize(n) => write!(f, "payload of {n} bytes exceeds the 16 MiB cap"),
            WireError::WrongType { expected, got } => write!(f, "expected {expected:?} message, got {got:?}"),
            WireError::InvalidTopic(t) => write!(f, "invalid topic {t:?}"),
            WireError::Payload(why) => write!(f, "malformed payload: {why}"),
        }
    }
}

impl core::error::Error for WireError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl Envelope {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Result<Self, WireError> {
        if payload.len() > MAX_PAYLOAD {
            return Err(WireError::Oversize(payload.len()));
        }
        Ok(Self { msg_type, payload })
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.header());
        out.extend_from_slice(&self.payload);
    }

    pub fn header(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[..4].copy_from_slice(&MAGIC);
        h[4] = VERSION;
        h[5] = self.msg_type as u8;
        h[6..].copy_from_slice(&(self.payload.len() as u32).to_be_bytes());
        h
    }

    fn expect(&self, t: MsgType) -> Result<Reader<'_>, WireError> {
        if self.msg_type != t {
            return Err(WireError::WrongType { expected: t, got: self.msg_type });
        }
        Ok(Reader::new(&self.payload))
    }
}

/// Validate a 10-byte header and return the message type and payload length.
pub fn parse_header(bytes: &[u8]) -> Result<(MsgType, usize), WireError> {
    if bytes.len() < HEADER_LEN {
        return Err(WireError::ShortRead);
    }
    if bytes[..4] != MAGIC {
        return Err(WireError::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(WireError::BadVersion(bytes[4]));
    }
    let t = MsgType::from_u8(bytes[5]).ok_or(WireError::UnknownType(bytes[5]))?;
    let len = u32::from_be_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    if len > MAX_PAYLOAD {
        return Err(WireError::Oversize(len));
    }
    Ok((t, len))
}

/// Decode one complete envelope occupying all of `bytes`.
pub fn decode_envelope(bytes: &[u8]) -> Result<Envelope, WireError> {
    let (msg_type, len) = parse_header(bytes)?;
    let available = bytes.len() - HEADER_LEN;
    if available != len {
        return Err(WireError::LengthMismatch { declared: len, available });
    }
    Ok(Envelope { msg_type, payload: bytes[HEADER_LEN..].to_vec() })
}

/// Decode the envelope at the front of `bytes`, returning it and the number
/// of bytes consumed. Never reads past the declared payload.
pub fn decode_prefix(bytes: &[u8]) -> Result<(Envelope, usize), WireError> {
    let (msg_type, len) = parse_header(bytes)?;
    let available = bytes.len() - HEADER_LEN;
    if available < len {
        return Err(WireError::LengthMismatch { declared: len, available });
    }
    let end = HEADER_LEN + len;
    Ok((Envelope { msg_type, payload: bytes[HEADER_LEN..end].to_vec() }, end))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(WireError::Payload("truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_be_bytes(a))
    }

    fn f32(&mut self) -> Result<f32, WireError> {
        Ok(f32::from_bits(self.u32()?))
    }

    fn str8(&mut self) -> Result<String, WireError> {
        let n = self.u8()? as usize;
        let b = self.take(n)?;
        core::str::from_utf8(b).map(|s| s.to_string()).map_err(|_| WireError::Payload("invalid utf-8"))
    }

    fn envelope(&mut self) -> Result<Envelope, WireError> {
        let (env, used) = decode_prefix(&self.buf[self.pos..]).map_err(|e| match e {
            WireError::ShortRead | WireError::LengthMismatch { .. } => WireError::Payload("truncated embedded envelope"),
            other => other,
        })?;
        self.pos += used;
        Ok(env)
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.buf[self.pos..];
        self.pos = self.buf.len();
        s
    }

    fn finish(&self) -> Result<(), WireError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(WireError::Payload("trailing bytes"))
        }
    }
}

fn put_str8(out: &mut Vec<u8>, s: &str) -> Result<(), WireError> {
    if s.len() > 255 {
        return Err(WireError::Payload("string longer than 255 bytes"));
    }
    out.push(s.len() as u8);
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn dim16(v: u32) -> Result<u16, WireError> {
    u16::try_from(v).map_err(|_| WireError::Payload("dimension exceeds u16"))
}

/// Frame payload: `id u64 | ts_ns u64 | width u16 | height u16 | format u8 |
/// source_id (u8 length + bytes) | pixels`.
pub fn frame_envelope(frame: &Frame) -> Result<Envelope, WireError> {
    let mut p = Vec::with_capacity(8 + 8 + 4 + 1 + 1 + frame.source_id().len() + frame.pixels().len());
    p.extend_from_slice(&frame.id().to_be_bytes());
    p.extend_from_slice(&frame.ts_ns().to_be_bytes());
    p.extend_from_slice(&dim16(frame.width())?.to_be_bytes());
    p.extend_from_slice(&dim16(frame.height())?.to_be_bytes());
    p.push(frame.format() as u8);
    put_str8(&mut p, frame.source_id())?;
    p.extend_from_slice(frame.pixels());
    Envelope::new(MsgType::Frame, p)
}

/// Encoded envelope bytes of a frame.
pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, WireError> {
    Ok(frame_envelope(frame)?.encode())
}

pub fn decode_frame(env: &Envelope) -> Result<Frame, WireError> {
    let mut r = env.expect(MsgType::Frame)?;
    let id = r.u64()?;
    let ts = r.u64()?;
    let w = r.u16()? as u32;
    let h = r.u16()? as u32;
    let format = PixelFormat::from_tag(r.u8()?).ok_or(WireError::Payload("unknown pixel format"))?;
    let source = r.str8()?;
    let pixels = r.rest();
    Frame::new(id, ts, w, h, format, pixels.to_vec(), source).map_err(|_| WireError::Payload("pixel data does not match dimensions"))
}

/// Condition payload: `frame_id u64 | width u16 | height u16 | GRAY8 bytes`.
pub fn condition_envelope(map: &ConditionMap) -> Result<Envelope, WireError> {
    let mut p = Vec::with_capacity(12 + map.data().len());
    p.extend_from_slice(&map.frame_id().to_be_bytes());
    p.extend_from_slice(&dim16(map.width())?.to_be_bytes());
    p.extend_from_slice(&dim16(map.height())?.to_be_bytes());
    p.extend_from_slice(map.data());
    Envelope::new(MsgType::ConditionMap, p)
}

/// Decoded maps carry no producer parameters.
pub fn decode_condition(env: &Envelope) -> Result<ConditionMap, WireError> {
    let mut r = env.expect(MsgType::ConditionMap)?;
    let id = r.u64()?;
    let w = r.u16()? as u32;
    let h = r.u16()? as u32;
    let data = r.rest().to_vec();
    ConditionMap::new(id, w, h, data, None).map_err(|_| WireError::Payload("condition data is not a binary map of the stated size"))
}

/// Request payload: `frame envelope | condition envelope | seed u64 |
/// steps u16 | strength f32 | style_id (u8 length + bytes)`.
pub fn request_envelope(req: &StyleRequest) -> Result<Envelope, WireError> {
    let f = frame_envelope(&req.frame)?;
    let c = condition_envelope(&req.condition)?;
    let mut p = Vec::with_capacity(f.encoded_len() + c.encoded_len() + 16 + req.style_id.len());
    f.encode_into(&mut p);
    c.encode_into(&mut p);
    p.extend_from_slice(&req.seed.to_be_bytes());
    p.extend_from_slice(&req.steps.to_be_bytes());
    p.extend_from_slice(&req.strength.to_bits().to_be_bytes());
    put_str8(&mut p, &req.style_id)?;
    Envelope::new(MsgType::StyleRequest, p)
}

pub fn decode_request(env: &Envelope) -> Result<StyleRequest, WireError> {
    let mut r = env.expect(MsgType::StyleRequest)?;
    let frame = decode_frame(&r.envelope()?)?;
    let condition = decode_condition(&r.envelope()?)?;
    let seed = r.u64()?;
    let steps = r.u16()?;
    let strength = r.f32()?;
    let style_id = r.str8()?;
    r.finish()?;
    Ok(StyleRequest { frame, condition, seed, steps, strength, style_id })
}

/// Result payload: `frame envelope | encode_ns u64 | inference_ns u64 |
/// decode_ns u64 | total_ns u64 | worker_id (u8 length + bytes)`.
pub fn result_envelope(res: &StyleResult) -> Result<Envelope, WireError> {
    let f = frame_envelope(&res.frame)?;
    let mut p = Vec::with_capacity(f.encoded_len() + 33 + res.worker_id.len());
    f.encode_into(&mut p);
    let t = &res.timings;
    for v in [t.encode_ns, t.inference_ns, t.decode_ns, t.total_ns] {
        p.extend_from_slice(&v.to_be_bytes());
    }
    put_str8(&mut p, &res.worker_id)?;
    Envelope::new(MsgType::StyleResult, p)
}

pub fn decode_result(env: &Envelope) -> Result<StyleResult, WireError> {
    let mut r = env.expect(MsgType::StyleResult)?;
    let frame = decode_frame(&r.envelope()?)?;
    let timings = StageTimings { encode_ns: r.u64()?, inference_ns: r.u64()?, decode_ns: r.u64()?, total_ns: r.u64()? };
    let worker_id = r.str8()?;
    r.finish()?;
    Ok(StyleResult { frame, timings, worker_id })
}

/// Operator input: driving controls, the enhancement toggle and an optional
/// gaze-driven threshold field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlUpdate {
    pub steer: f32,
    pub throttle: f32,
    pub brake: f32,
    pub enhancement_enabled: bool,
    pub field: Option<ThresholdField>,
}

impl Default for ControlUpdate {
    fn default() -> Self {
        Self { steer: 0.0, throttle: 0.0, brake: 0.0, enhancement_enabled: true, field: None }
    }
}

/// Control payload: `steer f32 | throttle f32 | brake f32 | enhance u8 |
/// has_field u8`, and when `has_field` is 1: `focus_x f32 | focus_y f32 |
/// r_inner f32 | r_outer f32 | fine_low f32 | fine_high f32 | coarse_low f32
/// | coarse_high f32`.
pub fn control_envelope(c: &ControlUpdate) -> Result<Envelope, WireError> {
    let mut p = Vec::with_capacity(14 + 32);
    for v in [c.steer, c.throttle, c.brake] {
        p.extend_from_slice(&v.to_bits().to_be_bytes());
    }
    p.push(c.enhancement_enabled as u8);
    match &c.field {
        None => p.push(0),
        Some(f) => {
            p.push(1);
            let vals = [
                f.focus.0 as f32,
                f.focus.1 as f32,
                f.r_inner as f32,
                f.r_outer as f32,
                f.fine.0,
                f.fine.1,
                f.coarse.0,
                f.coarse.1,
            ];
            for v in vals {
                p.extend_from_slice(&v.to_bits().to_be_bytes());
            }
        }
    }
    Envelope::new(MsgType::ControlUpdate, p)
}

pub fn decode_control(env: &Envelope) -> Result<ControlUpdate, WireError> {
    let mut r = env.expect(MsgType::ControlUpdate)?;
    let steer = r.f32()?;
    let throttle = r.f32()?;
    let brake = r.f32()?;
    let enhancement_enabled = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(WireError::Payload("enhancement flag must be 0 or 1")),
    };
    let field = match r.u8()? {
        0 => None,
        1 => {
            let mut v = [0f32; 8];
            for slot in v.iter_mut() {
                *slot = r.f32()?;
            }
            Some(ThresholdField {
                focus: (v[0] as f64, v[1] as f64),
                r_inner: v[2] as f64,
                r_outer: v[3] as f64,
                fine: (v[4], v[5]),
                coarse: (v[6], v[7]),
            })
        }
        _ => return Err(WireError::Payload("field flag must be 0 or 1")),
    };
    r.finish()?;
    Ok(ControlUpdate { steer, throttle, brake, enhancement_enabled, field })
}

/// Metrics payload: `window_ns u64 | achieved_mfps u64 | drop_rate_ppm u32
/// | p50_ns u64 | p95_ns u64 | p99_ns u64 | frames_in u64 | frames_out u64
/// | frames_dropped u64`.
pub fn metrics_envelope(m: &MetricsSnapshot) -> Result<Envelope, WireError> {
    let mut p = Vec::with_capacity(68);
    p.extend_from_slice(&m.window_ns.to_be_bytes());
    p.extend_from_slice(&m.achieved_mfps.to_be_bytes());
    p.extend_from_slice(&m.drop_rate_ppm.to_be_bytes());
    for v in [m.p50_ns, m.p95_ns, m.p99_ns, m.frames_in, m.frames_out, m.frames_dropped] {
        p.extend_from_slice(&v.to_be_bytes());
    }
    Envelope::new(MsgType::MetricsSnapshot, p)
}

pub fn decode_metrics(env: &Envelope) -> Result<MetricsSnapshot, WireError> {
    let mut r = env.expect(MsgType::MetricsSnapshot)?;
    let m = MetricsSnapshot {
        window_ns: r.u64()?,
        achieved_mfps: r.u64()?,
        drop_rate_ppm: r.u32()?,
        p50_ns: r.u64()?,
        p95_ns: r.u64()?,
        p99_ns: r.u64()?,
        frames_in: r.u64()?,
        frames_out: r.u64()?,
        frames_dropped: r.u64()?,
    };
    r.finish()?;
    Ok(m)
}

/// What a connection registers for on a topic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Role {
    Subscribe = 0,
    Publish = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubscribeMsg {
    pub role: Role,
    pub topic: Topic,
}

/// Subscribe payload: `role u8 (0 = subscribe, 1 = publish) | topic UTF-8`.
pub fn subscribe_envelope(role: Role, topic_name: &str) -> Result<Envelope, WireError> {
    let mut p = Vec::with_capacity(1 + topic_name.len());
    p.push(role as u8);
    p.extend_from_slice(topic_name.as_bytes());
    Envelope::new(MsgType::Subscribe, p)
}

pub fn decode_subscribe(env: &Envelope) -> Result<SubscribeMsg, WireError> {
    let mut r = env.expect(MsgType::Subscribe)?;
    let role = match r.u8()? {
        0 => Role::Subscribe,
        1 => Role::Publish,
        _ => return Err(WireError::Payload("unknown role")),
    };
    let name = core::str::from_utf8(r.rest()).map_err(|_| WireError::Payload("invalid utf-8"))?;
    let topic = Topic::parse(name).ok_or_else(|| WireError::InvalidTopic(name.to_string()))?;
    Ok(SubscribeMsg { role, topic })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum ErrorCode {
    InvalidTopic = 1,
    Malformed = 2,
    Protocol = 3,
    Worker = 4,
    Timeout = 5,
}

impl ErrorCode {
    pub fn from_u16(v: u16) -> Option<Self> {
        Some(match v {
            1 => ErrorCode::InvalidTopic,
            2 => ErrorCode::Malformed,
            3 => ErrorCode::Protocol,
            4 => ErrorCode::Worker,
            5 => ErrorCode::Timeout,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorMsg {
    pub code: ErrorCode,
    pub message: String,
}

/// Error payload: `code u16 | message UTF-8`.
pub fn error_envelope(code: ErrorCode, message: &str) -> Envelope {
    let msg = &message.as_bytes()[..message.len().min(4096)];
    let mut p = Vec::with_capacity(2 + msg.len());
    p.extend_from_slice(&(code as u16).to_be_bytes());
    p.extend_from_slice(msg);
    Envelope { msg_type: MsgType::Error, payload: p }
}

pub fn decode_error(env: &Envelope) -> Result<ErrorMsg, WireError> {
    let mut r = env.expect(MsgType::Error)?;
    let code = ErrorCode::from_u16(r.u16()?).ok_or(WireError::Payload("unknown error code"))?;
    let message = String::from_utf8_lossy(r.rest()).into_owned();
    Ok(ErrorMsg { code, message })
}

/// Frame id carried by an image-topic payload (frames and condition maps
/// both lead with it).
pub fn leading_frame_id(env: &Envelope) -> Option<u64> {
    match env.msg_type {
        MsgType::Frame | MsgType::ConditionMap if env.payload.len() >= 8 => {
            let mut a = [0u8; 8];
            a.copy_from_slice(&env.payload[..8]);
            Some(u64::from_be_bytes(a))
        }
        _ => None,
    }
}
