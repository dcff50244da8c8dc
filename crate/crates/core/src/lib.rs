//! Core of the DRIVE frame-enhancement pipeline.
//!
//! Everything in this crate is pure computation over owned buffers: frame
//! types and resampling, the `DRV1` wire codec, Canny edge conditioning, the
//! deterministic mock stylizer, the desk-scale driving simulator and the
//! trajectory metrics used to score driving sessions. It needs `alloc` but
//! not `std`; sockets, threads, clocks and files live in the `drive` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod conditioning;
pub mod config;
pub mod evaluation;
pub mod frame;
pub mod geometry;
pub mod manifest;
pub mod math;
pub mod metrics;
pub mod simworld;
pub mod stylizer;
pub mod wire;

pub use conditioning::{canny, canny_spatially_varying, ConditionMap, GrayImage, ThresholdField};
pub use config::PipelineConfig;
pub use frame::{Frame, FrameError, PixelFormat};
pub use manifest::FrameManifest;
pub use stylizer::{mock_stylize, seed_for_frame, SeedPolicy, StyleRequest, StyleResult};
pub use wire::{Envelope, MsgType, Topic, WireError};
