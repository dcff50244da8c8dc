//! Runtime for the drive stylization loop: broker, websocket bridge, worker
//! transport, pipeline threads, file formats and the command line.

pub use drive_core as core;

pub mod bridge;
pub mod broker;
pub mod cell;
pub mod cli;
pub mod io;
pub mod net;
pub mod pipeline;
pub mod sink;
pub mod source;
pub mod worker;
