//! Destinations for pipeline output.

use std::net::ToSocketAddrs;
use std::sync::{Arc, Mutex};

use drive_core::metrics::MetricsSnapshot;
use drive_core::wire::{condition_envelope, frame_envelope, metrics_envelope, Topic};
use sha2::{Digest, Sha256};

use crate::broker::{BrokerClient, Hub};
use crate::net::NetError;
use crate::pipeline::Output;

pub trait Sink: Send {
    fn publish(&mut self, out: &Output);
    fn metrics(&mut self, _snapshot: &MetricsSnapshot) {}
}

/// Publishes to an in-process broker hub.
pub struct HubSink {
    hub: Arc<Hub>,
}

impl HubSink {
    pub fn new(hub: Arc<Hub>) -> Self {
        Self { hub }
    }
}

impl Sink for HubSink {
    fn publish(&mut self, out: &Output) {
        if let Ok(e) = frame_envelope(&out.raw) {
            self.hub.publish(Topic::FramesRaw, e);
        }
        if let Ok(e) = condition_envelope(&out.condition) {
            self.hub.publish(Topic::FramesCondition, e);
        }
        if let Ok(e) = frame_envelope(&out.styled) {
            self.hub.publish(Topic::FramesStyled, e);
        }
    }

    fn metrics(&mut self, s: &MetricsSnapshot) {
        if let Ok(e) = metrics_envelope(s) {
            self.hub.publish(Topic::Metrics, e);
        }
    }
}

/// Publishes to an external broker, one connection per topic.
pub struct TcpSink {
    raw: BrokerClient,
    condition: BrokerClient,
    styled: BrokerClient,
    metrics: BrokerClient,
}

impl TcpSink {
    pub fn connect(addr: impl ToSocketAddrs + Copy) -> Result<Self, NetError> {
        let open = |t: Topic| -> Result<BrokerClient, NetError> {
            let mut c = BrokerClient::connect(addr)?;
            c.bind_publish(t)?;
            Ok(c)
        };
        Ok(Self {
            raw: open(Topic::FramesRaw)?,
            condition: open(Topic::FramesCondition)?,
            styled: open(Topic::FramesStyled)?,
            metrics: open(Topic::Metrics)?,
        })
    }
}

impl Sink for TcpSink {
    fn publish(&mut self, out: &Output) {
        // a lost broker must not stop the loop; frames are simply not delivered
        if let Ok(e) = frame_envelope(&out.raw) {
            let _ = self.raw.send(&e);
        }
        if let Ok(e) = condition_envelope(&out.condition) {
            let _ = self.condition.send(&e);
        }
        if let Ok(e) = frame_envelope(&out.styled) {
            let _ = self.styled.send(&e);
        }
    }

    fn metrics(&mut self, s: &MetricsSnapshot) {
        if let Ok(e) = metrics_envelope(s) {
            let _ = self.metrics.send(&e);
        }
    }
}

/// Keeps every output in memory. Meant for tests and small runs.
#[derive(Clone, Default)]
pub struct CollectSink {
    outputs: Arc<Mutex<Vec<Output>>>,
    snapshots: Arc<Mutex<Vec<MetricsSnapshot>>>,
}

impl CollectSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn outputs(&self) -> Vec<Output> {
        self.outputs.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn snapshots(&self) -> Vec<MetricsSnapshot> {
        self.snapshots.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl Sink for CollectSink {
    fn publish(&mut self, out: &Output) {
        self.outputs.lock().unwrap_or_else(|e| e.into_inner()).push(out.clone());
    }

    fn metrics(&mut self, s: &MetricsSnapshot) {
        self.snapshots.lock().unwrap_or_else(|e| e.into_inner()).push(*s);
    }
}

/// SHA-256 over the concatenated styled pixel buffers, in output order.
#[derive(Clone, Default)]
pub struct HashSink {
    state: Arc<Mutex<(Sha256, u64)>>,
}

impl HashSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn frames(&self) -> u64 {
        self.state.lock().unwrap_or_else(|e| e.into_inner()).1
    }

    pub fn hex_digest(&self) -> String {
        let s = self.state.lock().unwrap_or_else(|e| e.into_inner());
        hex::encode(s.0.clone().finalize())
    }
}

impl Sink for HashSink {
    fn publish(&mut self, out: &Output) {
        let mut s = self.state.lock().unwrap_or_else(|e| e.into_inner());
        s.0.update(out.styled.pixels());
        s.1 += 1;
    }
}
