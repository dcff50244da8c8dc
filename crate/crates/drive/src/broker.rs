//! Topic broker: TCP pub/sub over envelopes.
//!
//! A connection registers with a Subscribe envelope (role 0 subscribes to a
//! topic, role 1 binds the topic its data envelopes are published to).
//! Each connection owns an [`Outbox`]; image topics keep only the newest
//! envelope per subscriber, `control` and `metrics` queue everything in
//! order. Publishing only ever takes the outbox lock briefly, so a stalled
//! subscriber never slows a publisher.

use std::collections::VecDeque;
use std::io;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, Weak};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use drive_core::wire::{
    decode_subscribe, error_envelope, leading_frame_id, subscribe_envelope, Envelope, ErrorCode, MsgType,
    Role, Topic, WireError,
};

use crate::net::{read_envelope, write_envelope, NetError};

pub const DEFAULT_BROKER_ADDR: &str = "127.0.0.1:7071";
pub const BROKER_ADDR_ENV: &str = "DRIVE_BROKER_ADDR";

fn image_slot(topic: Topic) -> Option<usize> {
    match topic {
        Topic::FramesRaw => Some(0),
        Topic::FramesCondition => Some(1),
        Topic::FramesStyled => Some(2),
        Topic::Control | Topic::Metrics => None,
    }
}

#[derive(Default)]
struct OutboxState {
    latest: [Option<Arc<Envelope>>; 3],
    delivered: [Option<u64>; 3],
    ordered: VecDeque<Arc<Envelope>>,
    /// No more pushes; drain then report closed.
    finishing: bool,
    closed: bool,
}

/// Per-subscriber delivery buffer.
#[derive(Default)]
pub struct Outbox {
    state: Mutex<OutboxState>,
    cv: Condvar,
}

#[derive(Debug)]
pub enum Pop {
    Item(Arc<Envelope>),
    Timeout,
    Closed,
}

impl Outbox {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn push(&self, topic: Topic, env: Arc<Envelope>) {
        let mut s = self.state.lock().unwrap();
        if s.finishing || s.closed {
            return;
        }
        match image_slot(topic) {
            Some(i) => {
                if let Some(id) = leading_frame_id(&env) {
                    // ids on an image topic never go backwards for a subscriber
                    if s.delivered[i].is_some_and(|d| id <= d) {
                        return;
                    }
                    if s.latest[i].as_ref().and_then(|e| leading_frame_id(e)).is_some_and(|held| id < held) {
                        return;
                    }
                }
                s.latest[i] = Some(env);
            }
            None => s.ordered.push_back(env),
        }
        self.cv.notify_one();
    }

    /// Queue a final message and close once everything queued is written.
    pub fn finish_with(&self, env: Envelope) {
        let mut s = self.state.lock().unwrap();
        s.ordered.push_back(Arc::new(env));
        s.finishing = true;
        self.cv.notify_all();
    }

    pub fn close(&self) {
        self.state.lock().unwrap().closed = true;
        self.cv.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().unwrap().closed
    }

    fn pop_locked(s: &mut OutboxState) -> Option<Arc<Envelope>> {
        if let Some(e) = s.ordered.pop_front() {
            return Some(e);
        }
        for i in 0..3 {
            if let Some(e) = s.latest[i].take() {
                s.delivered[i] = leading_frame_id(&e).or(s.delivered[i]);
                return Some(e);
            }
        }
        None
    }

    pub fn try_pop(&self) -> Pop {
        let mut s = self.state.lock().unwrap();
        match Self::pop_locked(&mut s) {
            Some(e) => Pop::Item(e),
            None if s.closed || s.finishing => Pop::Closed,
            None => Pop::Timeout,
        }
    }

    /// Wait for the next envelope; `None` waits indefinitely.
    pub fn pop_wait(&self, timeout: Option<Duration>) -> Pop {
        let deadline = timeout.map(|t| Instant::now() + t);
        let mut s = self.state.lock().unwrap();
        loop {
            if s.closed {
                return Pop::Closed;
            }
            if let Some(e) = Self::pop_locked(&mut s) {
                return Pop::Item(e);
            }
            if s.finishing {
                return Pop::Closed;
            }
            match deadline {
                None => s = self.cv.wait(s).unwrap(),
                Some(d) => {
                    let now = Instant::now();
                    if now >= d {
                        return Pop::Timeout;
                    }
                    s = self.cv.wait_timeout(s, d - now).unwrap().0;
                }
            }
        }
    }

    /// Envelopes currently held (image slots plus ordered queue).
    pub fn held(&self) -> usize {
        let s = self.state.lock().unwrap();
        s.latest.iter().flatten().count() + s.ordered.len()
    }
}

/// Topic registry shared by every connection of one broker.
#[derive(Default)]
pub struct Hub {
    subs: Mutex<Vec<(Topic, Weak<Outbox>)>>,
}

impl Hub {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn subscribe(&self, topic: Topic, outbox: &Arc<Outbox>) {
        let mut subs = self.subs.lock().unwrap();
        if !subs.iter().any(|(t, w)| *t == topic && w.as_ptr() == Arc::as_ptr(outbox)) {
            subs.push((topic, Arc::downgrade(outbox)));
        }
    }

    pub fn publish(&self, topic: Topic, env: Envelope) {
        let env = Arc::new(env);
        let targets: Vec<Arc<Outbox>> = {
            let mut subs = self.subs.lock().unwrap();
            subs.retain(|(_, w)| w.upgrade().is_some_and(|o| !o.is_closed()));
            subs.iter().filter(|(t, _)| *t == topic).filter_map(|(_, w)| w.upgrade()).collect()
        };
        for o in targets {
            o.push(topic, env.clone());
        }
    }

    pub fn subscriber_count(&self, topic: Topic) -> usize {
        let subs = self.subs.lock().unwrap();
        subs.iter().filter(|(t, w)| *t == topic && w.upgrade().is_some()).count()
    }
}

/// Protocol state of one broker connection, shared by the TCP and
/// websocket front ends.
pub struct Session {
    hub: Arc<Hub>,
    outbox: Arc<Outbox>,
    publish_topic: Option<Topic>,
}

impl Session {
    pub fn new(hub: Arc<Hub>) -> Self {
        Self { hub, outbox: Outbox::new(), publish_topic: None }
    }

    pub fn outbox(&self) -> &Arc<Outbox> {
        &self.outbox
    }

    /// Apply one inbound envelope. An `Err` carries the Error envelope to
    /// send before the connection is closed.
    pub fn handle(&mut self, env: Envelope) -> Result<(), Envelope> {
        match env.msg_type {
            MsgType::Subscribe => match decode_subscribe(&env) {
                Ok(m) => {
                    match m.role {
                        Role::Subscribe => self.hub.subscribe(m.topic, &self.outbox),
                        Role::Publish => self.publish_topic = Some(m.topic),
                    }
                    Ok(())
                }
                Err(WireError::InvalidTopic(t)) => {
                    Err(error_envelope(ErrorCode::InvalidTopic, &format!("invalid topic {t:?}")))
                }
                Err(e) => Err(error_envelope(ErrorCode::Malformed, &e.to_string())),
            },
            MsgType::Frame | MsgType::ConditionMap | MsgType::ControlUpdate | MsgType::MetricsSnapshot => {
                let topic = match (self.publish_topic, env.msg_type) {
                    (Some(t), m) if t.msg_type() == m => t,
                    (_, MsgType::ConditionMap) => Topic::FramesCondition,
                    (_, MsgType::ControlUpdate) => Topic::Control,
                    (_, MsgType::MetricsSnapshot) => Topic::Metrics,
                    _ => {
                        return Err(error_envelope(
                            ErrorCode::Protocol,
                            "frame published without a bound frames/raw or frames/styled topic",
                        ))
                    }
                };
                if topic.is_image() && leading_frame_id(&env).is_none() {
                    return Err(error_envelope(ErrorCode::Malformed, "image payload shorter than its id"));
                }
                self.hub.publish(topic, env);
                Ok(())
            }
            other => Err(error_envelope(ErrorCode::Protocol, &format!("{other:?} is not accepted by the broker"))),
        }
    }

    /// Inbound bytes could not be framed.
    pub fn framing_error(e: &WireError) -> Envelope {
        error_envelope(ErrorCode::Malformed, &e.to_string())
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.outbox.close();
    }
}

/// Running TCP broker.
pub struct Broker {
    addr: SocketAddr,
    hub: Arc<Hub>,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl Broker {
    pub fn bind(addr: impl ToSocketAddrs, hub: Arc<Hub>) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let accept = {
            let (hub, stop) = (hub.clone(), stop.clone());
            thread::Builder::new().name("broker-accept".into()).spawn(move || accept_loop(listener, hub, stop))?
        };
        Ok(Self { addr, hub, stop, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Broker {
    fn drop(&mut self) {
        self.stop_accepting();
    }
}

fn accept_loop(listener: TcpListener, hub: Arc<Hub>, stop: Arc<AtomicBool>) {
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let hub = hub.clone();
                let _ = thread::Builder::new().name("broker-conn".into()).spawn(move || serve_tcp(stream, hub));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(_) => thread::sleep(Duration::from_millis(5)),
        }
    }
}

fn serve_tcp(stream: TcpStream, hub: Arc<Hub>) {
    let _ = stream.set_nonblocking(false);
    let _ = stream.set_nodelay(true);
    let Ok(mut wstream) = stream.try_clone() else { return };
    let mut session = Session::new(hub);
    let outbox = session.outbox().clone();
    let writer = thread::spawn(move || {
        while let Pop::Item(e) = outbox.pop_wait(None) {
            if write_envelope(&mut wstream, &e).is_err() {
                break;
            }
        }
        outbox.close();
        let _ = wstream.shutdown(Shutdown::Both);
    });
    let mut rstream = stream;
    loop {
        match read_envelope(&mut rstream) {
            Ok(env) => {
                if let Err(reply) = session.handle(env) {
                    session.outbox().finish_with(reply);
                    break;
                }
            }
            Err(NetError::Wire(e)) => {
                session.outbox().finish_with(Session::framing_error(&e));
                break;
            }
            Err(_) => {
                session.outbox().close();
                break;
            }
        }
    }
    let _ = writer.join();
}

/// Blocking broker client.
pub struct BrokerClient {
    stream: TcpStream,
}

impl BrokerClient {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self { stream })
    }

    pub fn subscribe(&mut self, topic: &str) -> Result<(), NetError> {
        self.send(&subscribe_envelope(Role::Subscribe, topic)?)
    }

    pub fn bind_publish(&mut self, topic: Topic) -> Result<(), NetError> {
        self.send(&subscribe_envelope(Role::Publish, topic.name())?)
    }

    pub fn send(&mut self, env: &Envelope) -> Result<(), NetError> {
        write_envelope(&mut self.stream, env)
    }

    pub fn recv(&mut self) -> Result<Envelope, NetError> {
        read_envelope(&mut self.stream)
    }

    pub fn set_read_timeout(&self, t: Option<Duration>) -> io::Result<()> {
        self.stream.set_read_timeout(t)
    }

    pub fn try_clone(&self) -> io::Result<Self> {
        Ok(Self { stream: self.stream.try_clone()? })
    }
}

/// Broker address from the environment, else the default.
pub fn broker_addr_from_env() -> String {
    std::env::var(BROKER_ADDR_ENV).unwrap_or_else(|_| DEFAULT_BROKER_ADDR.to_string())
}
