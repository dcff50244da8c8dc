//! Stylizer worker server and the pipeline-side remote client.

use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use drive_core::stylizer::{mock_stylize, StageTimings, StyleRequest, StyleResult};
use drive_core::wire::{
    self, decode_error, decode_request, decode_result, error_envelope, request_envelope, result_envelope, Envelope,
    ErrorCode, ErrorMsg, MsgType, HEADER_LEN,
};

use crate::net::{read_envelope, write_envelope, NetError};

pub const DEFAULT_WORKER_ADDR: &str = drive_core::config::DEFAULT_WORKER_ENDPOINT;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(1000);
pub const BACKOFF_MIN: Duration = Duration::from_millis(100);
pub const BACKOFF_MAX: Duration = Duration::from_secs(5);

#[derive(Debug, Clone)]
pub struct WorkerOptions {
    /// Extra time spent "inferring" per request.
    pub delay: Duration,
    pub worker_id: String,
}

impl Default for WorkerOptions {
    fn default() -> Self {
        Self { delay: Duration::ZERO, worker_id: "mock".into() }
    }
}

/// Mock stylizer served over TCP, one request in flight per connection.
pub struct Worker {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    conns: Arc<Mutex<Vec<TcpStream>>>,
    accept: Option<JoinHandle<()>>,
}

impl Worker {
    pub fn bind(addr: impl ToSocketAddrs, opts: WorkerOptions) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let conns: Arc<Mutex<Vec<TcpStream>>> = Arc::default();
        let accept = {
            let (stop, conns) = (stop.clone(), conns.clone());
            thread::Builder::new().name("worker-accept".into()).spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            if let Ok(c) = stream.try_clone() {
                                conns.lock().unwrap().push(c);
                            }
                            let opts = opts.clone();
                            let _ = thread::Builder::new().name("worker-conn".into()).spawn(move || serve(stream, &opts));
                        }
                        Err(_) => thread::sleep(Duration::from_millis(5)),
                    }
                }
            })?
        };
        Ok(Self { addr, stop, conns, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stop accepting and drop every open connection.
    pub fn shutdown(mut self) {
        self.stop_all();
    }

    fn stop_all(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
        for c in self.conns.lock().unwrap().drain(..) {
            let _ = c.shutdown(Shutdown::Both);
        }
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        self.stop_all();
    }
}

/// Answer one request envelope.
pub fn handle_request(env: &Envelope, opts: &WorkerOptions) -> Envelope {
    if env.msg_type != MsgType::StyleRequest {
        return error_envelope(ErrorCode::Protocol, &format!("worker expects StyleRequest, got {:?}", env.msg_type));
    }
    let t0 = Instant::now();
    let req = match decode_request(env) {
        Ok(r) => r,
        Err(e) => return error_envelope(ErrorCode::Malformed, &e.to_string()),
    };
    let t1 = Instant::now();
    let mut res = match mock_stylize(&req) {
        Ok(r) => r,
        Err(e) => return error_envelope(ErrorCode::Worker, &e.to_string()),
    };
    let done = t1 + opts.delay;
    let now = Instant::now();
    if done > now {
        thread::sleep(done - now);
    }
    let t2 = Instant::now();
    let encode_ns = {
        let s = Instant::now();
        let _ = wire::encode_frame(&res.frame);
        s.elapsed().as_nanos() as u64
    };
    res.worker_id = opts.worker_id.clone();
    res.timings = StageTimings {
        decode_ns: (t1 - t0).as_nanos() as u64,
        inference_ns: (t2 - t1).as_nanos() as u64,
        encode_ns,
        total_ns: t0.elapsed().as_nanos() as u64,
    };
    result_envelope(&res).unwrap_or_else(|e| error_envelope(ErrorCode::Worker, &e.to_string()))
}

fn serve(stream: TcpStream, opts: &WorkerOptions) {
    let _ = stream.set_nonblocking(false);
    let _ = stream.set_nodelay(true);
    let mut s = stream;
    loop {
        match read_envelope(&mut s) {
            Ok(env) => {
                let reply = handle_request(&env, opts);
                if write_envelope(&mut s, &reply).is_err() {
                    return;
                }
            }
            Err(NetError::Wire(e)) => {
                // framing is lost; report and hang up
                let _ = write_envelope(&mut s, &error_envelope(ErrorCode::Malformed, &e.to_string()));
                let _ = s.shutdown(Shutdown::Both);
                return;
            }
            Err(_) => return,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RemoteError {
    #[error("worker did not answer within the timeout")]
    Timeout,
    #[error("worker unavailable")]
    Unavailable,
    #[error("worker error {}: {}", .0.code as u16, .0.message)]
    Worker(ErrorMsg),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// Exponential reconnect delay.
#[derive(Debug, Clone, Copy)]
pub struct Backoff {
    next: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Self { next: BACKOFF_MIN }
    }
}

impl Backoff {
    /// Delay to wait after a failure; doubles up to the cap.
    pub fn fail(&mut self) -> Duration {
        let d = self.next;
        self.next = (self.next * 2).min(BACKOFF_MAX);
        d
    }

    pub fn reset(&mut self) {
        self.next = BACKOFF_MIN;
    }
}

/// Client for one worker endpoint with a single outstanding request.
pub struct RemoteStylizer {
    endpoint: String,
    conn: Option<TcpStream>,
    timeout: Duration,
    backoff: Backoff,
    retry_at: Option<Instant>,
}

impl RemoteStylizer {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self { endpoint: endpoint.into(), conn: None, timeout: DEFAULT_TIMEOUT, backoff: Backoff::default(), retry_at: None }
    }

    pub fn with_timeout(mut self, t: Duration) -> Self {
        self.timeout = t;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn is_connected(&self) -> bool {
        self.conn.is_some()
    }

    /// Try to connect now, ignoring the backoff schedule.
    pub fn connect(&mut self) -> Result<(), RemoteError> {
        let addrs: Vec<SocketAddr> = self
            .endpoint
            .to_socket_addrs()
            .map_err(|e| RemoteError::Protocol(format!("bad endpoint {}: {e}", self.endpoint)))?
            .collect();
        for a in addrs {
            if let Ok(s) = TcpStream::connect_timeout(&a, self.timeout) {
                let _ = s.set_nodelay(true);
                self.conn = Some(s);
                self.backoff.reset();
                self.retry_at = None;
                return Ok(());
            }
        }
        self.lost();
        Err(RemoteError::Unavailable)
    }

    fn lost(&mut self) {
        self.conn = None;
        self.retry_at = Some(Instant::now() + self.backoff.fail());
    }

    pub fn stylize(&mut self, req: &StyleRequest) -> Result<StyleResult, RemoteError> {
        if self.conn.is_none() {
            if self.retry_at.is_some_and(|t| Instant::now() < t) {
                return Err(RemoteError::Unavailable);
            }
            self.connect()?;
        }
        let env = request_envelope(req).map_err(|e| RemoteError::Protocol(e.to_string()))?;
        let deadline = Instant::now() + self.timeout;
        let stream = self.conn.as_mut().expect("connected above");
        if write_envelope(stream, &env).is_err() {
            self.lost();
            return Err(RemoteError::Unavailable);
        }
        let reply = match read_with_deadline(stream, deadline) {
            Ok(r) => r,
            Err(e) if e.is_timeout() => {
                // a late reply would desynchronize the stream; start over
                self.conn = None;
                return Err(RemoteError::Timeout);
            }
            Err(NetError::Wire(e)) => {
                self.lost();
                return Err(RemoteError::Protocol(e.to_string()));
            }
            Err(_) => {
                self.lost();
                return Err(RemoteError::Unavailable);
            }
        };
        match reply.msg_type {
            MsgType::StyleResult => {
                let res = decode_result(&reply).map_err(|e| RemoteError::Protocol(e.to_string()))?;
                if res.frame.id() != req.frame.id() {
                    self.conn = None;
                    return Err(RemoteError::Protocol(format!("reply for frame {}, expected {}", res.frame.id(), req.frame.id())));
                }
                Ok(res)
            }
            MsgType::Error => Err(RemoteError::Worker(decode_error(&reply).map_err(|e| RemoteError::Protocol(e.to_string()))?)),
            other => Err(RemoteError::Protocol(format!("unexpected {other:?} reply"))),
        }
    }
}

fn read_exact_deadline(s: &mut TcpStream, buf: &mut [u8], deadline: Instant) -> Result<(), NetError> {
    let mut filled = 0;
    while filled < buf.len() {
        let now = Instant::now();
        if now >= deadline {
            return Err(NetError::Io(io::ErrorKind::TimedOut.into()));
        }
        s.set_read_timeout(Some(deadline - now))?;
        match s.read(&mut buf[filled..]) {
            Ok(0) => return Err(NetError::Closed),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn read_with_deadline(s: &mut TcpStream, deadline: Instant) -> Result<Envelope, NetError> {
    let mut header = [0u8; HEADER_LEN];
    read_exact_deadline(s, &mut header, deadline)?;
    let (msg_type, len) = wire::parse_header(&header)?;
    let mut payload = vec![0u8; len];
    read_exact_deadline(s, &mut payload, deadline)?;
    let _ = s.flush();
    Ok(Envelope { msg_type, payload })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_to_cap() {
        let mut b = Backoff::default();
        let seq: Vec<u64> = (0..8).map(|_| b.fail().as_millis() as u64).collect();
        assert_eq!(seq, [100, 200, 400, 800, 1600, 3200, 5000, 5000]);
        b.reset();
        assert_eq!(b.fail(), BACKOFF_MIN);
    }

    #[test]
    fn worker_rejects_non_requests() {
        let env = Envelope::new(MsgType::ControlUpdate, vec![]).unwrap();
        let reply = handle_request(&env, &WorkerOptions::default());
        assert_eq!(decode_error(&reply).unwrap().code, ErrorCode::Protocol);
        let bad = Envelope::new(MsgType::StyleRequest, vec![1, 2, 3]).unwrap();
        assert_eq!(decode_error(&handle_request(&bad, &WorkerOptions::default())).unwrap().code, ErrorCode::Malformed);
    }

    #[test]
    fn unreachable_endpoint_backs_off() {
        // bind then drop to get a port with nothing listening
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let mut r = RemoteStylizer::new(format!("127.0.0.1:{port}"));
        let f = drive_core::Frame::solid(1, 4, 4, [0, 0, 0]).unwrap();
        let req = StyleRequest::new(f, drive_core::ConditionMap::empty(1, 4, 4), 1);
        assert!(matches!(r.stylize(&req), Err(RemoteError::Unavailable)));
        // inside the backoff window no connection is attempted
        assert!(matches!(r.stylize(&req), Err(RemoteError::Unavailable)));
        assert!(r.retry_at.is_some());
    }
}
