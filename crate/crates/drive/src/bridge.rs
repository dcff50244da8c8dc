//! Websocket bridge for the browser console: the broker protocol with one
//! envelope per binary message.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use drive_core::wire::decode_envelope;
use tungstenite::{Message, WebSocket};

use crate::broker::{Hub, Pop, Session};

pub const DEFAULT_BRIDGE_PORT: u16 = 7072;
/// How long a connection waits for inbound messages before flushing its
/// outbox again.
const POLL: Duration = Duration::from_millis(2);

pub struct Bridge {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl Bridge {
    pub fn bind(addr: impl ToSocketAddrs, hub: Arc<Hub>) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let accept = {
            let stop = stop.clone();
            thread::Builder::new().name("bridge-accept".into()).spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let (hub, stop) = (hub.clone(), stop.clone());
                            let _ = thread::Builder::new()
                                .name("bridge-conn".into())
                                .spawn(move || serve_ws(stream, hub, stop));
                        }
                        Err(_) => thread::sleep(Duration::from_millis(5)),
                    }
                }
            })?
        };
        Ok(Self { addr, stop, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for Bridge {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn serve_ws(stream: TcpStream, hub: Arc<Hub>, stop: Arc<AtomicBool>) {
    let _ = stream.set_nonblocking(false);
    let _ = stream.set_nodelay(true);
    let Ok(mut ws) = tungstenite::accept(stream) else { return };
    let _ = ws.get_mut().set_read_timeout(Some(POLL));
    let mut session = Session::new(hub);
    let _ = run_ws(&mut ws, &mut session, &stop);
    let _ = ws.close(None);
    let _ = ws.flush();
}

fn run_ws(ws: &mut WebSocket<TcpStream>, session: &mut Session, stop: &AtomicBool) -> tungstenite::Result<()> {
    loop {
        if stop.load(Ordering::SeqCst) {
            return Ok(());
        }
        loop {
            match session.outbox().try_pop() {
                Pop::Item(env) => ws.send(Message::Binary(env.encode().into()))?,
                Pop::Timeout => break,
                Pop::Closed => return Ok(()),
            }
        }
        match ws.read() {
            Ok(Message::Binary(bytes)) => {
                let reply = match decode_envelope(&bytes) {
                    Ok(env) => session.handle(env).err(),
                    Err(e) => Some(Session::framing_error(&e)),
                };
                if let Some(err) = reply {
                    ws.send(Message::Binary(err.encode().into()))?;
                    return Ok(());
                }
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => return Err(e),
        }
    }
}
