use std::net::TcpStream;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use drive::bridge::Bridge;
use drive::broker::{Broker, BrokerClient, Hub};
use drive::net::NetError;
use drive_core::frame::Frame;
use drive_core::wire::{
    control_envelope, decode_control, decode_error, decode_envelope, decode_frame, frame_envelope, subscribe_envelope,
    ControlUpdate, ErrorCode, MsgType, Role, Topic,
};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

fn broker() -> Broker {
    Broker::bind("127.0.0.1:0", Hub::new()).unwrap()
}

fn wait_subscribers(hub: &Hub, topic: Topic, n: usize) {
    let t0 = Instant::now();
    while hub.subscriber_count(topic) < n {
        assert!(t0.elapsed() < Duration::from_secs(5), "subscription never registered");
        thread::sleep(Duration::from_millis(2));
    }
}

fn control(i: u32) -> ControlUpdate {
    ControlUpdate { steer: i as f32 / 1000.0, throttle: 0.5, brake: 0.0, enhancement_enabled: i % 2 == 0, field: None }
}

#[test]
fn stalled_image_subscriber_sees_only_recent_frames_in_order() {
    let b = broker();
    let mut sub = BrokerClient::connect(b.local_addr()).unwrap();
    sub.subscribe("frames/raw").unwrap();
    wait_subscribers(b.hub(), Topic::FramesRaw, 1);

    let mut publisher = BrokerClient::connect(b.local_addr()).unwrap();
    publisher.bind_publish(Topic::FramesRaw).unwrap();
    // ~900 KB each, far more than the socket buffers can absorb
    let n = 40u64;
    for id in 1..=n {
        let f = Frame::solid(id, 640, 480, [id as u8, 0, 0]).unwrap();
        publisher.send(&frame_envelope(&f).unwrap()).unwrap();
    }
    thread::sleep(Duration::from_millis(300));

    sub.set_read_timeout(Some(Duration::from_millis(500))).unwrap();
    let mut ids = Vec::new();
    loop {
        match sub.recv() {
            Ok(env) => ids.push(decode_frame(&env).unwrap().id()),
            Err(e) if e.is_timeout() => break,
            Err(e) => panic!("{e}"),
        }
    }
    assert_eq!(*ids.last().unwrap(), n, "newest frame delivered: {ids:?}");
    assert!(ids.windows(2).all(|w| w[0] < w[1]), "{ids:?}");
    assert!((ids.len() as u64) < n, "no coalescing happened: {ids:?}");
}

#[test]
fn control_fans_out_in_order_to_every_subscriber() {
    let b = broker();
    let mut subs: Vec<BrokerClient> = (0..2).map(|_| BrokerClient::connect(b.local_addr()).unwrap()).collect();
    for s in &mut subs {
        s.subscribe("control").unwrap();
    }
    wait_subscribers(b.hub(), Topic::Control, 2);
    let mut publisher = BrokerClient::connect(b.local_addr()).unwrap();
    publisher.bind_publish(Topic::Control).unwrap();
    for i in 0..500 {
        publisher.send(&control_envelope(&control(i)).unwrap()).unwrap();
    }
    for s in &mut subs {
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        let got: Vec<ControlUpdate> = (0..500).map(|_| decode_control(&s.recv().unwrap()).unwrap()).collect();
        assert_eq!(got, (0..500).map(control).collect::<Vec<_>>());
    }
}

#[test]
fn bogus_topic_gets_an_error_then_close() {
    let b = broker();
    let mut c = BrokerClient::connect(b.local_addr()).unwrap();
    c.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    c.subscribe("bogus").unwrap();
    let env = c.recv().unwrap();
    assert_eq!(env.msg_type, MsgType::Error);
    assert_eq!(decode_error(&env).unwrap().code, ErrorCode::InvalidTopic);
    assert!(matches!(c.recv(), Err(NetError::Closed) | Err(NetError::Io(_))));
}

#[test]
fn garbage_bytes_get_a_malformed_error() {
    use std::io::{Read, Write};
    let b = broker();
    let mut s = TcpStream::connect(b.local_addr()).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    s.write_all(b"XXXX\x01\x07\x00\x00\x00\x00").unwrap();
    let mut buf = Vec::new();
    s.read_to_end(&mut buf).unwrap();
    let env = decode_envelope(&buf).unwrap();
    assert_eq!(decode_error(&env).unwrap().code, ErrorCode::Malformed);
}

fn ws_connect(addr: std::net::SocketAddr) -> WebSocket<MaybeTlsStream<TcpStream>> {
    let (ws, _) = tungstenite::connect(format!("ws://{addr}/")).unwrap();
    if let MaybeTlsStream::Plain(s) = ws.get_ref() {
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    }
    ws
}

fn ws_recv(ws: &mut WebSocket<MaybeTlsStream<TcpStream>>) -> drive_core::wire::Envelope {
    loop {
        match ws.read().unwrap() {
            Message::Binary(b) => return decode_envelope(&b).unwrap(),
            Message::Ping(_) | Message::Pong(_) => continue,
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[test]
fn websocket_console_sees_styled_frames_and_publishes_control() {
    let hub = Hub::new();
    let b = Broker::bind("127.0.0.1:0", hub.clone()).unwrap();
    let bridge = Bridge::bind("127.0.0.1:0", hub.clone()).unwrap();

    let mut ws = ws_connect(bridge.local_addr());
    ws.send(Message::Binary(subscribe_envelope(Role::Subscribe, "frames/styled").unwrap().encode().into())).unwrap();
    wait_subscribers(&hub, Topic::FramesStyled, 1);

    let mut styled = BrokerClient::connect(b.local_addr()).unwrap();
    styled.bind_publish(Topic::FramesStyled).unwrap();
    let f = Frame::solid(9, 8, 6, [10, 20, 30]).unwrap();
    styled.send(&frame_envelope(&f).unwrap()).unwrap();
    assert_eq!(decode_frame(&ws_recv(&mut ws)).unwrap(), f);

    // console to pipeline: control published over the websocket
    let mut ctl_sub = BrokerClient::connect(b.local_addr()).unwrap();
    ctl_sub.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    ctl_sub.subscribe("control").unwrap();
    wait_subscribers(&hub, Topic::Control, 1);
    for i in 0..20 {
        ws.send(Message::Binary(control_envelope(&control(i)).unwrap().encode().into())).unwrap();
    }
    for i in 0..20 {
        assert_eq!(decode_control(&ctl_sub.recv().unwrap()).unwrap(), control(i));
    }
}

#[test]
fn websocket_bogus_topic_gets_an_error() {
    let bridge = Bridge::bind("127.0.0.1:0", Hub::new()).unwrap();
    let mut ws = ws_connect(bridge.local_addr());
    ws.send(Message::Binary(subscribe_envelope(Role::Subscribe, "bogus").unwrap().encode().into())).unwrap();
    let env = ws_recv(&mut ws);
    assert_eq!(decode_error(&env).unwrap().code, ErrorCode::InvalidTopic);
    let closed = loop {
        match ws.read() {
            Ok(Message::Close(_)) => continue,
            Ok(other) => panic!("unexpected {other:?}"),
            Err(_) => break true,
        }
    };
    assert!(closed);
}

#[test]
fn hub_is_shared_between_tcp_and_websocket() {
    let hub: Arc<Hub> = Hub::new();
    let _b = Broker::bind("127.0.0.1:0", hub.clone()).unwrap();
    let bridge = Bridge::bind("127.0.0.1:0", hub.clone()).unwrap();
    let mut ws = ws_connect(bridge.local_addr());
    ws.send(Message::Binary(subscribe_envelope(Role::Subscribe, "metrics").unwrap().encode().into())).unwrap();
    wait_subscribers(&hub, Topic::Metrics, 1);
    let m = drive_core::metrics::MetricsSnapshot { frames_in: 3, frames_out: 2, frames_dropped: 1, ..Default::default() };
    hub.publish(Topic::Metrics, drive_core::wire::metrics_envelope(&m).unwrap());
    let got = drive_core::wire::decode_metrics(&ws_recv(&mut ws)).unwrap();
    assert_eq!(got, m);
}
