//! MQTT client: blocking connect/subscribe, QoS 1 publish with DUP
//! retransmission, and a drainable inbound queue.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::atomic::{AtomicBool, AtomicU16, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::wire::DecodeOutcome;

use super::codec::{mqtt_decode, mqtt_encode, Packet, CONNACK_ACCEPTED, SUBACK_FAILURE};

#[derive(Debug, Error)]
pub enum MqttClientError {
    #[error("connection refused: CONNACK code {0}")]
    ConnectionRefused(u8),
    #[error("subscription refused for {0}")]
    SubscriptionRefused(String),
    #[error("no PUBACK after {retries} attempts")]
    PublishTimeout { retries: u32 },
    #[error("connection lost")]
    ConnectionLost,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A publish received from the broker.
#[derive(Debug, Clone)]
pub struct InboundMessage {
    pub topic: String,
    pub payload: Vec<u8>,
    pub dup: bool,
}

#[derive(Debug, Clone)]
pub struct ClientCfg {
    pub ack_timeout: Duration,
    pub max_retries: u32,
    pub connect_timeout: Duration,
}

impl Default for ClientCfg {
    fn default() -> Self {
        ClientCfg {
            ack_timeout: Duration::from_millis(250),
            max_retries: 5,
            connect_timeout: Duration::from_secs(2),
        }
    }
}

enum Control {
    ConnAck(u8),
    PubAck(u16),
    SubAck(u16, Vec<u8>),
}

pub struct MqttClient {
    writer: Mutex<TcpStream>,
    control_rx: Mutex<Receiver<Control>>,
    inbound_rx: Mutex<Receiver<InboundMessage>>,
    next_packet_id: AtomicU16,
    cfg: ClientCfg,
    alive: Arc<AtomicBool>,
    reader_handle: Option<std::thread::JoinHandle<()>>,
}

impl MqttClient {
    /// Connect and complete the CONNECT/CONNACK handshake.
    pub fn connect(addr: &str, client_id: &str, cfg: ClientCfg) -> Result<MqttClient, MqttClientError> {
        let sock_addr: std::net::SocketAddr = addr
            .parse()
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("{e}")))?;
        let stream = TcpStream::connect_timeout(&sock_addr, cfg.connect_timeout)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(Duration::from_millis(50)))?;

        let (control_tx, control_rx) = channel();
        let (inbound_tx, inbound_rx) = channel();
        let alive = Arc::new(AtomicBool::new(true));
        let reader_stream = stream.try_clone()?;
        let writer_for_acks = stream.try_clone()?;
        let reader_alive = alive.clone();
        let reader_handle = std::thread::spawn(move || {
            reader_loop(reader_stream, writer_for_acks, control_tx, inbound_tx, reader_alive)
        });

        let client = MqttClient {
            writer: Mutex::new(stream),
            control_rx: Mutex::new(control_rx),
            inbound_rx: Mutex::new(inbound_rx),
            next_packet_id: AtomicU16::new(1),
            cfg,
            alive,
            reader_handle: Some(reader_handle),
        };

        client.send(&Packet::Connect {
            client_id: client_id.to_string(),
            keep_alive_s: 60,
            clean_session: true,
        })?;
        let deadline = Instant::now() + client.cfg.connect_timeout;
        loop {
            match client.wait_control(deadline)? {
                Control::ConnAck(code) if code == CONNACK_ACCEPTED => break,
                Control::ConnAck(code) => return Err(MqttClientError::ConnectionRefused(code)),
                _ => continue,
            }
        }
        Ok(client)
    }

    /// Subscribe and block until the broker acknowledges.
    pub fn subscribe(&self, filter: &str, qos: u8) -> Result<(), MqttClientError> {
        let packet_id = self.take_packet_id();
        self.send(&Packet::Subscribe {
            packet_id,
            filters: vec![(filter.to_string(), qos)],
        })?;
        let deadline = Instant::now() + self.cfg.connect_timeout;
        loop {
            match self.wait_control(deadline)? {
                Control::SubAck(id, codes) if id == packet_id => {
                    if codes.iter().any(|&c| c == SUBACK_FAILURE) {
                        return Err(MqttClientError::SubscriptionRefused(filter.to_string()));
                    }
                    return Ok(());
                }
                _ => continue,
            }
        }
    }

    /// Publish. QoS 1 blocks until PUBACK, retransmitting with DUP set
    /// after each ack timeout.
    pub fn publish(&self, topic: &str, payload: &[u8], qos: u8) -> Result<(), MqttClientError> {
        if qos == 0 {
            return self.send(&Packet::Publish {
                dup: false,
                qos: 0,
                retain: false,
                topic: topic.to_string(),
                packet_id: None,
                payload: payload.to_vec(),
            });
        }
        let packet_id = self.take_packet_id();
        for attempt in 0..=self.cfg.max_retries {
            self.send(&Packet::Publish {
                dup: attempt > 0,
                qos: 1,
                retain: false,
                topic: topic.to_string(),
                packet_id: Some(packet_id),
                payload: payload.to_vec(),
            })?;
            let deadline = Instant::now() + self.cfg.ack_timeout;
            loop {
                match self.wait_control(deadline) {
                    Ok(Control::PubAck(id)) if id == packet_id => return Ok(()),
                    Ok(_) => continue, // stale ack from an earlier attempt
                    Err(MqttClientError::PublishTimeout { .. }) => break,
                    Err(e) => return Err(e),
                }
            }
        }
        Err(MqttClientError::PublishTimeout {
            retries: self.cfg.max_retries,
        })
    }

    /// Nonblocking receive of the next inbound publish.
    pub fn try_recv(&self) -> Option<InboundMessage> {
        self.inbound_rx.lock().unwrap().try_recv().ok()
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<InboundMessage> {
        self.inbound_rx.lock().unwrap().recv_timeout(timeout).ok()
    }

    /// Drain everything currently queued.
    pub fn drain(&self) -> Vec<InboundMessage> {
        let rx = self.inbound_rx.lock().unwrap();
        let mut out = Vec::new();
        while let Ok(m) = rx.try_recv() {
            out.push(m);
        }
        out
    }

    pub fn is_alive(&self) -> bool {
        self.alive.load(Ordering::Acquire)
    }

    fn take_packet_id(&self) -> u16 {
        loop {
            let id = self.next_packet_id.fetch_add(1, Ordering::AcqRel);
            if id != 0 {
                return id;
            }
        }
    }

    fn send(&self, packet: &Packet) -> Result<(), MqttClientError> {
        let bytes = mqtt_encode(packet).expect("client builds valid packets");
        let mut w = self.writer.lock().unwrap();
        w.write_all(&bytes).map_err(|_| MqttClientError::ConnectionLost)
    }

    fn wait_control(&self, deadline: Instant) -> Result<Control, MqttClientError> {
        let rx = self.control_rx.lock().unwrap();
        let now = Instant::now();
        let timeout = deadline.saturating_duration_since(now);
        match rx.recv_timeout(timeout) {
            Ok(c) => Ok(c),
            Err(RecvTimeoutError::Timeout) => Err(MqttClientError::PublishTimeout { retries: 0 }),
            Err(RecvTimeoutError::Disconnected) => Err(MqttClientError::ConnectionLost),
        }
    }
}

impl Drop for MqttClient {
    fn drop(&mut self) {
        let _ = self.send(&Packet::Disconnect);
        self.alive.store(false, Ordering::Release);
        if let Ok(w) = self.writer.lock() {
            let _ = w.shutdown(std::net::Shutdown::Both);
        }
        if let Some(h) = self.reader_handle.take() {
            let _ = h.join();
        }
    }
}

fn reader_loop(
    mut stream: TcpStream,
    mut ack_writer: TcpStream,
    control_tx: Sender<Control>,
    inbound_tx: Sender<InboundMessage>,
    alive: Arc<AtomicBool>,
) {
    let mut buf: Vec<u8> = Vec::with_capacity(4096);
    let mut chunk = [0u8; 4096];
    loop {
        if !alive.load(Ordering::Acquire) {
            return;
        }
        loop {
            match mqtt_decode(&buf) {
                Ok(DecodeOutcome::Complete(packet, used)) => {
                    buf.drain(..used);
                    match packet {
                        Packet::ConnAck { return_code, .. } => {
                            let _ = control_tx.send(Control::ConnAck(return_code));
                        }
                        Packet::PubAck { packet_id } => {
                            let _ = control_tx.send(Control::PubAck(packet_id));
                        }
                        Packet::SubAck {
                            packet_id,
                            return_codes,
                        } => {
                            let _ = control_tx.send(Control::SubAck(packet_id, return_codes));
                        }
                        Packet::Publish {
                            dup,
                            qos,
                            topic,
                            packet_id,
                            payload,
                            ..
                        } => {
                            if qos == 1 {
                                if let Some(id) = packet_id {
                                    let ack = mqtt_encode(&Packet::PubAck { packet_id: id })
                                        .expect("valid puback");
                                    let _ = ack_writer.write_all(&ack);
                                }
                            }
                            let _ = inbound_tx.send(InboundMessage { topic, payload, dup });
                        }
                        Packet::PingResp | Packet::PingReq => {}
                        Packet::Disconnect | Packet::Connect { .. } | Packet::Subscribe { .. } => {
                            alive.store(false, Ordering::Release);
                            return;
                        }
                    }
                }
                Ok(DecodeOutcome::NeedMore(_)) => break,
                Err(_) => {
                    alive.store(false, Ordering::Release);
                    return;
                }
            }
        }
        match stream.read(&mut chunk) {
            Ok(0) => {
                alive.store(false, Ordering::Release);
                return;
            }
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut => {}
            Err(_) => {
                alive.store(false, Ordering::Release);
                return;
            }
        }
    }
}
