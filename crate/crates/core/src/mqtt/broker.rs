//! In-process MQTT broker for desk-scale deployments and hermetic tests.
//!
//! One reader thread per connection; a writer thread drains a bounded
//! per-client queue so slow subscribers cannot block publishers (a full
//! queue disconnects the subscriber). Downstream delivery is
//! fire-and-forget: exactly-once effect is the job of idempotency keys at
//! the application layer, not broker session state.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::wire::DecodeOutcome;

use super::codec::{mqtt_decode, mqtt_encode, Packet, CONNACK_ACCEPTED, SUBACK_FAILURE};
use super::topic::{filter_is_valid, topic_matches};

/// Deterministic fault schedule for resilience tests.
#[derive(Debug, Clone, Default)]
pub struct FaultPlan {
    /// Drop the broker's PUBACK for every Nth first-transmission QoS 1
    /// publish (1-based count), forcing the publisher to retransmit.
    /// DUP retransmissions are always acknowledged.
    pub drop_puback_every: Option<u64>,
    /// Deliver every Nth routed message to subscribers twice.
    pub duplicate_delivery_every: Option<u64>,
}

struct Subscriber {
    client: u64,
    filter: String,
    max_qos: u8,
    queue: SyncSender<Vec<u8>>,
}

struct BrokerState {
    subscribers: Vec<Subscriber>,
}

pub struct Broker {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    accept_handle: Option<std::thread::JoinHandle<()>>,
}

impl Broker {
    pub fn start(bind: &str) -> std::io::Result<Broker> {
        Broker::start_with_faults(bind, FaultPlan::default())
    }

    pub fn start_with_faults(bind: &str, faults: FaultPlan) -> std::io::Result<Broker> {
        let listener = TcpListener::bind(bind)?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let state = Arc::new(Mutex::new(BrokerState {
            subscribers: Vec::new(),
        }));
        let counters = Arc::new(Counters::default());
        let stop = shutdown.clone();
        let accept_handle = std::thread::Builder::new()
            .name(format!("mqtt-broker-{}", addr.port()))
            .spawn(move || {
                let mut next_client: u64 = 1;
                while !stop.load(Ordering::Acquire) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let id = next_client;
                            next_client += 1;
                            let state = state.clone();
                            let stop = stop.clone();
                            let faults = faults.clone();
                            let counters = counters.clone();
                            std::thread::spawn(move || {
                                serve_connection(stream, id, state, stop, faults, counters)
                            });
                        }
                        Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                            std::thread::sleep(Duration::from_millis(2));
                        }
                        Err(_) => break,
                    }
                }
            })?;
        Ok(Broker {
            addr,
            shutdown,
            accept_handle: Some(accept_handle),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(&mut self) {
        self.shutdown.store(true, Ordering::Release);
        if let Some(h) = self.accept_handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Broker {
    fn drop(&mut self) {
        self.shutdown();
    }
}

#[derive(Default)]
struct Counters {
    qos1_publishes: AtomicU64,
    routed: AtomicU64,
}

fn serve_connection(
    mut stream: TcpStream,
    client_id: u64,
    state: Arc<Mutex<BrokerState>>,
    stop: Arc<AtomicBool>,
    faults: FaultPlan,
    counters: Arc<Counters>,
) {
    let _ = stream.set_nodelay(true);
    let _ = stream.set_read_timeout(Some(Duration::from_millis(50)));

    // Outbound queue drained by a writer thread; bounded so a stuck
    // subscriber is disconnected rather than wedging the broker.
    let (tx, rx): (SyncSender<Vec<u8>>, Receiver<Vec<u8>>) = sync_channel(1024);
    let writer_stream = match stream.try_clone() {
        Ok(s) => s,
        Err(_) => return,
    };
    let writer = std::thread::spawn(move || writer_loop(writer_stream, rx));

    let mut connected = false;
    let mut buf: Vec<u8> = Vec::with_capacity(4096);
    let mut chunk = [0u8; 4096];
    'conn: loop {
        if stop.load(Ordering::Acquire) {
            break;
        }
        loop {
            match mqtt_decode(&buf) {
                Ok(DecodeOutcome::Complete(packet, used)) => {
                    buf.drain(..used);
                    if !handle_packet(
                        packet,
                        &mut connected,
                        client_id,
                        &tx,
                        &state,
                        &faults,
                        &counters,
                    ) {
                        break 'conn;
                    }
                }
                Ok(DecodeOutcome::NeedMore(_)) => break,
                Err(_) => break 'conn, // malformed: close the connection
            }
        }
        match stream.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut => {}
            Err(_) => break,
        }
    }

    state
        .lock()
        .unwrap()
        .subscribers
        .retain(|s| s.client != client_id);
    drop(tx);
    let _ = writer.join();
}

fn writer_loop(mut stream: TcpStream, rx: Receiver<Vec<u8>>) {
    while let Ok(bytes) = rx.recv() {
        if stream.write_all(&bytes).is_err() {
            return;
        }
    }
}

/// Returns false when the connection must close.
fn handle_packet(
    packet: Packet,
    connected: &mut bool,
    client_id: u64,
    tx: &SyncSender<Vec<u8>>,
    state: &Arc<Mutex<BrokerState>>,
    faults: &FaultPlan,
    counters: &Arc<Counters>,
) -> bool {
    if !*connected {
        // First packet must be CONNECT.
        return match packet {
            Packet::Connect { .. } => {
                *connected = true;
                send(tx, &Packet::ConnAck {
                    session_present: false,
                    return_code: CONNACK_ACCEPTED,
                })
            }
            _ => false,
        };
    }
    match packet {
        Packet::Connect { .. } => false, // second CONNECT is a protocol error
        Packet::PingReq => send(tx, &Packet::PingResp),
        Packet::Disconnect => false,
        Packet::Subscribe { packet_id, filters } => {
            let mut codes = Vec::with_capacity(filters.len());
            let mut guard = state.lock().unwrap();
            for (filter, qos) in filters {
                if qos > 1 || !filter_is_valid(&filter) {
                    codes.push(SUBACK_FAILURE);
                    continue;
                }
                guard.subscribers.push(Subscriber {
                    client: client_id,
                    filter,
                    max_qos: qos,
                    queue: tx.clone(),
                });
                codes.push(qos);
            }
            drop(guard);
            send(tx, &Packet::SubAck {
                packet_id,
                return_codes: codes,
            })
        }
        Packet::Publish {
            dup,
            qos,
            topic,
            packet_id,
            payload,
            ..
        } => {
            route(state, faults, counters, &topic, &payload);
            if qos == 1 {
                let drop_ack = if dup {
                    false
                } else {
                    let n = counters.qos1_publishes.fetch_add(1, Ordering::AcqRel) + 1;
                    faults
                        .drop_puback_every
                        .map(|k| k > 0 && n % k == 0)
                        .unwrap_or(false)
                };
                if !drop_ack {
                    return send(tx, &Packet::PubAck {
                        packet_id: packet_id.expect("qos1 carries packet id"),
                    });
                }
            }
            true
        }
        // Subscriber-side acknowledgements: no broker session state.
        Packet::PubAck { .. } => true,
        Packet::ConnAck { .. } | Packet::SubAck { .. } | Packet::PingResp => false,
    }
}

fn route(
    state: &Arc<Mutex<BrokerState>>,
    faults: &FaultPlan,
    counters: &Arc<Counters>,
    topic: &str,
    payload: &[u8],
) {
    let mut dead: Vec<u64> = Vec::new();
    let guard = state.lock().unwrap();
    for sub in guard.subscribers.iter() {
        if !topic_matches(&sub.filter, topic) {
            continue;
        }
        let n = counters.routed.fetch_add(1, Ordering::AcqRel) + 1;
        let copies = if faults
            .duplicate_delivery_every
            .map(|k| k > 0 && n % k == 0)
            .unwrap_or(false)
        {
            2
        } else {
            1
        };
        // Downstream delivery uses the subscription's max QoS; QoS 1
        // deliveries get a broker-assigned packet id.
        let qos = sub.max_qos.min(1);
        for copy in 0..copies {
            let packet = Packet::Publish {
                dup: copy > 0,
                qos,
                retain: false,
                topic: topic.to_string(),
                packet_id: if qos == 1 {
                    Some(((n as u16) & 0x7FFF).max(1))
                } else {
                    None
                },
                payload: payload.to_vec(),
            };
            let bytes = mqtt_encode(&packet).expect("broker builds valid packets");
            match sub.queue.try_send(bytes) {
                Ok(()) => {}
                Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => {
                    dead.push(sub.client);
                }
            }
        }
    }
    drop(guard);
    if !dead.is_empty() {
        state
            .lock()
            .unwrap()
            .subscribers
            .retain(|s| !dead.contains(&s.client));
    }
}

fn send(tx: &SyncSender<Vec<u8>>, packet: &Packet) -> bool {
    let bytes = mqtt_encode(packet).expect("broker builds valid packets");
    tx.try_send(bytes).is_ok()
}
