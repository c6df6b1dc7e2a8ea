//! MQTT 3.1.1 subset: bit-exact codec, topic matching, an in-process
//! broker, and a client with QoS 1 retransmission.
//!
//! Topics used by the system:
//! - `mine/{site}/circuit/{circuit_id}/events` — JSON event documents
//! - `mine/{site}/circuit/{circuit_id}/kpi` — JSON KPI snapshots
//! - `mine/{site}/circuit/{circuit_id}/telemetry` — per-poll summaries
//! - `mine/{site}/imu/{imu_id}/alerts` — unit escalation alerts

pub mod broker;
pub mod client;
pub mod codec;
pub mod topic;

pub use broker::{Broker, FaultPlan};
pub use client::{ClientCfg, InboundMessage, MqttClient, MqttClientError};
pub use codec::{
    mqtt_decode, mqtt_encode, MqttCodecError, Packet, CONNACK_ACCEPTED, SUBACK_FAILURE,
};
pub use topic::{filter_is_valid, topic_matches};

/// Topic helpers shared by publisher and subscriber sides.
pub fn events_topic(site: &str, circuit_id: &str) -> String {
    format!("mine/{site}/circuit/{circuit_id}/events")
}

pub fn kpi_topic(site: &str, circuit_id: &str) -> String {
    format!("mine/{site}/circuit/{circuit_id}/kpi")
}

pub fn telemetry_topic(site: &str, circuit_id: &str) -> String {
    format!("mine/{site}/circuit/{circuit_id}/telemetry")
}

pub fn alerts_topic(site: &str, imu_id: &str) -> String {
    format!("mine/{site}/imu/{imu_id}/alerts")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn cfg() -> ClientCfg {
        ClientCfg {
            ack_timeout: Duration::from_millis(50),
            max_retries: 5,
            connect_timeout: Duration::from_secs(2),
        }
    }

    #[test]
    fn publish_subscribe_qos0() {
        let broker = Broker::start("127.0.0.1:0").unwrap();
        let addr = broker.addr().to_string();
        let sub = MqttClient::connect(&addr, "sub", cfg()).unwrap();
        sub.subscribe("mine/+/circuit/+/events", 0).unwrap();
        let publisher = MqttClient::connect(&addr, "pub", cfg()).unwrap();
        publisher
            .publish(&events_topic("a", "c1"), b"hello", 0)
            .unwrap();
        let msg = sub.recv_timeout(Duration::from_secs(2)).unwrap();
        assert_eq!(msg.topic, "mine/a/circuit/c1/events");
        assert_eq!(msg.payload, b"hello");
    }

    #[test]
    fn qos1_delivery_with_ack() {
        let broker = Broker::start("127.0.0.1:0").unwrap();
        let addr = broker.addr().to_string();
        let sub = MqttClient::connect(&addr, "sub", cfg()).unwrap();
        sub.subscribe("t/#", 1).unwrap();
        let publisher = MqttClient::connect(&addr, "pub", cfg()).unwrap();
        publisher.publish("t/x", b"payload", 1).unwrap();
        let msg = sub.recv_timeout(Duration::from_secs(2)).unwrap();
        assert_eq!(msg.payload, b"payload");
    }

    #[test]
    fn dropped_puback_causes_dup_retransmit() {
        let broker = Broker::start_with_faults(
            "127.0.0.1:0",
            FaultPlan {
                drop_puback_every: Some(1), // drop the first ack of each publish
                duplicate_delivery_every: None,
            },
        )
        .unwrap();
        let addr = broker.addr().to_string();
        let sub = MqttClient::connect(&addr, "sub", cfg()).unwrap();
        sub.subscribe("t/#", 0).unwrap();
        let publisher = MqttClient::connect(&addr, "pub", cfg()).unwrap();

        // Every first transmission loses its PUBACK, so the publish call
        // must retransmit (DUP set on the publisher hop) to succeed.
        // With duplicate-delivery faults off, two delivered copies can
        // only come from two transmissions.
        publisher.publish("t/x", b"evt-1", 1).unwrap();
        std::thread::sleep(Duration::from_millis(150));
        let inbound = sub.drain();
        assert_eq!(inbound.len(), 2, "original + DUP retransmission");
        assert!(inbound.iter().all(|m| m.payload == b"evt-1"));
    }

    #[test]
    fn qos2_subscription_is_refused() {
        let broker = Broker::start("127.0.0.1:0").unwrap();
        let addr = broker.addr().to_string();
        let client = MqttClient::connect(&addr, "c", cfg()).unwrap();
        assert!(matches!(
            client.subscribe("t/#", 2),
            Err(MqttClientError::SubscriptionRefused(_))
        ));
    }

    #[test]
    fn malformed_first_packet_closes_connection() {
        use std::io::{Read, Write};
        let broker = Broker::start("127.0.0.1:0").unwrap();
        let mut raw = std::net::TcpStream::connect(broker.addr()).unwrap();
        // PINGREQ before CONNECT: the broker must drop the connection.
        raw.write_all(&[0xC0, 0x00]).unwrap();
        raw.set_read_timeout(Some(Duration::from_secs(2))).unwrap();
        let mut buf = [0u8; 16];
        let n = raw.read(&mut buf).unwrap_or(0);
        assert_eq!(n, 0, "expected EOF, got {n} bytes");
    }
}
