//! MQTT 3.1.1 packet framing for the subset the system uses: CONNECT,
//! CONNACK, PUBLISH (QoS 0/1), PUBACK, SUBSCRIBE, SUBACK, PINGREQ,
//! PINGRESP, DISCONNECT.
//!
//! QoS 2 publishes and CONNECT credentials/wills are outside the subset
//! and decode as malformed; endpoints close the connection on malformed
//! input. Subscription requests MAY carry a QoS 2 byte on the wire — the
//! broker refuses them in SUBACK.

use thiserror::Error;

use crate::wire::DecodeOutcome;

pub const PROTOCOL_NAME: &str = "MQTT";
pub const PROTOCOL_LEVEL: u8 = 4;

/// CONNACK return codes.
pub const CONNACK_ACCEPTED: u8 = 0x00;
pub const CONNACK_UNACCEPTABLE_PROTOCOL: u8 = 0x01;

/// SUBACK failure return code.
pub const SUBACK_FAILURE: u8 = 0x80;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Connect {
        client_id: String,
        keep_alive_s: u16,
        clean_session: bool,
    },
    ConnAck {
        session_present: bool,
        return_code: u8,
    },
    Publish {
        dup: bool,
        qos: u8,
        retain: bool,
        topic: String,
        packet_id: Option<u16>,
        payload: Vec<u8>,
    },
    PubAck {
        packet_id: u16,
    },
    Subscribe {
        packet_id: u16,
        // (filter, requested qos) — qos 2 requests are carried so the
        // broker can refuse them explicitly.
        filters: Vec<(String, u8)>,
    },
    SubAck {
        packet_id: u16,
        return_codes: Vec<u8>,
    },
    PingReq,
    PingResp,
    Disconnect,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MqttCodecError {
    #[error("malformed packet: {0}")]
    Malformed(String),
    #[error("unsupported packet type {0}")]
    UnsupportedType(u8),
    #[error("QoS {0} unsupported")]
    UnsupportedQos(u8),
}

fn malformed<T>(msg: impl Into<String>) -> Result<T, MqttCodecError> {
    Err(MqttCodecError::Malformed(msg.into()))
}

fn encode_remaining_length(mut len: usize, out: &mut Vec<u8>) {
    loop {
        let mut byte = (len % 128) as u8;
        len /= 128;
        if len > 0 {
            byte |= 0x80;
        }
        out.push(byte);
        if len == 0 {
            break;
        }
    }
}

/// Decode the remaining-length varint. `Ok(None)` means the buffer ends
/// mid-varint.
fn decode_remaining_length(buf: &[u8]) -> Result<Option<(usize, usize)>, MqttCodecError> {
    let mut value = 0usize;
    let mut multiplier = 1usize;
    for (i, &byte) in buf.iter().enumerate().take(4) {
        value += (byte & 0x7f) as usize * multiplier;
        if byte & 0x80 == 0 {
            return Ok(Some((value, i + 1)));
        }
        multiplier *= 128;
    }
    if buf.len() >= 4 {
        return malformed("remaining length varint exceeds 4 bytes");
    }
    Ok(None)
}

fn push_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_be_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8, MqttCodecError> {
        if self.remaining() < 1 {
            return malformed("truncated byte");
        }
        let v = self.buf[self.pos];
        self.pos += 1;
        Ok(v)
    }

    fn u16(&mut self) -> Result<u16, MqttCodecError> {
        if self.remaining() < 2 {
            return malformed("truncated u16");
        }
        let v = u16::from_be_bytes([self.buf[self.pos], self.buf[self.pos + 1]]);
        self.pos += 2;
        Ok(v)
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8], MqttCodecError> {
        if self.remaining() < n {
            return malformed("truncated bytes");
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn string(&mut self) -> Result<String, MqttCodecError> {
        let len = self.u16()? as usize;
        let raw = self.bytes(len)?;
        String::from_utf8(raw.to_vec()).or_else(|_| malformed("invalid UTF-8 string"))
    }
}

/// Encode a packet to wire bytes.
pub fn mqtt_encode(packet: &Packet) -> Result<Vec<u8>, MqttCodecError> {
    let (first, body) = match packet {
        Packet::Connect {
            client_id,
            keep_alive_s,
            clean_session,
        } => {
            let mut body = Vec::with_capacity(12 + client_id.len());
            push_string(&mut body, PROTOCOL_NAME);
            body.push(PROTOCOL_LEVEL);
            body.push(if *clean_session { 0x02 } else { 0x00 });
            body.extend_from_slice(&keep_alive_s.to_be_bytes());
            push_string(&mut body, client_id);
            (0x10u8, body)
        }
        Packet::ConnAck {
            session_present,
            return_code,
        } => (0x20, vec![u8::from(*session_present), *return_code]),
        Packet::Publish {
            dup,
            qos,
            retain,
            topic,
            packet_id,
            payload,
        } => {
            if *qos > 1 {
                return Err(MqttCodecError::UnsupportedQos(*qos));
            }
            if (*qos == 1) != packet_id.is_some() {
                return malformed("packet id present iff QoS 1");
            }
            if topic.contains('+') || topic.contains('#') {
                return malformed("publish topic must not contain wildcards");
            }
            let mut body = Vec::with_capacity(2 + topic.len() + 2 + payload.len());
            push_string(&mut body, topic);
            if let Some(id) = packet_id {
                body.extend_from_slice(&id.to_be_bytes());
            }
            body.extend_from_slice(payload);
            let first = 0x30 | (u8::from(*dup) << 3) | (qos << 1) | u8::from(*retain);
            (first, body)
        }
        Packet::PubAck { packet_id } => (0x40, packet_id.to_be_bytes().to_vec()),
        Packet::Subscribe { packet_id, filters } => {
            if filters.is_empty() {
                return malformed("subscribe requires at least one filter");
            }
            let mut body = Vec::new();
            body.extend_from_slice(&packet_id.to_be_bytes());
            for (filter, qos) in filters {
                push_string(&mut body, filter);
                body.push(*qos);
            }
            (0x82, body) // reserved bits 0b0010 are mandatory
        }
        Packet::SubAck {
            packet_id,
            return_codes,
        } => {
            let mut body = Vec::with_capacity(2 + return_codes.len());
            body.extend_from_slice(&packet_id.to_be_bytes());
            body.extend_from_slice(return_codes);
            (0x90, body)
        }
        Packet::PingReq => (0xC0, Vec::new()),
        Packet::PingResp => (0xD0, Vec::new()),
        Packet::Disconnect => (0xE0, Vec::new()),
    };
    let mut out = Vec::with_capacity(2 + body.len());
    out.push(first);
    encode_remaining_length(body.len(), &mut out);
    out.extend_from_slice(&body);
    Ok(out)
}

/// Decode one packet from the front of `buf`. Strict prefixes of valid
/// encodings always report bytes-needed.
pub fn mqtt_decode(buf: &[u8]) -> Result<DecodeOutcome<Packet>, MqttCodecError> {
    if buf.is_empty() {
        return Ok(DecodeOutcome::NeedMore(2));
    }
    let first = buf[0];
    let Some((remaining, varint_len)) = decode_remaining_length(&buf[1..])? else {
        return Ok(DecodeOutcome::NeedMore(1));
    };
    let total = 1 + varint_len + remaining;
    if buf.len() < total {
        return Ok(DecodeOutcome::NeedMore(total - buf.len()));
    }
    let body = &buf[1 + varint_len..total];
    let mut r = Reader::new(body);
    let packet_type = first >> 4;
    let flags = first & 0x0f;
    let packet = match packet_type {
        1 => {
            if flags != 0 {
                return malformed("CONNECT flags must be 0");
            }
            let name = r.string()?;
            if name != PROTOCOL_NAME {
                return malformed(format!("protocol name {name:?}"));
            }
            let level = r.u8()?;
            if level != PROTOCOL_LEVEL {
                return malformed(format!("protocol level {level}"));
            }
            let connect_flags = r.u8()?;
            if connect_flags & !0x02 != 0 {
                return malformed("will/credential flags outside the subset");
            }
            let keep_alive_s = r.u16()?;
            let client_id = r.string()?;
            Packet::Connect {
                client_id,
                keep_alive_s,
                clean_session: connect_flags & 0x02 != 0,
            }
        }
        2 => {
            let session_present = r.u8()? & 0x01 != 0;
            let return_code = r.u8()?;
            Packet::ConnAck {
                session_present,
                return_code,
            }
        }
        3 => {
            let dup = flags & 0x08 != 0;
            let qos = (flags >> 1) & 0x03;
            let retain = flags & 0x01 != 0;
            if qos > 1 {
                return Err(MqttCodecError::UnsupportedQos(qos));
            }
            let topic = r.string()?;
            if topic.contains('+') || topic.contains('#') {
                return malformed("publish topic must not contain wildcards");
            }
            let packet_id = if qos == 1 { Some(r.u16()?) } else { None };
            let payload = r.bytes(r.remaining())?.to_vec();
            Packet::Publish {
                dup,
                qos,
                retain,
                topic,
                packet_id,
                payload,
            }
        }
        4 => Packet::PubAck {
            packet_id: r.u16()?,
        },
        8 => {
            if flags != 0x02 {
                return malformed("SUBSCRIBE reserved flags must be 0b0010");
            }
            let packet_id = r.u16()?;
            let mut filters = Vec::new();
            while r.remaining() > 0 {
                let filter = r.string()?;
                let qos = r.u8()?;
                if qos > 2 {
                    return malformed("subscribe QoS byte out of range");
                }
                filters.push((filter, qos));
            }
            if filters.is_empty() {
                return malformed("subscribe requires at least one filter");
            }
            Packet::Subscribe { packet_id, filters }
        }
        9 => {
            let packet_id = r.u16()?;
            let return_codes = r.bytes(r.remaining())?.to_vec();
            Packet::SubAck {
                packet_id,
                return_codes,
            }
        }
        12 => Packet::PingReq,
        13 => Packet::PingResp,
        14 => Packet::Disconnect,
        other => return Err(MqttCodecError::UnsupportedType(other)),
    };
    if r.remaining() != 0 {
        return malformed("trailing bytes in packet body");
    }
    Ok(DecodeOutcome::Complete(packet, total))
}
