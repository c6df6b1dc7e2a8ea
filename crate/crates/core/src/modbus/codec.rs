//! MBAP framing for the Modbus-TCP subset: function 0x03 (read holding
//! registers) and 0x06 (write single register), plus exception responses.
//! All integers are big-endian.

use thiserror::Error;

use crate::wire::DecodeOutcome;

pub const FN_READ_HOLDING: u8 = 0x03;
pub const FN_WRITE_SINGLE: u8 = 0x06;

pub const EX_ILLEGAL_FUNCTION: u8 = 0x01;
pub const EX_ILLEGAL_ADDRESS: u8 = 0x02;

/// Maximum registers per read request.
pub const MAX_READ_COUNT: u16 = 125;

const HEADER_LEN: usize = 7; // transaction + protocol + length + unit
const MAX_LENGTH_FIELD: usize = 254;

/// A raw MBAP frame: function code plus opaque payload. Request/response
/// interpretation is direction-dependent and layered on top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModbusFrame {
    pub transaction_id: u16,
    pub protocol_id: u16,
    pub unit_id: u8,
    pub function: u8,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModbusCodecError {
    #[error("protocol id must be 0, got {0}")]
    BadProtocolId(u16),
    #[error("unsupported function code 0x{0:02x}")]
    UnsupportedFunction(u8),
    #[error("MBAP length field {0} out of range")]
    BadLength(usize),
    #[error("payload of {got} bytes does not fit function 0x{function:02x}")]
    BadPayload { function: u8, got: usize },
}

impl ModbusFrame {
    pub fn new(transaction_id: u16, unit_id: u8, function: u8, payload: Vec<u8>) -> Self {
        ModbusFrame {
            transaction_id,
            protocol_id: 0,
            unit_id,
            function,
            payload,
        }
    }

    /// Read-holding request frame.
    pub fn read_request(transaction_id: u16, unit_id: u8, start: u16, count: u16) -> Self {
        let mut payload = Vec::with_capacity(4);
        payload.extend_from_slice(&start.to_be_bytes());
        payload.extend_from_slice(&count.to_be_bytes());
        ModbusFrame::new(transaction_id, unit_id, FN_READ_HOLDING, payload)
    }

    /// Read-holding response frame.
    pub fn read_response(transaction_id: u16, unit_id: u8, values: &[u16]) -> Self {
        let mut payload = Vec::with_capacity(1 + values.len() * 2);
        payload.push((values.len() * 2) as u8);
        for v in values {
            payload.extend_from_slice(&v.to_be_bytes());
        }
        ModbusFrame::new(transaction_id, unit_id, FN_READ_HOLDING, payload)
    }

    /// Write-single frame (request and response share the layout).
    pub fn write_single(transaction_id: u16, unit_id: u8, address: u16, value: u16) -> Self {
        let mut payload = Vec::with_capacity(4);
        payload.extend_from_slice(&address.to_be_bytes());
        payload.extend_from_slice(&value.to_be_bytes());
        ModbusFrame::new(transaction_id, unit_id, FN_WRITE_SINGLE, payload)
    }

    /// Exception response for `function` with the given code.
    pub fn exception(transaction_id: u16, unit_id: u8, function: u8, code: u8) -> Self {
        ModbusFrame::new(transaction_id, unit_id, function | 0x80, vec![code])
    }

    pub fn is_exception(&self) -> bool {
        self.function & 0x80 != 0
    }

    pub fn exception_code(&self) -> Option<u8> {
        if self.is_exception() {
            self.payload.first().copied()
        } else {
            None
        }
    }
}

/// Encode a frame as MBAP bytes.
pub fn modbus_encode(frame: &ModbusFrame) -> Result<Vec<u8>, ModbusCodecError> {
    if frame.protocol_id != 0 {
        return Err(ModbusCodecError::BadProtocolId(frame.protocol_id));
    }
    let base = frame.function & 0x7f;
    if base != FN_READ_HOLDING && base != FN_WRITE_SINGLE {
        return Err(ModbusCodecError::UnsupportedFunction(frame.function));
    }
    let length = 2 + frame.payload.len(); // unit + function + payload
    if length > MAX_LENGTH_FIELD {
        return Err(ModbusCodecError::BadLength(length));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + frame.payload.len());
    out.extend_from_slice(&frame.transaction_id.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&(length as u16).to_be_bytes());
    out.push(frame.unit_id);
    out.push(frame.function);
    out.extend_from_slice(&frame.payload);
    Ok(out)
}

/// Decode one frame from the front of `buf`. A strict prefix of a valid
/// encoding always reports the bytes still needed, never a wrong frame.
pub fn modbus_decode(buf: &[u8]) -> Result<DecodeOutcome<ModbusFrame>, ModbusCodecError> {
    if buf.len() < HEADER_LEN {
        return Ok(DecodeOutcome::NeedMore(HEADER_LEN - buf.len()));
    }
    let transaction_id = u16::from_be_bytes([buf[0], buf[1]]);
    let protocol_id = u16::from_be_bytes([buf[2], buf[3]]);
    if protocol_id != 0 {
        return Err(ModbusCodecError::BadProtocolId(protocol_id));
    }
    let length = u16::from_be_bytes([buf[4], buf[5]]) as usize;
    if length < 2 || length > MAX_LENGTH_FIELD {
        return Err(ModbusCodecError::BadLength(length));
    }
    let total = 6 + length;
    if buf.len() < total {
        return Ok(DecodeOutcome::NeedMore(total - buf.len()));
    }
    let unit_id = buf[6];
    let function = buf[7];
    let base = function & 0x7f;
    if base != FN_READ_HOLDING && base != FN_WRITE_SINGLE {
        return Err(ModbusCodecError::UnsupportedFunction(function));
    }
    let payload = buf[8..total].to_vec();
    Ok(DecodeOutcome::Complete(
        ModbusFrame {
            transaction_id,
            protocol_id,
            unit_id,
            function,
            payload,
        },
        total,
    ))
}

/// Typed view of a request frame, for servers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    ReadHolding { start: u16, count: u16 },
    WriteSingle { address: u16, value: u16 },
}

/// Interpret a frame as a request; `Err` carries the exception code to
/// respond with.
pub fn parse_request(frame: &ModbusFrame) -> Result<Request, u8> {
    match frame.function {
        FN_READ_HOLDING => {
            if frame.payload.len() != 4 {
                return Err(EX_ILLEGAL_ADDRESS);
            }
            let start = u16::from_be_bytes([frame.payload[0], frame.payload[1]]);
            let count = u16::from_be_bytes([frame.payload[2], frame.payload[3]]);
            if count == 0 || count > MAX_READ_COUNT {
                return Err(EX_ILLEGAL_ADDRESS);
            }
            Ok(Request::ReadHolding { start, count })
        }
        FN_WRITE_SINGLE => {
            if frame.payload.len() != 4 {
                return Err(EX_ILLEGAL_ADDRESS);
            }
            let address = u16::from_be_bytes([frame.payload[0], frame.payload[1]]);
            let value = u16::from_be_bytes([frame.payload[2], frame.payload[3]]);
            Ok(Request::WriteSingle { address, value })
        }
        _ => Err(EX_ILLEGAL_FUNCTION),
    }
}

/// Registers carried by a read response.
pub fn parse_read_response(frame: &ModbusFrame) -> Result<Vec<u16>, ModbusCodecError> {
    if frame.function != FN_READ_HOLDING || frame.payload.is_empty() {
        return Err(ModbusCodecError::BadPayload {
            function: frame.function,
            got: frame.payload.len(),
        });
    }
    let byte_count = frame.payload[0] as usize;
    if frame.payload.len() != 1 + byte_count || byte_count % 2 != 0 {
        return Err(ModbusCodecError::BadPayload {
            function: frame.function,
            got: frame.payload.len(),
        });
    }
    Ok(frame.payload[1..]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect())
}
