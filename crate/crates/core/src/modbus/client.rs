//! Modbus-TCP client used by the polling loop.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::wire::DecodeOutcome;

use super::codec::{
    modbus_decode, modbus_encode, parse_read_response, ModbusFrame, MAX_READ_COUNT,
};

#[derive(Debug, Error)]
pub enum PollError {
    #[error("poll timed out after {0:?}")]
    Timeout(Duration),
    #[error("exception response 0x{code:02x}")]
    Exception { code: u8 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub struct ModbusClient {
    stream: TcpStream,
    buf: Vec<u8>,
    next_transaction: u16,
    timeout: Duration,
}

impl ModbusClient {
    pub fn connect(addr: &str, timeout: Duration) -> Result<ModbusClient, PollError> {
        let sock_addr = addr
            .parse()
            .map_err(|e| PollError::InvalidRequest(format!("bad address {addr}: {e}")))?;
        let stream = TcpStream::connect_timeout(&sock_addr, timeout)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(Duration::from_millis(20)))?;
        Ok(ModbusClient {
            stream,
            buf: Vec::with_capacity(512),
            next_transaction: 1,
            timeout,
        })
    }

    /// Read `count` holding registers starting at `start`.
    pub fn read_holding(
        &mut self,
        unit: u8,
        start: u16,
        count: u16,
    ) -> Result<Vec<u16>, PollError> {
        if count == 0 || count > MAX_READ_COUNT {
            return Err(PollError::InvalidRequest(format!(
                "count {count} outside [1, {MAX_READ_COUNT}]"
            )));
        }
        let tx = self.take_transaction();
        let frame = ModbusFrame::read_request(tx, unit, start, count);
        let response = self.round_trip(&frame, tx)?;
        if let Some(code) = response.exception_code() {
            return Err(PollError::Exception { code });
        }
        let values = parse_read_response(&response)
            .map_err(|e| PollError::Protocol(e.to_string()))?;
        if values.len() != count as usize {
            return Err(PollError::Protocol(format!(
                "expected {count} registers, got {}",
                values.len()
            )));
        }
        Ok(values)
    }

    /// Write a single register (threshold tuning).
    pub fn write_single(&mut self, unit: u8, address: u16, value: u16) -> Result<(), PollError> {
        let tx = self.take_transaction();
        let frame = ModbusFrame::write_single(tx, unit, address, value);
        let response = self.round_trip(&frame, tx)?;
        if let Some(code) = response.exception_code() {
            return Err(PollError::Exception { code });
        }
        Ok(())
    }

    fn take_transaction(&mut self) -> u16 {
        let tx = self.next_transaction;
        self.next_transaction = self.next_transaction.wrapping_add(1);
        tx
    }

    fn round_trip(&mut self, frame: &ModbusFrame, tx: u16) -> Result<ModbusFrame, PollError> {
        let bytes = modbus_encode(frame).map_err(|e| PollError::Protocol(e.to_string()))?;
        self.stream.write_all(&bytes)?;
        let deadline = Instant::now() + self.timeout;
        let mut chunk = [0u8; 512];
        loop {
            match modbus_decode(&self.buf) {
                Ok(DecodeOutcome::Complete(resp, used)) => {
                    self.buf.drain(..used);
                    if resp.transaction_id == tx {
                        return Ok(resp);
                    }
                    // Stale response from an abandoned poll: skip it.
                    continue;
                }
                Ok(DecodeOutcome::NeedMore(_)) => {}
                Err(e) => return Err(PollError::Protocol(e.to_string())),
            }
            if Instant::now() >= deadline {
                return Err(PollError::Timeout(self.timeout));
            }
            match self.stream.read(&mut chunk) {
                Ok(0) => {
                    return Err(PollError::Protocol("connection closed".into()));
                }
                Ok(n) => self.buf.extend_from_slice(&chunk[..n]),
                Err(e)
                    if e.kind() == std::io::ErrorKind::WouldBlock
                        || e.kind() == std::io::ErrorKind::TimedOut => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
}
