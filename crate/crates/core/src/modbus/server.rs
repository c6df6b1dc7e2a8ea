//! Modbus-TCP server: one listener, one handler thread per connection,
//! registers provided by pluggable banks keyed on unit id.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::wire::DecodeOutcome;

use super::codec::{
    modbus_decode, modbus_encode, parse_request, ModbusFrame, Request, EX_ILLEGAL_FUNCTION,
};

/// Registers served over the wire. Implementations choose their own
/// address layout and exception codes.
pub trait RegisterBank: Send + Sync {
    fn read(&self, start: u16, count: u16) -> Result<Vec<u16>, u8>;
    fn write(&self, address: u16, value: u16) -> Result<(), u8>;
}

/// A fixed array bank, useful for tests and static maps.
pub struct ArrayBank {
    regs: Mutex<Vec<u16>>,
}

impl ArrayBank {
    pub fn new(regs: Vec<u16>) -> Self {
        ArrayBank {
            regs: Mutex::new(regs),
        }
    }
}

impl RegisterBank for ArrayBank {
    fn read(&self, start: u16, count: u16) -> Result<Vec<u16>, u8> {
        let regs = self.regs.lock().unwrap();
        let end = start as usize + count as usize;
        if end > regs.len() {
            return Err(super::codec::EX_ILLEGAL_ADDRESS);
        }
        Ok(regs[start as usize..end].to_vec())
    }

    fn write(&self, address: u16, value: u16) -> Result<(), u8> {
        let mut regs = self.regs.lock().unwrap();
        match regs.get_mut(address as usize) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(super::codec::EX_ILLEGAL_ADDRESS),
        }
    }
}

pub struct ModbusServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    accept_handle: Option<std::thread::JoinHandle<()>>,
}

impl ModbusServer {
    /// Bind and serve in background threads. `bind` may use port 0 for
    /// an ephemeral port; the chosen address is available via `addr()`.
    pub fn start(
        bind: &str,
        banks: HashMap<u8, Arc<dyn RegisterBank>>,
    ) -> std::io::Result<ModbusServer> {
        let listener = TcpListener::bind(bind)?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let stop = shutdown.clone();
        let banks = Arc::new(banks);
        let accept_handle = std::thread::Builder::new()
            .name(format!("modbus-{}", addr.port()))
            .spawn(move || {
                while !stop.load(Ordering::Acquire) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let banks = banks.clone();
                            let stop = stop.clone();
                            std::thread::spawn(move || serve_connection(stream, banks, stop));
                        }
                        Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                            std::thread::sleep(Duration::from_millis(2));
                        }
                        Err(_) => break,
                    }
                }
            })?;
        Ok(ModbusServer {
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

impl Drop for ModbusServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn serve_connection(
    mut stream: TcpStream,
    banks: Arc<HashMap<u8, Arc<dyn RegisterBank>>>,
    stop: Arc<AtomicBool>,
) {
    let _ = stream.set_read_timeout(Some(Duration::from_millis(100)));
    let _ = stream.set_nodelay(true);
    let mut buf: Vec<u8> = Vec::with_capacity(512);
    let mut chunk = [0u8; 512];
    loop {
        if stop.load(Ordering::Acquire) {
            return;
        }
        // Drain complete frames already buffered.
        loop {
            match modbus_decode(&buf) {
                Ok(DecodeOutcome::Complete(frame, used)) => {
                    buf.drain(..used);
                    let response = handle_frame(&frame, &banks);
                    let bytes = match modbus_encode(&response) {
                        Ok(b) => b,
                        Err(_) => return,
                    };
                    if stream.write_all(&bytes).is_err() {
                        return;
                    }
                }
                Ok(DecodeOutcome::NeedMore(_)) => break,
                // Undecodable garbage: answer with a generic failure and
                // drop the connection, per the framing contract.
                Err(_) => {
                    let ex = ModbusFrame::exception(0, 0, 0x03, EX_ILLEGAL_FUNCTION);
                    let _ = stream.write_all(&modbus_encode(&ex).unwrap());
                    return;
                }
            }
        }
        match stream.read(&mut chunk) {
            Ok(0) => return,
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                continue;
            }
            Err(_) => return,
        }
    }
}

fn handle_frame(frame: &ModbusFrame, banks: &HashMap<u8, Arc<dyn RegisterBank>>) -> ModbusFrame {
    let Some(bank) = banks.get(&frame.unit_id) else {
        return ModbusFrame::exception(
            frame.transaction_id,
            frame.unit_id,
            frame.function,
            EX_ILLEGAL_FUNCTION,
        );
    };
    match parse_request(frame) {
        Ok(Request::ReadHolding { start, count }) => match bank.read(start, count) {
            Ok(values) => ModbusFrame::read_response(frame.transaction_id, frame.unit_id, &values),
            Err(code) => {
                ModbusFrame::exception(frame.transaction_id, frame.unit_id, frame.function, code)
            }
        },
        Ok(Request::WriteSingle { address, value }) => match bank.write(address, value) {
            Ok(()) => {
                ModbusFrame::write_single(frame.transaction_id, frame.unit_id, address, value)
            }
            Err(code) => {
                ModbusFrame::exception(frame.transaction_id, frame.unit_id, frame.function, code)
            }
        },
        Err(code) => {
            ModbusFrame::exception(frame.transaction_id, frame.unit_id, frame.function, code)
        }
    }
}
