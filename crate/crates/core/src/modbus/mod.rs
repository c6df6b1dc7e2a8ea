//! Modbus-TCP subset: bit-exact MBAP codec, a register-bank server, and
//! the polling client. Functions are limited to 0x03 (read holding) and
//! 0x06 (write single register).

pub mod client;
pub mod codec;
pub mod server;

pub use client::{ModbusClient, PollError};
pub use codec::{
    modbus_decode, modbus_encode, parse_read_response, parse_request, ModbusCodecError,
    ModbusFrame, Request, EX_ILLEGAL_ADDRESS, EX_ILLEGAL_FUNCTION, FN_READ_HOLDING,
    FN_WRITE_SINGLE, MAX_READ_COUNT,
};
pub use server::{ArrayBank, ModbusServer, RegisterBank};

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::sync::Arc;
    use std::time::Duration;

    fn start_server(regs: Vec<u16>) -> (ModbusServer, ModbusClient) {
        let mut banks: HashMap<u8, Arc<dyn RegisterBank>> = HashMap::new();
        banks.insert(1, Arc::new(ArrayBank::new(regs)));
        let server = ModbusServer::start("127.0.0.1:0", banks).unwrap();
        let client =
            ModbusClient::connect(&server.addr().to_string(), Duration::from_millis(500)).unwrap();
        (server, client)
    }

    #[test]
    fn read_round_trip_over_tcp() {
        let (_server, mut client) = start_server((0..16).map(|i| i * 100).collect());
        let values = client.read_holding(1, 0, 16).unwrap();
        assert_eq!(values.len(), 16);
        assert_eq!(values[3], 300);
    }

    #[test]
    fn out_of_range_read_yields_exception_02() {
        let (_server, mut client) = start_server(vec![0; 16]);
        match client.read_holding(1, 99, 4) {
            Err(PollError::Exception { code }) => assert_eq!(code, EX_ILLEGAL_ADDRESS),
            other => panic!("expected exception, got {other:?}"),
        }
    }

    #[test]
    fn zero_count_rejected_client_side() {
        let (_server, mut client) = start_server(vec![0; 16]);
        assert!(matches!(
            client.read_holding(1, 0, 0),
            Err(PollError::InvalidRequest(_))
        ));
    }

    #[test]
    fn write_single_updates_register() {
        let (_server, mut client) = start_server(vec![0; 16]);
        client.write_single(1, 5, 0x1234).unwrap();
        let values = client.read_holding(1, 5, 1).unwrap();
        assert_eq!(values[0], 0x1234);
    }

    #[test]
    fn stopped_server_times_out() {
        let (mut server, mut client) = start_server(vec![0; 16]);
        server.shutdown();
        // Either an immediate IO error (connection reset) or a timeout is
        // acceptable; what matters is a typed failure within the deadline.
        let started = std::time::Instant::now();
        let result = client.read_holding(1, 0, 4);
        assert!(result.is_err());
        assert!(started.elapsed() < Duration::from_secs(2));
    }
}
