//! The 16-register telemetry image served over Modbus-TCP, plus the
//! writable threshold-tuning block behind it.
//!
//! Layout (big-endian words, fixed-point scaling):
//!
//! | Reg   | Contents                           |
//! |-------|------------------------------------|
//! | 0–1   | max charge, pC (u32)               |
//! | 2     | repetition rate × 10               |
//! | 3     | max temperature × 10 (signed)      |
//! | 4     | max gradient × 10                  |
//! | 5     | max rise rate × 10                 |
//! | 6     | FSM state code (0/1/2)             |
//! | 7     | quality flags                      |
//! | 8–9   | compensated current × 100 (u32)    |
//! | 10    | vibration RMS × 1000               |
//! | 11–12 | sequence number (u32)              |
//! | 13–14 | unix time, seconds (u32)           |
//! | 15    | schema version = 1                 |
//!
//! Registers 16–20 are the tuning block (severe charge, attention
//! charge, temp alarm ×10, rise alarm ×10, gradient alarm ×10), writable
//! with function 0x06.

use crate::time::{to_unix_secs, SimTime};

use super::record::{quality, FeatureRecord, Tier};

pub const REGISTER_COUNT: usize = 16;
pub const SCHEMA_VERSION: u16 = 1;

/// First address of the writable tuning block.
pub const TUNING_BASE: u16 = 16;
pub const TUNING_COUNT: u16 = 5;

fn split_u32(v: u32) -> (u16, u16) {
    ((v >> 16) as u16, (v & 0xFFFF) as u16)
}

fn join_u32(hi: u16, lo: u16) -> u32 {
    ((hi as u32) << 16) | lo as u32
}

/// Scale and clamp to an unsigned register, reporting saturation.
fn scale_u16(value: f64, scale: f64, saturated: &mut bool) -> u16 {
    let scaled = (value * scale).round();
    if !(0.0..=65535.0).contains(&scaled) {
        *saturated = true;
        scaled.clamp(0.0, 65535.0) as u16
    } else {
        scaled as u16
    }
}

fn scale_i16(value: f64, scale: f64, saturated: &mut bool) -> u16 {
    let scaled = (value * scale).round();
    if !(-32768.0..=32767.0).contains(&scaled) {
        *saturated = true;
        (scaled.clamp(-32768.0, 32767.0) as i16) as u16
    } else {
        (scaled as i16) as u16
    }
}

fn scale_u32(value: f64, scale: f64, saturated: &mut bool) -> u32 {
    let scaled = (value * scale).round();
    if !(0.0..=u32::MAX as f64).contains(&scaled) {
        *saturated = true;
        scaled.clamp(0.0, u32::MAX as f64) as u32
    } else {
        scaled as u32
    }
}

/// Encode a record into the fixed image. Out-of-range values saturate
/// and set the quality flag.
pub fn encode_registers(rec: &FeatureRecord) -> [u16; REGISTER_COUNT] {
    let mut saturated = false;
    let mut regs = [0u16; REGISTER_COUNT];
    let (hi, lo) = split_u32(scale_u32(rec.max_charge_pc, 1.0, &mut saturated));
    regs[0] = hi;
    regs[1] = lo;
    regs[2] = scale_u16(rec.rate_pps, 10.0, &mut saturated);
    regs[3] = scale_i16(rec.max_temp_c, 10.0, &mut saturated);
    regs[4] = scale_u16(rec.max_gradient_c_per_m, 10.0, &mut saturated);
    regs[5] = scale_u16(rec.max_rise_rate_c_per_min, 10.0, &mut saturated);
    regs[6] = rec.fsm_state.code();
    let (hi, lo) = split_u32(scale_u32(rec.current_a, 100.0, &mut saturated));
    regs[8] = hi;
    regs[9] = lo;
    regs[10] = scale_u16(rec.vibration_rms, 1000.0, &mut saturated);
    let (hi, lo) = split_u32((rec.seq & 0xFFFF_FFFF) as u32);
    regs[11] = hi;
    regs[12] = lo;
    let (hi, lo) = split_u32((to_unix_secs(rec.time) & 0xFFFF_FFFF) as u32);
    regs[13] = hi;
    regs[14] = lo;
    regs[15] = SCHEMA_VERSION;
    let mut flags = rec.quality;
    if saturated {
        flags |= quality::ENCODE_SATURATED;
    }
    regs[7] = flags;
    regs
}

/// Decode a register image back into a record. The phase histogram does
/// not travel over registers and decodes empty.
pub fn decode_registers(imu_id: &str, regs: &[u16; REGISTER_COUNT]) -> Option<FeatureRecord> {
    if regs[15] != SCHEMA_VERSION {
        return None;
    }
    let unix = join_u32(regs[13], regs[14]) as i64;
    let sim_ns = (unix - crate::time::EPOCH_UNIX_SECS).max(0) as u64 * 1_000_000_000;
    Some(FeatureRecord {
        imu_id: imu_id.to_string(),
        seq: join_u32(regs[11], regs[12]) as u64,
        time: SimTime(sim_ns),
        max_charge_pc: join_u32(regs[0], regs[1]) as f64,
        rate_pps: regs[2] as f64 / 10.0,
        phase_histogram: Vec::new(),
        max_temp_c: (regs[3] as i16) as f64 / 10.0,
        max_gradient_c_per_m: regs[4] as f64 / 10.0,
        max_rise_rate_c_per_min: regs[5] as f64 / 10.0,
        hotspot_position_m: 0.0,
        current_a: join_u32(regs[8], regs[9]) as f64 / 100.0,
        vibration_rms: regs[10] as f64 / 1000.0,
        fsm_state: Tier::from_code(regs[6])?,
        quality: regs[7],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> FeatureRecord {
        let mut r = FeatureRecord::quiet("imu-1", 42, SimTime::from_secs(100));
        r.max_charge_pc = 1200.0;
        r.rate_pps = 12.0;
        r.max_temp_c = 75.6;
        r.max_gradient_c_per_m = 3.2;
        r.max_rise_rate_c_per_min = 0.5;
        r.current_a = 328.0;
        r.vibration_rms = 0.05;
        r.fsm_state = Tier::Attention;
        r
    }

    #[test]
    fn charge_1200_encodes_to_documented_words() {
        let regs = encode_registers(&record());
        assert_eq!(regs[0], 0x0000);
        assert_eq!(regs[1], 0x04B0);
    }

    #[test]
    fn negative_temperature_is_signed_tenths() {
        let mut r = record();
        r.max_temp_c = -1.5;
        let regs = encode_registers(&r);
        assert_eq!(regs[3] as i16, -15);
    }

    #[test]
    fn decode_inverts_encode_on_grid_values() {
        let r = record();
        let regs = encode_registers(&r);
        let decoded = decode_registers("imu-1", &regs).unwrap();
        assert_eq!(decoded.max_charge_pc, r.max_charge_pc);
        assert_eq!(decoded.rate_pps, r.rate_pps);
        assert_eq!(decoded.max_temp_c, r.max_temp_c);
        assert_eq!(decoded.current_a, r.current_a);
        assert_eq!(decoded.vibration_rms, r.vibration_rms);
        assert_eq!(decoded.seq, r.seq);
        assert_eq!(decoded.time, r.time);
        assert_eq!(decoded.fsm_state, r.fsm_state);
        assert_eq!(decoded.quality, r.quality);
    }

    #[test]
    fn out_of_range_values_saturate_and_flag() {
        let mut r = record();
        r.rate_pps = 1e9;
        let regs = encode_registers(&r);
        assert_eq!(regs[2], 65535);
        assert_ne!(regs[7] & quality::ENCODE_SATURATED, 0);
    }

    #[test]
    fn encode_decode_encode_is_stable() {
        let r = record();
        let regs = encode_registers(&r);
        let decoded = decode_registers("imu-1", &regs).unwrap();
        let regs2 = encode_registers(&decoded);
        assert_eq!(regs, regs2);
    }
}
