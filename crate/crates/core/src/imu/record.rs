//! Per-cycle feature records and quality flags.

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// Quality flag bits carried in the register image.
pub mod quality {
    /// One or more sensors were unavailable; features carried from the
    /// last good cycle.
    pub const SENSOR_STALE: u16 = 1 << 0;
    /// A value was clipped to fit its register encoding.
    pub const ENCODE_SATURATED: u16 = 1 << 1;
    /// Spurious distributed-temperature readings were rejected.
    pub const DTS_SPURIOUS_REJECTED: u16 = 1 << 2;
}

/// Screening tier of the unit's state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    Normal = 0,
    Attention = 1,
    Severe = 2,
}

impl Tier {
    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn from_code(code: u16) -> Option<Tier> {
        match code {
            0 => Some(Tier::Normal),
            1 => Some(Tier::Attention),
            2 => Some(Tier::Severe),
            _ => None,
        }
    }
}

/// Extracted features for one sampling cycle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub imu_id: String,
    pub seq: u64,
    pub time: SimTime,
    pub max_charge_pc: f64,
    pub rate_pps: f64,
    pub phase_histogram: Vec<u32>,
    pub max_temp_c: f64,
    pub max_gradient_c_per_m: f64,
    pub max_rise_rate_c_per_min: f64,
    pub hotspot_position_m: f64,
    /// Drift-compensated load current.
    pub current_a: f64,
    pub vibration_rms: f64,
    pub fsm_state: Tier,
    pub quality: u16,
}

impl FeatureRecord {
    pub fn quiet(imu_id: &str, seq: u64, time: SimTime) -> FeatureRecord {
        FeatureRecord {
            imu_id: imu_id.to_string(),
            seq,
            time,
            max_charge_pc: 0.0,
            rate_pps: 0.0,
            phase_histogram: vec![0; 36],
            max_temp_c: 0.0,
            max_gradient_c_per_m: 0.0,
            max_rise_rate_c_per_min: 0.0,
            hotspot_position_m: 0.0,
            current_a: 0.0,
            vibration_rms: 0.0,
            fsm_state: Tier::Normal,
            quality: 0,
        }
    }

    pub fn all_finite(&self) -> bool {
        [
            self.max_charge_pc,
            self.rate_pps,
            self.max_temp_c,
            self.max_gradient_c_per_m,
            self.max_rise_rate_c_per_min,
            self.hotspot_position_m,
            self.current_a,
            self.vibration_rms,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}
