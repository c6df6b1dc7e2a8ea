//! Current sensing models: the fiber-optic sensor with its thermal scale
//! drift, and a saturating electromagnetic transformer as reference.

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// Power-frequency reference used for phase-resolved analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoltageReference {
    pub frequency_hz: f64,
    pub zero_crossing_time: SimTime,
    pub amplitude_v: f64,
}

impl Default for VoltageReference {
    fn default() -> Self {
        VoltageReference {
            frequency_hz: 50.0,
            zero_crossing_time: SimTime::ZERO,
            amplitude_v: 8165.0, // 10 kV line-to-line, phase peak
        }
    }
}

/// One synchronized current reading from both sensor technologies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurrentSample {
    pub time: SimTime,
    pub i_true_a: f64,
    /// Fiber-optic sensor reading, carrying the scale drift exactly.
    pub i_focs_a: f64,
    /// Electromagnetic transformer reading, clipped at saturation.
    pub i_ct_a: f64,
    pub sensor_temp_c: f64,
}

/// Drift and saturation parameters for the simulated current sensors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElectricalModel {
    /// Scale drift per °C away from the reference temperature.
    pub alpha_per_c: f64,
    pub t0_c: f64,
    pub ct_saturation_a: f64,
}

impl ElectricalModel {
    pub fn new(alpha_per_c: f64, t0_c: f64, ct_saturation_a: f64) -> Self {
        ElectricalModel {
            alpha_per_c,
            t0_c,
            ct_saturation_a,
        }
    }

    /// Defaults: α = 7e-5 /°C, T0 = 25 °C, saturation at 1.25× rated.
    pub fn for_rated(rated_a: f64) -> Self {
        ElectricalModel::new(7e-5, 25.0, 1.25 * rated_a)
    }

    /// The drift applied by the simulation is exactly the inverse of the
    /// compensation in the signal-processing layer.
    pub fn synth_current_sample(&self, load_a: f64, sensor_temp_c: f64, t: SimTime) -> CurrentSample {
        let scale = 1.0 + self.alpha_per_c * (sensor_temp_c - self.t0_c);
        CurrentSample {
            time: t,
            i_true_a: load_a,
            i_focs_a: load_a * scale,
            i_ct_a: load_a.clamp(-self.ct_saturation_a, self.ct_saturation_a),
            sensor_temp_c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_drift_at_reference_temperature() {
        let m = ElectricalModel::for_rated(400.0);
        let s = m.synth_current_sample(100.0, 25.0, SimTime::ZERO);
        assert_eq!(s.i_focs_a, 100.0);
        assert_eq!(s.i_ct_a, 100.0);
    }

    #[test]
    fn drift_matches_stated_model() {
        let m = ElectricalModel::new(7e-5, 25.0, 500.0);
        let s = m.synth_current_sample(100.0, 75.0, SimTime::ZERO);
        assert!((s.i_focs_a - 100.35).abs() < 1e-9, "got {}", s.i_focs_a);
    }

    #[test]
    fn ct_clips_where_focs_does_not() {
        let m = ElectricalModel::for_rated(400.0);
        let s = m.synth_current_sample(720.0, 25.0, SimTime::ZERO);
        assert_eq!(s.i_ct_a, 500.0);
        assert_eq!(s.i_focs_a, 720.0);
    }
}
