//! Sensor fusion: current-drift compensation and a scalar Kalman filter
//! with innovation-gated outlier rejection.

use serde::{Deserialize, Serialize};

use super::DspError;

/// Invert the fiber-optic current sensor's thermal scale drift:
/// `i = i_meas / (1 + alpha * (T - T0))`.
pub fn compensate_verdet(
    i_meas_a: f64,
    sensor_temp_c: f64,
    alpha_per_c: f64,
    t0_c: f64,
) -> Result<f64, DspError> {
    let divisor = 1.0 + alpha_per_c * (sensor_temp_c - t0_c);
    if divisor <= 1e-6 {
        return Err(DspError::DegenerateDivisor { divisor });
    }
    Ok(i_meas_a / divisor)
}

/// Scalar filter state for one fused temperature estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KalmanState {
    pub estimate_c: f64,
    pub variance: f64,
    pub last_innovation: f64,
    pub spurious_flag: bool,
}

impl KalmanState {
    pub fn new(estimate_c: f64, variance: f64) -> Self {
        KalmanState {
            estimate_c,
            variance,
            last_innovation: 0.0,
            spurious_flag: false,
        }
    }
}

/// One predict/update step fusing a distributed-temperature reading with
/// a model prediction.
///
/// The process step adopts `model_pred_c` as the prior mean (callers that
/// want a random walk pass the previous estimate) and inflates variance by
/// `q`. A measurement whose innovation exceeds 3σ of the innovation
/// standard deviation is flagged spurious and excluded: the state keeps
/// the prediction.
pub fn kalman_fuse(
    prior: &KalmanState,
    dts_c: f64,
    model_pred_c: f64,
    q: f64,
    r: f64,
) -> Result<KalmanState, DspError> {
    if q <= 0.0 || r <= 0.0 || prior.variance <= 0.0 {
        return Err(DspError::NonPositiveVariance);
    }
    let predicted = model_pred_c;
    let variance_pred = prior.variance + q;
    let innovation_var = variance_pred + r;
    let innovation = dts_c - predicted;
    if innovation.abs() > 3.0 * innovation_var.sqrt() {
        return Ok(KalmanState {
            estimate_c: predicted,
            variance: variance_pred,
            last_innovation: innovation,
            spurious_flag: true,
        });
    }
    let gain = variance_pred / innovation_var;
    Ok(KalmanState {
        estimate_c: predicted + gain * innovation,
        variance: (1.0 - gain) * variance_pred,
        last_innovation: innovation,
        spurious_flag: false,
    })
}

/// Algebraic fixed point of the accepted-update variance recursion:
/// `P = (P + q) r / (P + q + r)`.
pub fn kalman_variance_fixed_point(q: f64, r: f64) -> f64 {
    (-q + (q * q + 4.0 * q * r).sqrt()) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_100a() {
        let i = compensate_verdet(100.35, 75.0, 7e-5, 25.0).unwrap();
        assert!((i - 100.0).abs() < 1e-9);
    }

    #[test]
    fn compensation_is_identity_at_reference() {
        let i = compensate_verdet(123.456, 25.0, 7e-5, 25.0).unwrap();
        assert_eq!(i, 123.456);
    }

    #[test]
    fn compensation_inverts_simulated_drift_over_domain() {
        let model = crate::sim::ElectricalModel::new(7e-5, 25.0, f64::MAX);
        for &load in &[0.0, 1.0, 100.0, 400.0, 4000.0] {
            for &temp in &[-40.0, -10.0, 25.0, 60.0, 120.0] {
                let s = model.synth_current_sample(load, temp, crate::time::SimTime::ZERO);
                let back = compensate_verdet(s.i_focs_a, temp, 7e-5, 25.0).unwrap();
                let err = if load == 0.0 {
                    back.abs()
                } else {
                    (back - load).abs() / load
                };
                assert!(err < 1e-9, "load {load} temp {temp}: err {err}");
            }
        }
    }

    #[test]
    fn degenerate_divisor_rejected() {
        assert!(compensate_verdet(1.0, -1e9, 7e-5, 25.0).is_err());
    }

    #[test]
    fn consensus_leaves_estimate_unchanged() {
        let prior = KalmanState::new(50.0, 0.5);
        let next = kalman_fuse(&prior, 50.0, 50.0, 0.04, 1.0).unwrap();
        assert_eq!(next.estimate_c, 50.0);
        assert!(!next.spurious_flag);
    }

    #[test]
    fn outlier_is_flagged_and_excluded() {
        let prior = KalmanState::new(50.0, 0.1);
        let next = kalman_fuse(&prior, 75.0, 50.0, 0.04, 1.0).unwrap();
        assert!(next.spurious_flag);
        assert!((next.estimate_c - 50.0).abs() < 0.5);
    }

    #[test]
    fn variance_converges_to_fixed_point() {
        let q = 0.04;
        let r = 1.0;
        let mut state = KalmanState::new(40.0, 10.0);
        for _ in 0..200 {
            state = kalman_fuse(&state, 40.0, state.estimate_c, q, r).unwrap();
        }
        let expected = kalman_variance_fixed_point(q, r);
        assert!(
            (state.variance - expected).abs() < 1e-6,
            "variance {} vs fixed point {}",
            state.variance,
            expected
        );
    }

    #[test]
    fn accepted_update_never_increases_variance_past_prediction() {
        let mut state = KalmanState::new(40.0, 2.0);
        for i in 0..50 {
            let z = 40.0 + (i as f64 * 0.7).sin();
            let predicted_var = state.variance + 0.04;
            state = kalman_fuse(&state, z, state.estimate_c, 0.04, 1.0).unwrap();
            if !state.spurious_flag {
                assert!(state.variance <= predicted_var + 1e-12);
            }
        }
    }

    #[test]
    fn nonpositive_parameters_rejected() {
        let prior = KalmanState::new(0.0, 1.0);
        assert!(kalman_fuse(&prior, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(kalman_fuse(&prior, 0.0, 0.0, 0.1, 0.0).is_err());
    }
}
