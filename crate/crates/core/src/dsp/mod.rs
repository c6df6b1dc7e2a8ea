//! Signal processing for the monitoring pipeline: denoising, pulse
//! detection and calibration, repetition-rate and phase analysis, thermal
//! derivatives, current-drift compensation, and Kalman data fusion.
//!
//! Everything here is a pure function; the only stateful piece,
//! [`KalmanState`], evolves value-in/value-out so callers own the state.

pub mod fusion;
pub mod pulses;
pub mod thermal;
pub mod wavelet;

use thiserror::Error;

pub use fusion::{compensate_verdet, kalman_fuse, kalman_variance_fixed_point, KalmanState};
pub use pulses::{
    detect_pulses, estimate_repetition_rate, phase_resolve, summarize_window, PdFeatureSet,
    PulseFeature, PULSE_MIN_SEPARATION_NS, RATE_BIN_S,
};
pub use thermal::{thermal_features, ThermalFeatureSet};
pub use wavelet::{denoise_samples, denoise_wavelet, dwt_forward, dwt_inverse};

/// Transfer factor from pulse amplitude to apparent charge. 12 pC/mV maps
/// the 100 mV amplitude ceiling onto 1200 pC; configurable per sensor.
pub const DEFAULT_K_CAL_PC_PER_MV: f64 = 12.0;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("input too short: {len} samples, need at least {needed}")]
    InputTooShort { len: usize, needed: usize },
    #[error("frame window is empty")]
    EmptyFrameWindow,
    #[error("temperature frames have mismatched shapes")]
    MismatchedFrames,
    #[error("degenerate compensation divisor {divisor}")]
    DegenerateDivisor { divisor: f64 },
    #[error("variances must be positive")]
    NonPositiveVariance,
}
