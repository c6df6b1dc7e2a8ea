//! Desk-scale condition monitoring pipeline for high-voltage cable circuits.
//!
//! The crate is organized as the three tiers of the monitoring system plus
//! the shared machinery underneath them:
//!
//! - [`sim`] — deterministic, seedable generators for raw sensor signals
//!   (partial-discharge waveforms, distributed temperature frames, current
//!   samples, vibration) over a configured cable network.
//! - [`dsp`] — signal processing: wavelet denoising, pulse detection and
//!   calibration, repetition-rate and phase analysis, thermal derivatives,
//!   current-drift compensation, and scalar Kalman fusion.
//! - [`imu`] — the field monitoring unit: cyclic feature extraction,
//!   finite-state-machine screening, register image, and alert push.
//! - [`modbus`] / [`mqtt`] — minimal bit-exact codecs and endpoints for the
//!   two transports, including an in-process MQTT broker.
//! - [`store`] — append-only segmented time-series storage.
//! - [`edge`] — the aggregation server: polling, archival, rule engine,
//!   fault classification, event publishing, notifications.
//! - [`cloud`] — event ingestion, KPI computation, load recommendations,
//!   and the read-only HTTP query API.
//! - [`scenario`] — the scenario document shared by the simulator and the
//!   command-line harness.

pub mod cloud;
pub mod wire;
pub mod dsp;
pub mod edge;
pub mod imu;
pub mod modbus;
pub mod mqtt;
pub mod scenario;
pub mod sim;
pub mod store;
pub mod time;

// re-exports filled in as modules land

pub use time::{SimClock, SimTime};
