//! Partial-discharge waveform synthesis.
//!
//! Pulses are Gaussian-shaped with peak amplitude `magnitude_pc / k_cal`
//! millivolts and full-width-half-maximum drawn uniformly from 10–100 ns.
//! Arrivals follow a jittered periodic process: period `1/rate`, uniform
//! jitter of ±20 % of the period. Surface-discharge sources are
//! additionally snapped to the nearest power-voltage peak (90°/270°).
//!
//! Pulse centers land exactly on the sample grid, so the peak sample
//! carries the full amplitude at any sample rate; below the rate where a
//! pulse spans a sample interval it degenerates to a single-sample spike.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::scenario::DefectKind;
use crate::time::SimTime;

use super::electrical::VoltageReference;
use super::seeded_rng;
use super::DefectProfile;

/// Raw digitized sensor waveform, in millivolts.
#[derive(Debug, Clone, PartialEq)]
pub struct RawWaveform {
    pub sample_rate_hz: f64,
    pub start_time: SimTime,
    pub samples: Vec<f64>,
}

impl RawWaveform {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// Additive interference model for a synthesized acquisition window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of white Gaussian background noise (mV).
    pub gaussian_mv: f64,
    /// Wideband interference bursts per second.
    pub emi_bursts_per_s: f64,
    /// Peak amplitude of interference bursts (mV).
    pub emi_amplitude_mv: f64,
    /// Burst duration in nanoseconds.
    pub emi_width_ns: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            gaussian_mv: 0.0,
            emi_bursts_per_s: 0.0,
            emi_amplitude_mv: 0.0,
            emi_width_ns: 2000.0,
        }
    }
}

impl NoiseSpec {
    pub fn quiet() -> Self {
        NoiseSpec::default()
    }

    pub fn gaussian(sigma_mv: f64) -> Self {
        NoiseSpec {
            gaussian_mv: sigma_mv,
            ..NoiseSpec::default()
        }
    }

    pub fn is_quiet(&self) -> bool {
        self.gaussian_mv == 0.0 && (self.emi_bursts_per_s == 0.0 || self.emi_amplitude_mv == 0.0)
    }
}

/// Ground-truth record of one injected pulse, kept for oracle tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectedPulse {
    /// Offset from the start of the waveform, seconds.
    pub offset_s: f64,
    pub amplitude_mv: f64,
    pub width_ns: f64,
    pub sample_index: usize,
}

/// Draw the pulse schedule for one source over `[0, duration_s)`.
fn draw_pulse_train(
    defect: &DefectProfile,
    duration_s: f64,
    rng: &mut impl Rng,
    voltage: &VoltageReference,
    start_time: SimTime,
    sample_rate_hz: f64,
    k_cal_pc_per_mv: f64,
) -> Vec<InjectedPulse> {
    if defect.pd_rate_pps <= 0.0 || defect.pd_magnitude_pc <= 0.0 {
        return Vec::new();
    }
    let period = 1.0 / defect.pd_rate_pps;
    let amplitude_mv = defect.pd_magnitude_pc / k_cal_pc_per_mv;
    let count = (defect.pd_rate_pps * duration_s).floor() as usize;
    let phase_locked = defect.kind == DefectKind::SurfaceDischarge;
    let mains_period = 1.0 / voltage.frequency_hz;

    let mut pulses = Vec::with_capacity(count);
    for i in 0..count {
        let jitter = rng.gen_range(-0.2..0.2) * period;
        let mut offset = (i as f64 + 0.5) * period + jitter;
        if phase_locked {
            // Snap to the nearest voltage peak (phase 90° or 270°), then
            // spread by at most ±15° of the cycle.
            let abs = start_time.as_secs_f64() + offset
                - voltage.zero_crossing_time.as_secs_f64();
            let half = mains_period / 2.0;
            let quarter = mains_period / 4.0;
            let peak = ((abs - quarter) / half).round() * half + quarter;
            let spread = rng.gen_range(-1.0..1.0) * mains_period / 24.0;
            offset = peak + spread - start_time.as_secs_f64()
                + voltage.zero_crossing_time.as_secs_f64();
        }
        let width_ns = rng.gen_range(10.0..=100.0);
        if offset < 0.0 || offset >= duration_s {
            continue;
        }
        // Snap the center onto the sample grid so the peak sample carries
        // exactly the calibrated amplitude.
        let sample_index = (offset * sample_rate_hz).round() as usize;
        let total = (duration_s * sample_rate_hz).round() as usize;
        if sample_index >= total {
            continue;
        }
        pulses.push(InjectedPulse {
            offset_s: sample_index as f64 / sample_rate_hz,
            amplitude_mv,
            width_ns,
            sample_index,
        });
    }
    pulses
}

/// Deposit pulses into a sample buffer.
fn render_pulses(samples: &mut [f64], pulses: &[InjectedPulse], sample_rate_hz: f64) {
    let dt = 1.0 / sample_rate_hz;
    for p in pulses {
        let sigma_s = (p.width_ns * 1e-9) / 2.3548; // FWHM -> sigma
        if sigma_s < 0.75 * dt {
            // Narrower than the grid: a single-sample spike.
            if p.sample_index < samples.len() {
                samples[p.sample_index] += p.amplitude_mv;
            }
            continue;
        }
        let half_span = (4.0 * sigma_s * sample_rate_hz).ceil() as isize;
        let center = p.sample_index as isize;
        for k in -half_span..=half_span {
            let idx = center + k;
            if idx < 0 || idx as usize >= samples.len() {
                continue;
            }
            let t = k as f64 * dt;
            samples[idx as usize] += p.amplitude_mv * (-t * t / (2.0 * sigma_s * sigma_s)).exp();
        }
    }
}

fn render_noise(samples: &mut [f64], noise: &NoiseSpec, sample_rate_hz: f64, rng: &mut impl Rng) {
    if noise.gaussian_mv > 0.0 {
        let dist = Normal::new(0.0, noise.gaussian_mv).expect("valid sigma");
        for s in samples.iter_mut() {
            *s += dist.sample(rng);
        }
    }
    if noise.emi_bursts_per_s > 0.0 && noise.emi_amplitude_mv > 0.0 {
        let duration = samples.len() as f64 / sample_rate_hz;
        let bursts = (noise.emi_bursts_per_s * duration).floor() as usize;
        let width = ((noise.emi_width_ns * 1e-9 * sample_rate_hz).round() as usize).max(1);
        for _ in 0..bursts {
            let at = rng.gen_range(0..samples.len());
            for idx in at..(at + width).min(samples.len()) {
                samples[idx] += rng.gen_range(-1.0..1.0) * noise.emi_amplitude_mv;
            }
        }
    }
}

/// Full synthesis for a single source, returning the injection log as
/// ground truth alongside the waveform.
pub fn synth_pd_waveform_with_log(
    defect: &DefectProfile,
    duration_s: f64,
    seed: u64,
    noise: &NoiseSpec,
    cfg: &WaveformCfg,
) -> (RawWaveform, Vec<InjectedPulse>) {
    assert!(duration_s > 0.0, "duration must be positive");
    let total = (duration_s * cfg.sample_rate_hz).round() as usize;
    let mut samples = vec![0.0; total];
    let mut rng = seeded_rng(seed, &["pd-train"]);
    let pulses = draw_pulse_train(
        defect,
        duration_s,
        &mut rng,
        &cfg.voltage,
        cfg.start_time,
        cfg.sample_rate_hz,
        cfg.k_cal_pc_per_mv,
    );
    render_pulses(&mut samples, &pulses, cfg.sample_rate_hz);
    let mut noise_rng = seeded_rng(seed, &["pd-noise"]);
    render_noise(&mut samples, noise, cfg.sample_rate_hz, &mut noise_rng);
    (
        RawWaveform {
            sample_rate_hz: cfg.sample_rate_hz,
            start_time: cfg.start_time,
            samples,
        },
        pulses,
    )
}

/// Synthesize the acquisition window for one source.
pub fn synth_pd_waveform(
    defect: &DefectProfile,
    duration_s: f64,
    seed: u64,
    noise: &NoiseSpec,
    cfg: &WaveformCfg,
) -> RawWaveform {
    synth_pd_waveform_with_log(defect, duration_s, seed, noise, cfg).0
}

/// Synthesize one window combining several active sources, as seen by a
/// single sensor. Each source draws from its own labeled stream so the
/// result does not depend on source ordering.
pub fn synth_combined_window(
    defects: &[(&DefectProfile, u64)],
    duration_s: f64,
    noise_seed: u64,
    noise: &NoiseSpec,
    cfg: &WaveformCfg,
) -> (RawWaveform, Vec<InjectedPulse>) {
    let total = (duration_s * cfg.sample_rate_hz).round() as usize;
    let mut samples = vec![0.0; total];
    let mut log = Vec::new();
    for (defect, seed) in defects {
        let mut rng = seeded_rng(*seed, &["pd-train"]);
        let pulses = draw_pulse_train(
            defect,
            duration_s,
            &mut rng,
            &cfg.voltage,
            cfg.start_time,
            cfg.sample_rate_hz,
            cfg.k_cal_pc_per_mv,
        );
        render_pulses(&mut samples, &pulses, cfg.sample_rate_hz);
        log.extend(pulses);
    }
    let mut noise_rng = seeded_rng(noise_seed, &["pd-noise"]);
    render_noise(&mut samples, noise, cfg.sample_rate_hz, &mut noise_rng);
    log.sort_by(|a, b| a.offset_s.total_cmp(&b.offset_s));
    (
        RawWaveform {
            sample_rate_hz: cfg.sample_rate_hz,
            start_time: cfg.start_time,
            samples,
        },
        log,
    )
}

/// Acquisition parameters shared by every synthesized window.
#[derive(Debug, Clone)]
pub struct WaveformCfg {
    pub sample_rate_hz: f64,
    pub start_time: SimTime,
    pub voltage: VoltageReference,
    pub k_cal_pc_per_mv: f64,
}

impl Default for WaveformCfg {
    fn default() -> Self {
        WaveformCfg {
            sample_rate_hz: 100e6,
            start_time: SimTime::ZERO,
            voltage: VoltageReference::default(),
            k_cal_pc_per_mv: crate::dsp::DEFAULT_K_CAL_PC_PER_MV,
        }
    }
}
