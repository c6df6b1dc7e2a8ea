//! Pulse detection, charge calibration, repetition-rate estimation, and
//! phase-resolved analysis.

use serde::{Deserialize, Serialize};

use crate::sim::{RawWaveform, VoltageReference};
use crate::time::SimTime;

/// Minimum separation between detected pulses. Two maxima closer than
/// this are merged into the larger one (twice the maximum pulse width).
pub const PULSE_MIN_SEPARATION_NS: f64 = 200.0;

/// Resolution of the occurrence train used by the rate estimator.
pub const RATE_BIN_S: f64 = 1e-3;

/// One detected discharge pulse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PulseFeature {
    pub time: SimTime,
    /// Offset from the start of the acquisition window, seconds.
    pub offset_s: f64,
    pub amplitude_mv: f64,
    pub width_ns: f64,
    pub charge_pc: f64,
    /// Phase within the power cycle; filled in by [`phase_resolve`].
    pub phase_deg: f64,
}

/// Windowed discharge summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdFeatureSet {
    pub window_start: SimTime,
    pub window_end: SimTime,
    pub max_charge_pc: f64,
    pub mean_charge_pc: f64,
    pub rate_pps: f64,
    pub phase_histogram: Vec<u32>,
}

/// Local maxima above `threshold_mv`, at least 200 ns apart, with width
/// measured at half amplitude and charge from the linear transfer factor.
pub fn detect_pulses(w: &RawWaveform, threshold_mv: f64, k_cal_pc_per_mv: f64) -> Vec<PulseFeature> {
    assert!(threshold_mv > 0.0, "threshold must be positive");
    let s = &w.samples;
    let n = s.len();
    if n == 0 {
        return Vec::new();
    }
    let dt_ns = 1e9 / w.sample_rate_hz;
    let min_sep = ((PULSE_MIN_SEPARATION_NS / dt_ns).round() as usize).max(1);

    // Candidate local maxima above threshold.
    let mut candidates: Vec<usize> = Vec::new();
    for i in 0..n {
        let v = s[i];
        if v <= threshold_mv {
            continue;
        }
        let left_ok = i == 0 || s[i - 1] < v || (s[i - 1] == v && (i < 2 || s[i - 2] < v));
        let right_ok = i + 1 == n || s[i + 1] <= v;
        if left_ok && right_ok {
            candidates.push(i);
        }
    }

    // Greedy by amplitude: keep the largest peak in each 200 ns
    // neighborhood so closely spaced maxima merge.
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        s[candidates[b]]
            .total_cmp(&s[candidates[a]])
            .then(candidates[a].cmp(&candidates[b]))
    });
    let mut kept: Vec<usize> = Vec::new();
    'outer: for &ci in &order {
        let idx = candidates[ci];
        for &k in &kept {
            if idx.abs_diff(k) < min_sep {
                continue 'outer;
            }
        }
        kept.push(idx);
    }
    kept.sort_unstable();

    kept.into_iter()
        .map(|peak| {
            let amplitude = s[peak];
            let half = amplitude / 2.0;
            let mut l = peak;
            while l > 0 && s[l - 1] >= half {
                l -= 1;
            }
            let mut r = peak;
            while r + 1 < n && s[r + 1] >= half {
                r += 1;
            }
            let width_ns = ((r - l + 1) as f64) * dt_ns;
            let offset_s = peak as f64 / w.sample_rate_hz;
            PulseFeature {
                time: w.start_time.add_secs_f64(offset_s),
                offset_s,
                amplitude_mv: amplitude,
                width_ns,
                charge_pc: k_cal_pc_per_mv * amplitude,
                phase_deg: 0.0,
            }
        })
        .collect()
}

/// Repetition rate from the autocorrelation of a 1 ms occurrence train.
///
/// The rate is `1 / lag` of the first dominant autocorrelation peak,
/// refined by a centroid around that peak. Falls back to `count / window`
/// when fewer than 3 pulses are available.
pub fn estimate_repetition_rate(pulses: &[PulseFeature], window_s: f64) -> f64 {
    assert!(window_s > 0.0, "window must be positive");
    if pulses.is_empty() {
        return 0.0;
    }
    if pulses.len() < 3 {
        return pulses.len() as f64 / window_s;
    }
    let bins: Vec<i64> = pulses
        .iter()
        .map(|p| (p.offset_s / RATE_BIN_S).floor() as i64)
        .collect();
    let max_lag = ((window_s / RATE_BIN_S) / 2.0).floor() as i64;
    if max_lag < 2 {
        return pulses.len() as f64 / window_s;
    }

    // The train is sparse: accumulate the autocorrelation from pairwise
    // gaps instead of convolving the full train.
    let mut acf = vec![0u32; (max_lag + 1) as usize];
    for i in 0..bins.len() {
        for j in (i + 1)..bins.len() {
            let gap = bins[j] - bins[i];
            if gap >= 1 && gap <= max_lag {
                acf[gap as usize] += 1;
            }
        }
    }

    // Smooth lightly, then pick the first peak that is dominant.
    let radius = 2usize;
    let smoothed: Vec<f64> = (0..acf.len())
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(acf.len() - 1);
            acf[lo..=hi].iter().map(|&c| c as f64).sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let peak_value = smoothed
        .iter()
        .skip(1)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if peak_value <= 0.0 {
        return pulses.len() as f64 / window_s;
    }
    let mut candidate = None;
    for lag in 1..smoothed.len() {
        let v = smoothed[lag];
        let is_max = (lag == 1 || smoothed[lag - 1] <= v)
            && (lag + 1 == smoothed.len() || smoothed[lag + 1] < v);
        if is_max && v >= 0.6 * peak_value {
            candidate = Some(lag);
            break;
        }
    }
    let Some(lag) = candidate else {
        return pulses.len() as f64 / window_s;
    };

    // Centroid refinement over the raw counts around the peak.
    let lo = ((lag as f64) * 0.75).floor().max(1.0) as usize;
    let hi = (((lag as f64) * 1.25).ceil() as usize).min(acf.len() - 1);
    let mut num = 0.0;
    let mut den = 0.0;
    for (l, &c) in acf.iter().enumerate().take(hi + 1).skip(lo) {
        num += l as f64 * c as f64;
        den += c as f64;
    }
    if den == 0.0 {
        return 1.0 / (lag as f64 * RATE_BIN_S);
    }
    1.0 / ((num / den) * RATE_BIN_S)
}

/// Per-pulse phase against the power-frequency reference, plus a 36-bin
/// histogram. Mutates `phase_deg` on each pulse.
pub fn phase_resolve(pulses: &mut [PulseFeature], reference: &VoltageReference) -> Vec<u32> {
    assert!(reference.frequency_hz > 0.0);
    let mut histogram = vec![0u32; 36];
    let zc = reference.zero_crossing_time.as_secs_f64();
    for p in pulses.iter_mut() {
        let t = p.time.as_secs_f64();
        let cycles = (t - zc) * reference.frequency_hz;
        let mut phase = cycles.fract() * 360.0;
        if phase < 0.0 {
            phase += 360.0;
        }
        if phase >= 360.0 {
            phase = 0.0;
        }
        p.phase_deg = phase;
        let bin = ((phase / 10.0).floor() as usize).min(35);
        histogram[bin] += 1;
    }
    histogram
}

/// Windowed summary combining detection, rate, and phase results.
pub fn summarize_window(
    pulses: &[PulseFeature],
    histogram: Vec<u32>,
    window_start: SimTime,
    window_end: SimTime,
) -> PdFeatureSet {
    let window_s = window_end.secs_since(window_start).max(1e-9);
    let max_charge = pulses.iter().map(|p| p.charge_pc).fold(0.0, f64::max);
    let mean_charge = if pulses.is_empty() {
        0.0
    } else {
        pulses.iter().map(|p| p.charge_pc).sum::<f64>() / pulses.len() as f64
    };
    PdFeatureSet {
        window_start,
        window_end,
        max_charge_pc: max_charge,
        mean_charge_pc: mean_charge,
        rate_pps: estimate_repetition_rate(pulses, window_s),
        phase_histogram: histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn waveform(samples: Vec<f64>, rate: f64) -> RawWaveform {
        RawWaveform {
            sample_rate_hz: rate,
            start_time: SimTime::ZERO,
            samples,
        }
    }

    fn pulse_at(offset_s: f64) -> PulseFeature {
        PulseFeature {
            time: SimTime::from_secs_f64(offset_s),
            offset_s,
            amplitude_mv: 50.0,
            width_ns: 50.0,
            charge_pc: 600.0,
            phase_deg: 0.0,
        }
    }

    #[test]
    fn flat_waveform_yields_nothing() {
        let w = waveform(vec![0.0; 1024], 100e6);
        assert!(detect_pulses(&w, 5.0, 12.0).is_empty());
    }

    #[test]
    fn single_pulse_calibrates_to_1200_pc() {
        let mut s = vec![0.0; 1024];
        s[500] = 100.0;
        let w = waveform(s, 100e6);
        let pulses = detect_pulses(&w, 5.0, 12.0);
        assert_eq!(pulses.len(), 1);
        assert_eq!(pulses[0].amplitude_mv, 100.0);
        assert_eq!(pulses[0].charge_pc, 1200.0);
    }

    #[test]
    fn pulses_150ns_apart_merge() {
        // 100 MS/s -> 10 ns per sample; 15 samples = 150 ns apart.
        let mut s = vec![0.0; 1024];
        s[500] = 80.0;
        s[515] = 100.0;
        let w = waveform(s, 100e6);
        let pulses = detect_pulses(&w, 5.0, 12.0);
        assert_eq!(pulses.len(), 1, "expected merge within 200 ns");
        assert_eq!(pulses[0].amplitude_mv, 100.0);
    }

    #[test]
    fn pulses_300ns_apart_stay_separate() {
        let mut s = vec![0.0; 1024];
        s[500] = 80.0;
        s[530] = 100.0;
        let w = waveform(s, 100e6);
        assert_eq!(detect_pulses(&w, 5.0, 12.0).len(), 2);
    }

    #[test]
    fn width_measured_at_half_amplitude() {
        let mut s = vec![0.0; 256];
        // Plateau of 5 samples at 100, shoulders at 40 (below half).
        for i in 100..105 {
            s[i] = 100.0;
        }
        s[99] = 40.0;
        s[105] = 40.0;
        let w = waveform(s, 100e6);
        let pulses = detect_pulses(&w, 5.0, 12.0);
        assert_eq!(pulses.len(), 1);
        assert!((pulses[0].width_ns - 50.0).abs() < 1e-9);
    }

    #[test]
    fn evenly_spaced_12pps_estimates_12() {
        let pulses: Vec<PulseFeature> = (0..12)
            .map(|i| pulse_at((i as f64 + 0.5) / 12.0))
            .collect();
        let rate = estimate_repetition_rate(&pulses, 1.0);
        assert!((rate - 12.0).abs() / 12.0 < 0.05, "rate {rate}");
    }

    #[test]
    fn empty_list_is_zero_pps() {
        assert_eq!(estimate_repetition_rate(&[], 1.0), 0.0);
    }

    #[test]
    fn two_pulses_fall_back_to_count_over_window() {
        let pulses = vec![pulse_at(0.1), pulse_at(0.4)];
        assert!((estimate_repetition_rate(&pulses, 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_is_amplitude_invariant() {
        let mut pulses: Vec<PulseFeature> =
            (0..16).map(|i| pulse_at((i as f64 + 0.3) / 8.0)).collect();
        let base = estimate_repetition_rate(&pulses, 2.0);
        for p in pulses.iter_mut() {
            p.amplitude_mv *= 7.5;
            p.charge_pc *= 7.5;
        }
        let scaled = estimate_repetition_rate(&pulses, 2.0);
        assert_eq!(base, scaled);
    }

    #[test]
    fn phase_of_5ms_pulse_at_50hz_is_90_degrees() {
        let mut pulses = vec![pulse_at(0.005)];
        let hist = phase_resolve(&mut pulses, &VoltageReference::default());
        assert!((pulses[0].phase_deg - 90.0).abs() < 1e-9);
        assert_eq!(hist[9], 1);
    }

    #[test]
    fn phase_wraps_at_full_period() {
        let mut pulses = vec![pulse_at(0.020)];
        phase_resolve(&mut pulses, &VoltageReference::default());
        assert!(pulses[0].phase_deg.abs() < 1e-6);
    }

    #[test]
    fn histogram_total_matches_pulse_count() {
        let mut pulses: Vec<PulseFeature> =
            (0..50).map(|i| pulse_at(i as f64 * 0.0137)).collect();
        let hist = phase_resolve(&mut pulses, &VoltageReference::default());
        assert_eq!(hist.iter().sum::<u32>(), 50);
    }
}
