//! Wavelet denoising: Daubechies-4 DWT with soft universal thresholding.
//!
//! Noise sigma is estimated from the finest detail level via the median
//! absolute deviation (`median(|d1|) / 0.6745`) and every detail level is
//! soft-thresholded at `sigma * sqrt(2 ln N)`. The transform is periodized;
//! inputs are zero-padded up to a multiple of `2^levels` and trimmed back,
//! so output energy never exceeds input energy.

use crate::sim::RawWaveform;

use super::DspError;

/// Daubechies-4 low-pass decomposition filter (8 taps).
const DB4_LO: [f64; 8] = [
    -0.010597401784997278,
    0.032883011666982945,
    0.030841381835986965,
    -0.187034811718881060,
    -0.027983769416983849,
    0.630880767929590380,
    0.714846570552541600,
    0.230377813308855140,
];

fn high_pass() -> [f64; 8] {
    // Quadrature mirror: g[n] = (-1)^n h[L-1-n].
    let mut g = [0.0; 8];
    for (n, slot) in g.iter_mut().enumerate() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        *slot = sign * DB4_LO[7 - n];
    }
    g
}

/// One analysis level: periodic convolution + decimation by 2.
fn analysis_step(signal: &[f64], lo: &[f64; 8], hi: &[f64; 8]) -> (Vec<f64>, Vec<f64>) {
    let n = signal.len();
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        let base = 2 * k;
        for j in 0..8 {
            let idx = if base >= j { base - j } else { base + n - j };
            let x = signal[idx];
            a += lo[j] * x;
            d += hi[j] * x;
        }
        approx[k] = a;
        detail[k] = d;
    }
    (approx, detail)
}

/// One synthesis level: the exact transpose of the analysis step.
fn synthesis_step(approx: &[f64], detail: &[f64], lo: &[f64; 8], hi: &[f64; 8]) -> Vec<f64> {
    let half = approx.len();
    let n = half * 2;
    let mut out = vec![0.0; n];
    for k in 0..half {
        let a = approx[k];
        let d = detail[k];
        let base = 2 * k;
        for j in 0..8 {
            let idx = if base >= j { base - j } else { base + n - j };
            out[idx] += lo[j] * a + hi[j] * d;
        }
    }
    out
}

/// Multi-level forward transform. `details[0]` is the finest scale.
pub fn dwt_forward(signal: &[f64], levels: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let lo = DB4_LO;
    let hi = high_pass();
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        if approx.len() < 2 {
            break;
        }
        let (a, d) = analysis_step(&approx, &lo, &hi);
        details.push(d);
        approx = a;
    }
    (approx, details)
}

/// Inverse of [`dwt_forward`].
pub fn dwt_inverse(approx: &[f64], details: &[Vec<f64>]) -> Vec<f64> {
    let lo = DB4_LO;
    let hi = high_pass();
    let mut current = approx.to_vec();
    for d in details.iter().rev() {
        current = synthesis_step(&current, d, &lo, &hi);
    }
    current
}

fn median_abs(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    abs.sort_by(|a, b| a.total_cmp(b));
    let mid = abs.len() / 2;
    if abs.len() % 2 == 0 {
        (abs[mid - 1] + abs[mid]) / 2.0
    } else {
        abs[mid]
    }
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Denoise a sample buffer in place of a waveform. Returns the denoised
/// samples and the threshold that was applied.
pub fn denoise_samples(samples: &[f64], levels: usize) -> Result<(Vec<f64>, f64), DspError> {
    if levels == 0 {
        return Ok((samples.to_vec(), 0.0));
    }
    let n = samples.len();
    if n < (1usize << levels) {
        return Err(DspError::InputTooShort {
            len: n,
            needed: 1 << levels,
        });
    }
    // Zero-pad to a multiple of 2^levels; trimmed after reconstruction.
    let block = 1usize << levels;
    let padded_len = n.div_ceil(block) * block;
    let mut padded = Vec::with_capacity(padded_len);
    padded.extend_from_slice(samples);
    padded.resize(padded_len, 0.0);

    let (approx, mut details) = dwt_forward(&padded, levels);
    let sigma = median_abs(&details[0]) / 0.6745;
    let threshold = sigma * (2.0 * (n as f64).ln()).sqrt();
    for level in details.iter_mut() {
        for c in level.iter_mut() {
            *c = soft(*c, threshold);
        }
    }
    let mut out = dwt_inverse(&approx, &details);
    out.truncate(n);
    Ok((out, threshold))
}

/// Denoise a raw waveform; output length equals input length.
pub fn denoise_wavelet(w: &RawWaveform, levels: usize) -> Result<RawWaveform, DspError> {
    let (samples, _) = denoise_samples(&w.samples, levels)?;
    Ok(RawWaveform {
        sample_rate_hz: w.sample_rate_hz,
        start_time: w.start_time,
        samples,
    })
}
