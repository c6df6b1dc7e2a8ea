//! Distributed temperature frame synthesis.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::time::SimTime;

use super::seeded_rng;

/// One distributed-temperature frame: a reading per meter point.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureFrame {
    pub time: SimTime,
    /// Cable position of the first point (frames may be section slices).
    pub start_m: f64,
    pub spacing_m: f64,
    pub temps_c: Vec<f64>,
}

impl TemperatureFrame {
    pub fn position_of(&self, index: usize) -> f64 {
        self.start_m + index as f64 * self.spacing_m
    }

    /// Slice covering `[from_m, to_m]`, clamped to the frame.
    pub fn slice(&self, from_m: f64, to_m: f64) -> TemperatureFrame {
        let first = ((from_m - self.start_m) / self.spacing_m).floor().max(0.0) as usize;
        let last = (((to_m - self.start_m) / self.spacing_m).ceil() as usize)
            .min(self.temps_c.len().saturating_sub(1));
        TemperatureFrame {
            time: self.time,
            start_m: self.position_of(first),
            spacing_m: self.spacing_m,
            temps_c: self.temps_c[first..=last].to_vec(),
        }
    }
}

/// A hotspot active at synthesis time.
#[derive(Debug, Clone)]
pub struct ActiveHotspot {
    pub position_m: f64,
    pub delta_c: f64,
    pub ramp_c_per_min: f64,
    pub sigma_m: f64,
    pub active_since: SimTime,
}

/// Noise-free thermal profile: first-order load heating plus Gaussian
/// hotspot bumps truncated at ±3σ.
pub fn synth_temperature_frame(
    length_m: f64,
    spacing_m: f64,
    ambient_c: f64,
    k_th_c_per_a2: f64,
    load_a: f64,
    hotspots: &[ActiveHotspot],
    t: SimTime,
) -> TemperatureFrame {
    assert!(load_a >= 0.0, "load must be nonnegative");
    let n = (length_m / spacing_m).floor() as usize + 1;
    let baseline = ambient_c + k_th_c_per_a2 * load_a * load_a;
    let mut temps = vec![baseline; n];
    for h in hotspots {
        let minutes = t.secs_since(h.active_since) / 60.0;
        let amplitude = h.delta_c + h.ramp_c_per_min * minutes;
        if amplitude == 0.0 {
            continue;
        }
        let reach = 3.0 * h.sigma_m;
        let first = (((h.position_m - reach) / spacing_m).floor().max(0.0)) as usize;
        let last = ((h.position_m + reach) / spacing_m).ceil() as usize;
        for i in first..=last.min(n - 1) {
            let x = i as f64 * spacing_m - h.position_m;
            if x.abs() > reach {
                continue;
            }
            temps[i] += amplitude * (-x * x / (2.0 * h.sigma_m * h.sigma_m)).exp();
        }
    }
    TemperatureFrame {
        time: t,
        start_m: 0.0,
        spacing_m,
        temps_c: temps,
    }
}

/// Add measurement noise in place (simulator wrapper around the pure model).
pub fn add_dts_noise(frame: &mut TemperatureFrame, sigma_c: f64, rng: &mut impl Rng) {
    if sigma_c <= 0.0 {
        return;
    }
    let dist = Normal::new(0.0, sigma_c).expect("valid sigma");
    for t in frame.temps_c.iter_mut() {
        *t += dist.sample(rng);
    }
}

/// Which points to corrupt with spurious readings.
#[derive(Debug, Clone)]
pub enum SpuriousTarget {
    Indices(Vec<usize>),
    Count(usize),
}

#[derive(Debug, Clone)]
pub struct SpuriousSpec {
    pub target: SpuriousTarget,
    pub magnitude_c: f64,
}

/// A corrupted frame, with the injected indices kept as ground truth.
#[derive(Debug, Clone)]
pub struct SpuriousInjection {
    pub frame: TemperatureFrame,
    pub indices: Vec<usize>,
}

/// Replace the selected points with outliers of the configured magnitude.
/// The input frame is untouched.
pub fn inject_spurious(
    frame: &TemperatureFrame,
    spec: &SpuriousSpec,
    seed: u64,
) -> Result<SpuriousInjection, String> {
    let n = frame.temps_c.len();
    let indices = match &spec.target {
        SpuriousTarget::Indices(list) => {
            for &i in list {
                if i >= n {
                    return Err(format!("spurious index {i} out of range (frame has {n} points)"));
                }
            }
            list.clone()
        }
        SpuriousTarget::Count(count) => {
            let mut rng = seeded_rng(seed, &["spurious"]);
            let mut picked = Vec::with_capacity(*count);
            while picked.len() < (*count).min(n) {
                let i = rng.gen_range(0..n);
                if !picked.contains(&i) {
                    picked.push(i);
                }
            }
            picked.sort_unstable();
            picked
        }
    };
    let mut out = frame.clone();
    for &i in &indices {
        out.temps_c[i] += spec.magnitude_c;
    }
    Ok(SpuriousInjection { frame: out, indices })
}
