//! Deterministic, seedable sensor simulation over a configured cable
//! network with injected defects.
//!
//! All generators are pure functions of `(configuration, seed, time)`:
//! identical inputs produce bit-identical outputs, from any thread, in any
//! deployment mode. Random streams are derived per (component, label,
//! tick) so values never depend on evaluation order.

pub mod electrical;
pub mod thermal;
pub mod waveform;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::scenario::{DefectKind, PointKind, ScenarioDoc, ScenarioError};
use crate::time::SimTime;

pub use electrical::{CurrentSample, ElectricalModel, VoltageReference};
pub use thermal::{
    add_dts_noise, inject_spurious, synth_temperature_frame, ActiveHotspot, SpuriousInjection,
    SpuriousSpec, SpuriousTarget, TemperatureFrame,
};
pub use waveform::{
    synth_combined_window, synth_pd_waveform, synth_pd_waveform_with_log, InjectedPulse,
    NoiseSpec, RawWaveform, WaveformCfg,
};

/// Derive an independent random stream from a master seed and a list of
/// stable labels. Streams never depend on call order or threading.
pub fn seeded_rng(seed: u64, labels: &[&str]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for l in labels {
        hasher.update([0u8]);
        hasher.update(l.as_bytes());
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    rand::SeedableRng::from_seed(key)
}

/// Injected fault ground truth with its activation window.
#[derive(Debug, Clone)]
pub struct DefectProfile {
    pub kind: DefectKind,
    pub position_m: f64,
    pub pd_magnitude_pc: f64,
    pub pd_rate_pps: f64,
    pub hotspot_delta_c: f64,
    pub hotspot_ramp_c_per_min: f64,
    pub hotspot_sigma_m: f64,
    pub vibration_rms: f64,
}

#[derive(Debug, Clone)]
pub struct ActiveDefect {
    pub label: String,
    pub circuit_id: String,
    pub profile: DefectProfile,
    pub start: SimTime,
    pub end: SimTime,
}

impl ActiveDefect {
    pub fn active_at(&self, t: SimTime) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Debug, Clone)]
pub struct MonitoredPoint {
    pub position_m: f64,
    pub kind: PointKind,
}

#[derive(Debug, Clone)]
pub struct CableCircuit {
    pub id: String,
    pub length_m: f64,
    pub rated_current_a: f64,
    pub ambient_c: f64,
    pub k_th_c_per_a2: f64,
    pub monitored_points: Vec<MonitoredPoint>,
    pub load_steps: Vec<(f64, f64)>,
    pub noise: crate::scenario::NoiseCfg,
    pub sensor_temp_c: f64,
    pub electrical: ElectricalModel,
}

impl CableCircuit {
    /// Load current at a point in time (piecewise constant steps).
    pub fn load_at(&self, t: SimTime) -> f64 {
        let secs = t.as_secs_f64();
        let mut load = 0.0;
        for (at, amps) in &self.load_steps {
            if *at <= secs {
                load = *amps;
            } else {
                break;
            }
        }
        load
    }
}

/// One monitoring unit's place in the network: its position and the cable
/// section it owns (half-way to each neighboring unit).
#[derive(Debug, Clone)]
pub struct ImuPlacement {
    pub imu_id: String,
    pub circuit_id: String,
    pub unit_id: u8,
    pub position_m: f64,
    pub point_kind: PointKind,
    pub section_from_m: f64,
    pub section_to_m: f64,
}

/// Immutable network topology plus injected ground truth.
#[derive(Debug, Clone)]
pub struct CableNetwork {
    pub site: String,
    pub circuits: Vec<CableCircuit>,
    pub defects: Vec<ActiveDefect>,
    pub placements: Vec<ImuPlacement>,
}

impl CableNetwork {
    pub fn from_doc(doc: &ScenarioDoc) -> Result<CableNetwork, ScenarioError> {
        doc.validate()?;
        let mut circuits = Vec::new();
        let mut placements = Vec::new();
        let mut unit_id: u8 = 1;
        for c in &doc.circuits {
            let k_th = c
                .k_th_c_per_a2
                .unwrap_or(40.0 / (c.rated_current_a * c.rated_current_a));
            let mut points: Vec<MonitoredPoint> = c
                .points
                .iter()
                .map(|p| MonitoredPoint {
                    position_m: p.position_m,
                    kind: p.kind,
                })
                .collect();
            points.sort_by(|a, b| a.position_m.total_cmp(&b.position_m));
            let mut electrical = ElectricalModel::for_rated(c.rated_current_a);
            if let Some(a) = c.focs_alpha_per_c {
                electrical.alpha_per_c = a;
            }
            if let Some(t0) = c.focs_t0_c {
                electrical.t0_c = t0;
            }
            if let Some(sat) = c.ct_saturation_a {
                electrical.ct_saturation_a = sat;
            }
            let mut load_steps: Vec<(f64, f64)> =
                c.load_steps.iter().map(|l| (l.at_s, l.amps)).collect();
            load_steps.sort_by(|a, b| a.0.total_cmp(&b.0));

            for (i, p) in points.iter().enumerate() {
                let from = if i == 0 {
                    0.0
                } else {
                    (points[i - 1].position_m + p.position_m) / 2.0
                };
                let to = if i + 1 == points.len() {
                    c.length_m
                } else {
                    (p.position_m + points[i + 1].position_m) / 2.0
                };
                placements.push(ImuPlacement {
                    imu_id: format!("{}-imu{}", c.id, i + 1),
                    circuit_id: c.id.clone(),
                    unit_id,
                    position_m: p.position_m,
                    point_kind: p.kind,
                    section_from_m: from,
                    section_to_m: to,
                });
                unit_id = unit_id.wrapping_add(1).max(1);
            }
            circuits.push(CableCircuit {
                id: c.id.clone(),
                length_m: c.length_m,
                rated_current_a: c.rated_current_a,
                ambient_c: c.ambient_c,
                k_th_c_per_a2: k_th,
                monitored_points: points,
                load_steps,
                noise: c.noise.clone(),
                sensor_temp_c: c.sensor_temp_c,
                electrical,
            });
        }
        let defects = doc
            .defects
            .iter()
            .enumerate()
            .map(|(i, d)| ActiveDefect {
                label: d.label.clone().unwrap_or_else(|| format!("defect-{i}")),
                circuit_id: d.circuit.clone(),
                profile: DefectProfile {
                    kind: d.kind,
                    position_m: d.position_m,
                    pd_magnitude_pc: d.pd_magnitude_pc,
                    pd_rate_pps: d.pd_rate_pps,
                    hotspot_delta_c: d.hotspot_delta_c,
                    hotspot_ramp_c_per_min: d.hotspot_ramp_c_per_min,
                    hotspot_sigma_m: d.hotspot_sigma_m,
                    vibration_rms: d.vibration_rms,
                },
                start: SimTime::from_secs_f64(d.start_s),
                end: SimTime::from_secs_f64(d.end_s),
            })
            .collect();
        Ok(CableNetwork {
            site: doc.scenario.site.clone(),
            circuits,
            defects,
            placements,
        })
    }

    pub fn circuit(&self, id: &str) -> Option<&CableCircuit> {
        self.circuits.iter().find(|c| c.id == id)
    }
}

/// Parse a scenario document into an immutable network.
pub fn build_network(config_text: &str) -> Result<CableNetwork, ScenarioError> {
    let doc = ScenarioDoc::parse(config_text)?;
    CableNetwork::from_doc(&doc)
}

/// Everything one monitoring unit reads during a single cycle.
#[derive(Debug, Clone)]
pub struct SensorInputs {
    pub time: SimTime,
    pub waveform: Option<RawWaveform>,
    /// Ground-truth injection log for the window (oracle for tests).
    pub injected_pulses: Vec<InjectedPulse>,
    /// Temperature frame slice covering the unit's cable section.
    pub frame: Option<TemperatureFrame>,
    /// Ground-truth spurious indices injected into `frame` (frame-local).
    pub spurious_indices: Vec<usize>,
    pub currents: Vec<CurrentSample>,
    pub vibration_rms: Option<f64>,
    pub voltage: VoltageReference,
}

/// Deterministic signal generator for a whole scenario.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub network: CableNetwork,
    pub doc: ScenarioDoc,
    seed: u64,
}

impl Simulator {
    pub fn new(doc: ScenarioDoc) -> Result<Simulator, ScenarioError> {
        let network = CableNetwork::from_doc(&doc)?;
        let seed = doc.scenario.seed;
        Ok(Simulator { network, doc, seed })
    }

    pub fn from_text(text: &str) -> Result<Simulator, ScenarioError> {
        Simulator::new(ScenarioDoc::parse(text)?)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn voltage_reference(&self) -> VoltageReference {
        VoltageReference {
            frequency_hz: self.doc.acquisition.mains_hz,
            ..VoltageReference::default()
        }
    }

    fn active_hotspots(&self, circuit_id: &str, t: SimTime) -> Vec<ActiveHotspot> {
        self.network
            .defects
            .iter()
            .filter(|d| d.circuit_id == circuit_id && d.active_at(t))
            .filter(|d| {
                d.profile.hotspot_delta_c > 0.0 || d.profile.hotspot_ramp_c_per_min > 0.0
            })
            .map(|d| ActiveHotspot {
                position_m: d.profile.position_m,
                delta_c: d.profile.hotspot_delta_c,
                ramp_c_per_min: d.profile.hotspot_ramp_c_per_min,
                sigma_m: d.profile.hotspot_sigma_m,
                active_since: d.start,
            })
            .collect()
    }

    /// Full-circuit temperature frame, with measurement noise and any
    /// scheduled spurious readings applied. Returns the frame and the
    /// ground-truth spurious indices.
    pub fn circuit_frame(&self, circuit: &CableCircuit, t: SimTime) -> (TemperatureFrame, Vec<usize>) {
        let mut frame = synth_temperature_frame(
            circuit.length_m,
            self.doc.acquisition.dts_spacing_m,
            circuit.ambient_c,
            circuit.k_th_c_per_a2,
            circuit.load_at(t),
            &self.active_hotspots(&circuit.id, t),
            t,
        );
        let tick = t.0.to_string();
        let mut rng = seeded_rng(self.seed, &["dts", &circuit.id, &tick]);
        add_dts_noise(&mut frame, circuit.noise.dts_sigma_c, &mut rng);
        let mut indices = Vec::new();
        if circuit.noise.spurious_per_frame > 0.0 {
            let expected = circuit.noise.spurious_per_frame;
            let mut count = expected.floor() as usize;
            if rng.gen_bool((expected - count as f64).clamp(0.0, 1.0)) {
                count += 1;
            }
            if count > 0 {
                let spec = SpuriousSpec {
                    target: SpuriousTarget::Count(count),
                    magnitude_c: if circuit.noise.spurious_magnitude_c != 0.0 {
                        circuit.noise.spurious_magnitude_c
                    } else {
                        25.0
                    },
                };
                let seed = rng.gen::<u64>();
                let injected = inject_spurious(&frame, &spec, seed).expect("count mode in range");
                frame = injected.frame;
                indices = injected.indices;
            }
        }
        (frame, indices)
    }

    /// All sensor readings one unit collects for the cycle ending at `t`.
    pub fn sensor_inputs(&self, placement: &ImuPlacement, t: SimTime) -> SensorInputs {
        let circuit = self
            .network
            .circuit(&placement.circuit_id)
            .expect("placement references known circuit");
        let acq = &self.doc.acquisition;
        let window_s = self.doc.scenario.poll_period_s * acq.pd_window_fraction;
        let tick = t.0.to_string();
        let voltage = self.voltage_reference();

        // Partial discharge: all active discharging defects in this
        // unit's section, overlaid on one acquisition window.
        let cfg = WaveformCfg {
            sample_rate_hz: acq.pd_sample_rate_hz,
            start_time: SimTime(t.0.saturating_sub(SimTime::from_secs_f64(window_s).0)),
            voltage: voltage.clone(),
            k_cal_pc_per_mv: self.doc.imu.k_cal_pc_per_mv,
        };
        let sources: Vec<(&DefectProfile, u64)> = self
            .network
            .defects
            .iter()
            .filter(|d| {
                d.circuit_id == placement.circuit_id
                    && d.active_at(t)
                    && d.profile.pd_rate_pps > 0.0
                    && d.profile.pd_magnitude_pc > 0.0
                    && d.profile.position_m >= placement.section_from_m
                    && d.profile.position_m <= placement.section_to_m
            })
            .map(|d| {
                let mut h = seeded_rng(self.seed, &["pd-src", &d.label, &tick]);
                (&d.profile, h.gen::<u64>())
            })
            .collect();
        let noise = NoiseSpec {
            gaussian_mv: circuit.noise.pd_sigma_mv,
            emi_bursts_per_s: circuit.noise.emi_bursts_per_s,
            emi_amplitude_mv: circuit.noise.emi_amplitude_mv,
            emi_width_ns: 2000.0,
        };
        let mut noise_seed_rng = seeded_rng(self.seed, &["pd-window", &placement.imu_id, &tick]);
        let (waveform, injected) = synth_combined_window(
            &sources,
            window_s,
            noise_seed_rng.gen::<u64>(),
            &noise,
            &cfg,
        );

        // Temperature: section slice of the circuit frame.
        let (full_frame, spurious) = self.circuit_frame(circuit, t);
        let frame = full_frame.slice(placement.section_from_m, placement.section_to_m);
        let offset = ((frame.start_m - full_frame.start_m) / full_frame.spacing_m).round() as usize;
        let local_spurious: Vec<usize> = spurious
            .iter()
            .filter_map(|&i| {
                if i >= offset && i < offset + frame.temps_c.len() {
                    Some(i - offset)
                } else {
                    None
                }
            })
            .collect();

        // Current: sub-sampled at the cyclic sampling frequency.
        let n = ((acq.sampling_hz * self.doc.scenario.poll_period_s).round() as usize).max(1);
        let mut cur_rng = seeded_rng(self.seed, &["current", &circuit.id, &tick]);
        let load = circuit.load_at(t);
        let currents = (0..n)
            .map(|k| {
                let jitter = if circuit.noise.current_sigma_a > 0.0 {
                    Normal::new(0.0, circuit.noise.current_sigma_a)
                        .unwrap()
                        .sample(&mut cur_rng)
                } else {
                    0.0
                };
                let st = t.add_secs_f64(
                    -self.doc.scenario.poll_period_s
                        + (k as f64 + 1.0) / acq.sampling_hz.max(1.0),
                );
                circuit
                    .electrical
                    .synth_current_sample(load + jitter, circuit.sensor_temp_c, st)
            })
            .collect();

        // Vibration: baseline plus any active mechanical defect in section.
        let mut vib = circuit.noise.vibration_baseline;
        for d in &self.network.defects {
            if d.circuit_id == placement.circuit_id
                && d.active_at(t)
                && d.profile.vibration_rms > 0.0
                && d.profile.position_m >= placement.section_from_m
                && d.profile.position_m <= placement.section_to_m
            {
                vib += d.profile.vibration_rms;
            }
        }
        if circuit.noise.vibration_sigma > 0.0 {
            let mut vib_rng = seeded_rng(self.seed, &["vib", &placement.imu_id, &tick]);
            vib += Normal::new(0.0, circuit.noise.vibration_sigma)
                .unwrap()
                .sample(&mut vib_rng);
        }

        SensorInputs {
            time: t,
            waveform: Some(waveform),
            injected_pulses: injected,
            frame: Some(frame),
            spurious_indices: local_spurious,
            currents,
            vibration_rms: Some(vib.max(0.0)),
            voltage,
        }
    }

    /// Merged activity windows (defect activations padded by `margin_s`),
    /// used by harnesses to stride across quiet stretches.
    pub fn activity_windows(&self, margin_s: f64) -> Vec<(f64, f64)> {
        let mut spans: Vec<(f64, f64)> = self
            .network
            .defects
            .iter()
            .map(|d| {
                (
                    (d.start.as_secs_f64() - margin_s).max(0.0),
                    (d.end.as_secs_f64() + margin_s).min(self.doc.scenario.duration_s),
                )
            })
            .collect();
        // Load steps are activity too: KPI snapshots must catch them.
        for c in &self.network.circuits {
            for (at, _) in &c.load_steps {
                spans.push((
                    (at - margin_s).max(0.0),
                    (at + margin_s).min(self.doc.scenario.duration_s),
                ));
            }
        }
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for s in spans {
            match merged.last_mut() {
                Some(last) if s.0 <= last.1 => last.1 = last.1.max(s.1),
                _ => merged.push(s),
            }
        }
        merged
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_CIRCUITS: &str = r#"
        schema_version = 1
        [scenario]
        name = "two"
        duration_s = 60.0
        seed = 9
        [[circuit]]
        id = "circuit-1"
        length_m = 1500.0
        rated_current_a = 400.0
        [[circuit.point]]
        position_m = 300.0
        kind = "Joint"
        [[circuit.point]]
        position_m = 1100.0
        kind = "Joint"
        [[circuit.load]]
        at_s = 0.0
        amps = 320.0
        [[circuit]]
        id = "circuit-2"
        length_m = 2700.0
        rated_current_a = 400.0
        [[circuit.point]]
        position_m = 1350.0
        kind = "Joint"
    "#;

    #[test]
    fn builds_two_circuit_network() {
        let net = build_network(TWO_CIRCUITS).unwrap();
        assert_eq!(net.circuits.len(), 2);
        assert_eq!(net.placements.len(), 3);
        // Sections partition each circuit at midpoints.
        assert_eq!(net.placements[0].section_from_m, 0.0);
        assert_eq!(net.placements[0].section_to_m, 700.0);
        assert_eq!(net.placements[1].section_from_m, 700.0);
        assert_eq!(net.placements[1].section_to_m, 1500.0);
    }

    #[test]
    fn network_build_is_deterministic() {
        let a = build_network(TWO_CIRCUITS).unwrap();
        let b = build_network(TWO_CIRCUITS).unwrap();
        assert_eq!(a.placements.len(), b.placements.len());
        assert_eq!(a.circuits[0].k_th_c_per_a2, b.circuits[0].k_th_c_per_a2);
    }

    #[test]
    fn default_thermal_constant_gives_rated_rise() {
        let net = build_network(TWO_CIRCUITS).unwrap();
        let c = &net.circuits[0];
        let rise = c.k_th_c_per_a2 * c.rated_current_a * c.rated_current_a;
        assert!((rise - 40.0).abs() < 1e-9);
    }

    #[test]
    fn sensor_inputs_are_deterministic() {
        let mut doc = ScenarioDoc::parse(TWO_CIRCUITS).unwrap();
        doc.acquisition.pd_sample_rate_hz = 100e3;
        doc.circuits[0].noise.dts_sigma_c = 0.3;
        doc.circuits[0].noise.pd_sigma_mv = 1.0;
        let sim = Simulator::new(doc).unwrap();
        let p = sim.network.placements[0].clone();
        let t = SimTime::from_secs(10);
        let a = sim.sensor_inputs(&p, t);
        let b = sim.sensor_inputs(&p, t);
        assert_eq!(a.waveform.as_ref().unwrap().samples, b.waveform.as_ref().unwrap().samples);
        assert_eq!(a.frame.as_ref().unwrap().temps_c, b.frame.as_ref().unwrap().temps_c);
        assert_eq!(a.currents[0].i_focs_a, b.currents[0].i_focs_a);
    }

    #[test]
    fn load_steps_apply_in_order() {
        let mut doc = ScenarioDoc::parse(TWO_CIRCUITS).unwrap();
        doc.circuits[0].load_steps.push(crate::scenario::LoadStepCfg {
            at_s: 30.0,
            amps: 200.0,
        });
        let sim = Simulator::new(doc).unwrap();
        let c = &sim.network.circuits[0];
        assert_eq!(c.load_at(SimTime::from_secs(10)), 320.0);
        assert_eq!(c.load_at(SimTime::from_secs(30)), 200.0);
        assert_eq!(c.load_at(SimTime::from_secs(59)), 200.0);
    }

    #[test]
    fn activity_windows_merge_overlaps() {
        let mut doc = ScenarioDoc::parse(TWO_CIRCUITS).unwrap();
        for (s, e) in [(10.0, 20.0), (18.0, 25.0), (50.0, 55.0)] {
            doc.defects.push(crate::scenario::DefectCfg {
                label: None,
                circuit: "circuit-1".into(),
                kind: DefectKind::JointOverheat,
                position_m: 300.0,
                start_s: s,
                end_s: e,
                pd_magnitude_pc: 0.0,
                pd_rate_pps: 0.0,
                hotspot_delta_c: 20.0,
                hotspot_ramp_c_per_min: 0.0,
                hotspot_sigma_m: 1.0,
                vibration_rms: 0.0,
            });
        }
        let sim = Simulator::new(doc).unwrap();
        let w = sim.activity_windows(2.0);
        assert_eq!(w.len(), 3); // load step at 0, merged 8..27, 48..57
        assert!((w[1].0 - 8.0).abs() < 1e-9);
        assert!((w[1].1 - 27.0).abs() < 1e-9);
    }
}
