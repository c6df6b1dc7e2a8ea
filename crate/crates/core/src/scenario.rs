//! Scenario documents: the structured text that configures a run.
//!
//! A scenario document is UTF-8 TOML with a mandatory `schema_version`
//! field. It defines the cable circuits, their monitored points and load
//! profiles, injected defects with activation windows, noise levels,
//! acquisition parameters, monitoring-unit thresholds, and (optionally)
//! the expected outcome table a replay harness checks against.
//!
//! The full schema is documented in the repository README; `examples` of
//! bundled documents live next to the command-line crate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    /// Syntax error; the message carries line/column from the TOML parser.
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {field}: {message}")]
    Invalid { field: String, message: String },
}

impl ScenarioError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub schema_version: u32,
    pub scenario: ScenarioMeta,
    #[serde(default)]
    pub acquisition: AcquisitionCfg,
    #[serde(default)]
    pub imu: ImuDefaultsCfg,
    #[serde(default, rename = "circuit")]
    pub circuits: Vec<CircuitCfg>,
    #[serde(default, rename = "defect")]
    pub defects: Vec<DefectCfg>,
    #[serde(default)]
    pub rules: RulesCfg,
    #[serde(default)]
    pub kpi: KpiCfg,
    #[serde(default)]
    pub expectations: Option<Expectations>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMeta {
    pub name: String,
    pub duration_s: f64,
    pub seed: u64,
    #[serde(default = "default_site")]
    pub site: String,
    #[serde(default = "default_poll_period")]
    pub poll_period_s: f64,
    /// Stride used to skip across stretches with no scheduled activity.
    #[serde(default = "default_idle_stride")]
    pub idle_stride_s: f64,
}

fn default_site() -> String {
    "mine-a".to_string()
}
fn default_poll_period() -> f64 {
    1.0
}
fn default_idle_stride() -> f64 {
    3600.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionCfg {
    /// Sample rate for partial-discharge acquisition. The default resolves
    /// 10 ns pulses; scenario documents typically lower it and rely on the
    /// synthesizer placing each pulse peak on the sample grid.
    #[serde(default = "default_pd_rate")]
    pub pd_sample_rate_hz: f64,
    /// Fraction of each cycle covered by the PD acquisition window.
    #[serde(default = "default_one")]
    pub pd_window_fraction: f64,
    #[serde(default = "default_dts_spacing")]
    pub dts_spacing_m: f64,
    /// Cyclic sensor sampling frequency (current/vibration channels).
    #[serde(default = "default_sampling_hz")]
    pub sampling_hz: f64,
    #[serde(default = "default_mains_hz")]
    pub mains_hz: f64,
}

fn default_pd_rate() -> f64 {
    100e6
}
fn default_one() -> f64 {
    1.0
}
fn default_dts_spacing() -> f64 {
    1.0
}
fn default_sampling_hz() -> f64 {
    10.0
}
fn default_mains_hz() -> f64 {
    50.0
}

impl Default for AcquisitionCfg {
    fn default() -> Self {
        AcquisitionCfg {
            pd_sample_rate_hz: default_pd_rate(),
            pd_window_fraction: 1.0,
            dts_spacing_m: 1.0,
            sampling_hz: default_sampling_hz(),
            mains_hz: 50.0,
        }
    }
}

/// Threshold and debounce defaults applied to every monitoring unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImuDefaultsCfg {
    pub severe_charge_pc: f64,
    pub severe_gradient_c_per_m: f64,
    pub attention_charge_pc: f64,
    pub temp_alarm_c: f64,
    pub rise_alarm_c_per_min: f64,
    pub enter_debounce: u32,
    pub exit_debounce: u32,
    pub detect_threshold_mv: f64,
    pub k_cal_pc_per_mv: f64,
}

impl Default for ImuDefaultsCfg {
    fn default() -> Self {
        ImuDefaultsCfg {
            severe_charge_pc: 1000.0,
            severe_gradient_c_per_m: 10.0,
            attention_charge_pc: 500.0,
            temp_alarm_c: 80.0,
            rise_alarm_c_per_min: 5.0,
            enter_debounce: 3,
            exit_debounce: 10,
            detect_threshold_mv: 10.0,
            k_cal_pc_per_mv: 12.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitCfg {
    pub id: String,
    pub length_m: f64,
    pub rated_current_a: f64,
    #[serde(default = "default_ambient")]
    pub ambient_c: f64,
    /// Thermal constant; when omitted, rated current yields +40 °C.
    #[serde(default)]
    pub k_th_c_per_a2: Option<f64>,
    #[serde(rename = "point")]
    pub points: Vec<PointCfg>,
    #[serde(default, rename = "load")]
    pub load_steps: Vec<LoadStepCfg>,
    #[serde(default)]
    pub noise: NoiseCfg,
    /// Temperature at the current-sensor head, for the drift model.
    #[serde(default = "default_ambient")]
    pub sensor_temp_c: f64,
    /// Fiber-optic current sensor drift coefficient (per °C).
    #[serde(default)]
    pub focs_alpha_per_c: Option<f64>,
    #[serde(default)]
    pub focs_t0_c: Option<f64>,
    /// Electromagnetic transformer saturation; defaults to 1.25× rated.
    #[serde(default)]
    pub ct_saturation_a: Option<f64>,
}

fn default_ambient() -> f64 {
    25.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointCfg {
    pub position_m: f64,
    pub kind: PointKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointKind {
    Joint,
    Termination,
    Span,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadStepCfg {
    pub at_s: f64,
    pub amps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseCfg {
    pub dts_sigma_c: f64,
    pub pd_sigma_mv: f64,
    pub emi_bursts_per_s: f64,
    pub emi_amplitude_mv: f64,
    pub current_sigma_a: f64,
    pub vibration_sigma: f64,
    /// Baseline mechanical vibration (RMS) at every point.
    pub vibration_baseline: f64,
    /// Spurious DTS readings injected per frame (simulated sensor glitches).
    pub spurious_per_frame: f64,
    pub spurious_magnitude_c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectCfg {
    #[serde(default)]
    pub label: Option<String>,
    pub circuit: String,
    pub kind: DefectKind,
    pub position_m: f64,
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default)]
    pub pd_magnitude_pc: f64,
    #[serde(default)]
    pub pd_rate_pps: f64,
    #[serde(default)]
    pub hotspot_delta_c: f64,
    #[serde(default)]
    pub hotspot_ramp_c_per_min: f64,
    #[serde(default = "default_hotspot_sigma")]
    pub hotspot_sigma_m: f64,
    #[serde(default)]
    pub vibration_rms: f64,
}

fn default_hotspot_sigma() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefectKind {
    InternalVoid,
    SurfaceDischarge,
    JointOverheat,
    MechanicalImpact,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RulesCfg {
    /// Inline rule text; when absent the built-in default rule file applies.
    pub inline: Option<String>,
    pub file: Option<String>,
}

/// Coefficients for the cloud KPI formulas.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KpiCfg {
    pub t_alarm_c: f64,
    pub t_ambient_ref_c: f64,
    pub rul_base_days: f64,
    pub target_load_factor_pct: f64,
    pub health_charge_ref_pc: f64,
    pub health_rate_ref_pps: f64,
    pub window_s: f64,
}

impl Default for KpiCfg {
    fn default() -> Self {
        KpiCfg {
            t_alarm_c: 80.0,
            t_ambient_ref_c: 25.0,
            rul_base_days: 3650.0,
            target_load_factor_pct: 76.0,
            health_charge_ref_pc: 1000.0,
            health_rate_ref_pps: 10.0,
            window_s: 86_400.0,
        }
    }
}

/// Expected outcome table for replay-style runs.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Expectations {
    pub pd_episodes: Option<u32>,
    pub overheat_episodes: Option<u32>,
    pub mechanical_episodes: Option<u32>,
    pub severe_episodes: Option<u32>,
    pub kpi_circuit: Option<String>,
    /// Simulated second at which the pre-intervention KPI row is taken.
    pub kpi_pre_at_s: Option<f64>,
    pub pre_load_factor_pct: Option<f64>,
    pub post_load_factor_pct: Option<f64>,
    pub pre_thermal_margin_pct: Option<f64>,
    pub post_thermal_margin_pct: Option<f64>,
}

impl ScenarioDoc {
    /// Parse and validate a scenario document.
    pub fn parse(text: &str) -> Result<ScenarioDoc, ScenarioError> {
        let doc: ScenarioDoc =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.scenario.duration_s <= 0.0 {
            return Err(ScenarioError::invalid("scenario.duration_s", "must be positive"));
        }
        if self.scenario.poll_period_s <= 0.0 {
            return Err(ScenarioError::invalid("scenario.poll_period_s", "must be positive"));
        }
        if !(10.0..=1000.0).contains(&self.acquisition.sampling_hz) {
            return Err(ScenarioError::invalid(
                "acquisition.sampling_hz",
                "must lie within [10, 1000] Hz",
            ));
        }
        if self.acquisition.pd_sample_rate_hz <= 0.0 {
            return Err(ScenarioError::invalid(
                "acquisition.pd_sample_rate_hz",
                "must be positive",
            ));
        }
        if self.circuits.is_empty() {
            return Err(ScenarioError::invalid("circuit", "at least one circuit required"));
        }
        for c in &self.circuits {
            let field = format!("circuit.{}", c.id);
            if c.length_m <= 0.0 {
                return Err(ScenarioError::invalid(&field, "length_m must be positive"));
            }
            if c.rated_current_a <= 0.0 {
                return Err(ScenarioError::invalid(&field, "rated_current_a must be positive"));
            }
            if c.points.is_empty() {
                return Err(ScenarioError::invalid(
                    &field,
                    "at least one monitored point required",
                ));
            }
            for p in &c.points {
                if !(0.0..=c.length_m).contains(&p.position_m) {
                    return Err(ScenarioError::invalid(
                        &format!("{field}.point"),
                        format!("position out of range: {} m on {} m circuit", p.position_m, c.length_m),
                    ));
                }
            }
            for l in &c.load_steps {
                if l.amps < 0.0 {
                    return Err(ScenarioError::invalid(&format!("{field}.load"), "amps must be nonnegative"));
                }
            }
        }
        for (i, d) in self.defects.iter().enumerate() {
            let field = format!("defect[{}]", i);
            let circuit = self
                .circuits
                .iter()
                .find(|c| c.id == d.circuit)
                .ok_or_else(|| {
                    ScenarioError::invalid(&field, format!("unknown circuit '{}'", d.circuit))
                })?;
            if !(0.0..=circuit.length_m).contains(&d.position_m) {
                return Err(ScenarioError::invalid(
                    &field,
                    format!(
                        "position out of range: {} m on {} m circuit",
                        d.position_m, circuit.length_m
                    ),
                ));
            }
            if d.start_s < 0.0 || d.end_s > self.scenario.duration_s || d.end_s <= d.start_s {
                return Err(ScenarioError::invalid(
                    &field,
                    "activation window must lie within the scenario duration",
                ));
            }
            let magnitudes = [
                d.pd_magnitude_pc,
                d.pd_rate_pps,
                d.hotspot_delta_c,
                d.hotspot_ramp_c_per_min,
                d.vibration_rms,
            ];
            if magnitudes.iter().any(|m| *m < 0.0) {
                return Err(ScenarioError::invalid(&field, "magnitudes must be nonnegative"));
            }
            if d.kind == DefectKind::None && magnitudes.iter().any(|m| *m != 0.0) {
                return Err(ScenarioError::invalid(
                    &field,
                    "kind = None requires all magnitudes to be zero",
                ));
            }
            if d.kind == DefectKind::SurfaceDischarge
                && !(100.0..=500.0).contains(&d.pd_magnitude_pc)
            {
                return Err(ScenarioError::invalid(
                    &field,
                    "surface discharge magnitude must lie within [100, 500] pC",
                ));
            }
            if d.hotspot_sigma_m <= 0.0 {
                return Err(ScenarioError::invalid(&field, "hotspot_sigma_m must be positive"));
            }
        }
        Ok(())
    }

    /// Ground-truth fault label implied by the injected defects: the most
    /// severe non-`None` defect kind, with discharge taking precedence.
    pub fn ground_truth_label(&self) -> GroundTruthLabel {
        let mut label = GroundTruthLabel::Normal;
        for d in &self.defects {
            let candidate = match d.kind {
                DefectKind::InternalVoid | DefectKind::SurfaceDischarge => {
                    GroundTruthLabel::PartialDischarge
                }
                DefectKind::JointOverheat => GroundTruthLabel::Overheating,
                DefectKind::MechanicalImpact => GroundTruthLabel::MechanicalStress,
                DefectKind::None => GroundTruthLabel::Normal,
            };
            if (candidate as u8) < (label as u8) {
                label = candidate;
            }
        }
        label
    }
}

/// Labels for corpus scoring, ordered by classification precedence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroundTruthLabel {
    PartialDischarge = 0,
    Overheating = 1,
    MechanicalStress = 2,
    Normal = 3,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_doc() -> String {
        r#"
            schema_version = 1
            [scenario]
            name = "t"
            duration_s = 10.0
            seed = 1
            [[circuit]]
            id = "c1"
            length_m = 1500.0
            rated_current_a = 400.0
            [[circuit.point]]
            position_m = 750.0
            kind = "Joint"
        "#
        .to_string()
    }

    #[test]
    fn minimal_document_parses() {
        let doc = ScenarioDoc::parse(&minimal_doc()).unwrap();
        assert_eq!(doc.circuits.len(), 1);
        assert_eq!(doc.scenario.site, "mine-a");
        assert_eq!(doc.imu.severe_charge_pc, 1000.0);
    }

    #[test]
    fn syntax_error_reports_line_and_column() {
        let err = ScenarioDoc::parse("schema_version = =\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "missing location in: {msg}");
    }

    #[test]
    fn empty_circuit_list_rejected() {
        let text = r#"
            schema_version = 1
            [scenario]
            name = "t"
            duration_s = 10.0
            seed = 1
        "#;
        let err = ScenarioDoc::parse(text).unwrap_err();
        assert!(err.to_string().contains("at least one circuit"));
    }

    #[test]
    fn defect_position_out_of_range_rejected() {
        let mut text = minimal_doc();
        text.push_str(
            r#"
            [[defect]]
            circuit = "c1"
            kind = "JointOverheat"
            position_m = 3000.0
            start_s = 0.0
            end_s = 5.0
            hotspot_delta_c = 30.0
        "#,
        );
        let err = ScenarioDoc::parse(&text).unwrap_err();
        assert!(err.to_string().contains("position out of range"));
    }

    #[test]
    fn none_defect_with_magnitude_rejected() {
        let mut text = minimal_doc();
        text.push_str(
            r#"
            [[defect]]
            circuit = "c1"
            kind = "None"
            position_m = 100.0
            start_s = 0.0
            end_s = 5.0
            pd_magnitude_pc = 10.0
        "#,
        );
        assert!(ScenarioDoc::parse(&text).is_err());
    }

    #[test]
    fn surface_discharge_band_enforced() {
        let mut text = minimal_doc();
        text.push_str(
            r#"
            [[defect]]
            circuit = "c1"
            kind = "SurfaceDischarge"
            position_m = 100.0
            start_s = 0.0
            end_s = 5.0
            pd_magnitude_pc = 900.0
            pd_rate_pps = 3.0
        "#,
        );
        let err = ScenarioDoc::parse(&text).unwrap_err();
        assert!(err.to_string().contains("[100, 500]"));
    }

    #[test]
    fn ground_truth_prefers_discharge() {
        let mut text = minimal_doc();
        text.push_str(
            r#"
            [[defect]]
            circuit = "c1"
            kind = "JointOverheat"
            position_m = 100.0
            start_s = 0.0
            end_s = 5.0
            hotspot_delta_c = 50.0

            [[defect]]
            circuit = "c1"
            kind = "InternalVoid"
            position_m = 200.0
            start_s = 0.0
            end_s = 5.0
            pd_magnitude_pc = 800.0
            pd_rate_pps = 8.0
        "#,
        );
        let doc = ScenarioDoc::parse(&text).unwrap();
        assert_eq!(doc.ground_truth_label(), GroundTruthLabel::PartialDischarge);
    }

    #[test]
    fn round_trips_through_toml() {
        let doc = ScenarioDoc::parse(&minimal_doc()).unwrap();
        let text = doc.to_toml();
        let doc2 = ScenarioDoc::parse(&text).unwrap();
        assert_eq!(doc2.scenario.name, doc.scenario.name);
        assert_eq!(doc2.circuits.len(), doc.circuits.len());
    }
}
