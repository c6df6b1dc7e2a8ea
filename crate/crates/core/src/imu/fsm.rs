//! Threshold screening state machine with entry/exit debounce.
//!
//! Severe: charge above `severe_charge_pc` or gradient above
//! `severe_gradient_c_per_m`. Attention: charge above
//! `attention_charge_pc`, temperature above `temp_alarm_c`, or rise rate
//! above `rise_alarm_c_per_min`. All comparisons are strict. The machine
//! escalates after `enter_debounce` consecutive cycles whose desired tier
//! is higher than the current one, de-escalates after `exit_debounce`
//! consecutive lower cycles, and emits an alert exactly on upward
//! transitions.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::time::SimTime;

use super::record::{FeatureRecord, Tier};
use super::ImuConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FsmState {
    pub tier: Tier,
    pub enter_count: u32,
    pub exit_count: u32,
}

impl Default for FsmState {
    fn default() -> Self {
        FsmState {
            tier: Tier::Normal,
            enter_count: 0,
            exit_count: 0,
        }
    }
}

/// Escalation alert pushed to the upstream server on state entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Alert {
    /// Idempotency key; receivers dedupe on it.
    pub uuid: String,
    pub imu_id: String,
    pub time: SimTime,
    pub entered_state: Tier,
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
}

/// Tier the record's metrics call for, with the strongest breached
/// predicate as `(metric, value, threshold)`.
fn desired_tier(rec: &FeatureRecord, cfg: &ImuConfig) -> (Tier, Option<(&'static str, f64, f64)>) {
    let severe: [(&'static str, f64, f64); 2] = [
        ("max_charge_pc", rec.max_charge_pc, cfg.severe_charge_pc),
        (
            "max_gradient_c_per_m",
            rec.max_gradient_c_per_m,
            cfg.severe_gradient_c_per_m,
        ),
    ];
    if let Some(hit) = strongest_breach(&severe) {
        return (Tier::Severe, Some(hit));
    }
    let attention: [(&'static str, f64, f64); 3] = [
        ("max_charge_pc", rec.max_charge_pc, cfg.attention_charge_pc),
        ("max_temp_c", rec.max_temp_c, cfg.temp_alarm_c),
        (
            "max_rise_rate_c_per_min",
            rec.max_rise_rate_c_per_min,
            cfg.rise_alarm_c_per_min,
        ),
    ];
    if let Some(hit) = strongest_breach(&attention) {
        return (Tier::Attention, Some(hit));
    }
    (Tier::Normal, None)
}

fn strongest_breach(
    candidates: &[(&'static str, f64, f64)],
) -> Option<(&'static str, f64, f64)> {
    candidates
        .iter()
        .filter(|(_, value, threshold)| value > threshold)
        .max_by(|a, b| (a.1 / a.2).total_cmp(&(b.1 / b.2)))
        .copied()
}

/// One debounced transition step. Pure: the state sequence is a function
/// of the record sequence and the configuration.
pub fn fsm_step(
    state: &FsmState,
    rec: &FeatureRecord,
    cfg: &ImuConfig,
) -> (FsmState, Option<Alert>) {
    let (desired, breach) = desired_tier(rec, cfg);
    let mut next = *state;
    let mut alert = None;

    use std::cmp::Ordering::*;
    match desired.cmp(&state.tier) {
        Equal => {
            next.enter_count = 0;
            next.exit_count = 0;
        }
        Greater => {
            next.enter_count += 1;
            next.exit_count = 0;
            if next.enter_count >= cfg.enter_debounce {
                next.tier = desired;
                next.enter_count = 0;
                let (metric, value, threshold) =
                    breach.expect("upward transition implies a breach");
                alert = Some(Alert {
                    uuid: alert_uuid(&rec.imu_id, rec.seq, desired),
                    imu_id: rec.imu_id.clone(),
                    time: rec.time,
                    entered_state: desired,
                    metric: metric.to_string(),
                    value,
                    threshold,
                });
            }
        }
        Less => {
            next.exit_count += 1;
            next.enter_count = 0;
            if next.exit_count >= cfg.exit_debounce {
                next.tier = desired;
                next.exit_count = 0;
            }
        }
    }
    (next, alert)
}

/// Deterministic idempotency key for an escalation.
pub fn alert_uuid(imu_id: &str, seq: u64, tier: Tier) -> String {
    let mut hasher = Sha256::new();
    hasher.update(imu_id.as_bytes());
    hasher.update(seq.to_le_bytes());
    hasher.update([tier.code() as u8]);
    let d = hasher.finalize();
    format!(
        "{:02x}{:02x}{:02x}{:02x}-{:02x}{:02x}-{:02x}{:02x}-{:02x}{:02x}-{:02x}{:02x}{:02x}{:02x}{:02x}{:02x}",
        d[0], d[1], d[2], d[3], d[4], d[5], d[6], d[7], d[8], d[9], d[10], d[11], d[12], d[13], d[14], d[15]
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ImuConfig {
        ImuConfig::new("imu-1", 100.0)
    }

    fn rec_with_charge(seq: u64, charge: f64) -> FeatureRecord {
        let mut r = FeatureRecord::quiet("imu-1", seq, SimTime::from_secs(seq));
        r.max_charge_pc = charge;
        r.max_temp_c = 30.0;
        r
    }

    #[test]
    fn three_severe_breaches_escalate_with_one_alert() {
        let cfg = cfg();
        let mut state = FsmState::default();
        let mut alerts = 0;
        for seq in 0..5 {
            let (next, alert) = fsm_step(&state, &rec_with_charge(seq, 1200.0), &cfg);
            state = next;
            if alert.is_some() {
                alerts += 1;
            }
        }
        assert_eq!(state.tier, Tier::Severe);
        assert_eq!(alerts, 1, "exactly one alert per upward transition");
    }

    #[test]
    fn all_zero_records_stay_normal_forever() {
        let cfg = cfg();
        let mut state = FsmState::default();
        for seq in 0..100 {
            let (next, alert) = fsm_step(&state, &rec_with_charge(seq, 0.0), &cfg);
            state = next;
            assert!(alert.is_none());
            assert_eq!(state.tier, Tier::Normal);
        }
    }

    #[test]
    fn two_breaches_then_clear_stays_normal() {
        let cfg = cfg();
        let mut state = FsmState::default();
        for (seq, charge) in [(0u64, 1200.0), (1, 1200.0), (2, 0.0)] {
            let (next, alert) = fsm_step(&state, &rec_with_charge(seq, charge), &cfg);
            state = next;
            assert!(alert.is_none());
        }
        assert_eq!(state.tier, Tier::Normal);
        assert_eq!(state.enter_count, 0, "clear resets the debounce counter");
    }

    #[test]
    fn boundary_value_never_breaches() {
        let cfg = cfg();
        let mut state = FsmState::default();
        for seq in 0..20 {
            let (next, _) = fsm_step(&state, &rec_with_charge(seq, 1000.0), &cfg);
            state = next;
        }
        // 1000 pC is the attention tier (> 500), never severe (strict >).
        assert_eq!(state.tier, Tier::Attention);
    }

    #[test]
    fn deescalation_requires_exit_debounce() {
        let cfg = cfg();
        let mut state = FsmState::default();
        for seq in 0..3 {
            state = fsm_step(&state, &rec_with_charge(seq, 1200.0), &cfg).0;
        }
        assert_eq!(state.tier, Tier::Severe);
        for seq in 3..12 {
            state = fsm_step(&state, &rec_with_charge(seq, 0.0), &cfg).0;
            assert_eq!(state.tier, Tier::Severe, "still within exit debounce");
        }
        state = fsm_step(&state, &rec_with_charge(12, 0.0), &cfg).0;
        assert_eq!(state.tier, Tier::Normal);
    }

    #[test]
    fn gradient_alone_reaches_severe() {
        let cfg = cfg();
        let mut state = FsmState::default();
        let mut alert = None;
        for seq in 0..3 {
            let mut r = rec_with_charge(seq, 0.0);
            r.max_gradient_c_per_m = 12.0;
            let (next, a) = fsm_step(&state, &r, &cfg);
            state = next;
            alert = a.or(alert);
        }
        assert_eq!(state.tier, Tier::Severe);
        let alert = alert.unwrap();
        assert_eq!(alert.metric, "max_gradient_c_per_m");
        assert_eq!(alert.threshold, 10.0);
    }

    #[test]
    fn state_sequence_is_deterministic() {
        let cfg = cfg();
        let run = || {
            let mut state = FsmState::default();
            let mut tiers = Vec::new();
            for seq in 0..40 {
                let charge = if seq % 7 < 4 { 1500.0 } else { 0.0 };
                state = fsm_step(&state, &rec_with_charge(seq, charge), &cfg).0;
                tiers.push(state.tier);
            }
            tiers
        };
        assert_eq!(run(), run());
    }
}
