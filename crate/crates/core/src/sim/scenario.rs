//! Scenario definitions: what speed to hold and which path to follow.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Allowed target-speed range, m/s.
pub const SPEED_RANGE: (f64, f64) = (5.0, 90.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    /// Constant target speed on the racing line. Give either `laps` (run
    /// length is the warmup plus that many laps at `speed`) or `duration`.
    ConstantSpeedLap {
        speed: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        laps: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration: Option<f64>,
    },
    /// Hold `v_start` for `hold` seconds, then ramp linearly to `v_end` over
    /// `ramp_time`.
    SpeedRamp {
        v_start: f64,
        v_end: f64,
        ramp_time: f64,
        #[serde(default)]
        hold: f64,
        duration: f64,
    },
    /// Follow the racing line until the vehicle has travelled `trigger_s`
    /// metres, then switch to a path that blends over `transition_length` into
    /// a parallel line `offset` metres to the left.
    LaneChange {
        speed: f64,
        trigger_s: f64,
        transition_length: f64,
        offset: f64,
        duration: f64,
    },
    /// Weave about the racing line with `cycles` sine periods per lap.
    Slalom {
        speed: f64,
        amplitude: f64,
        cycles: u32,
        duration: f64,
    },
}

fn check_speed(name: &str, v: f64) -> Result<(), String> {
    if (SPEED_RANGE.0..=SPEED_RANGE.1).contains(&v) {
        Ok(())
    } else {
        Err(format!(
            "{name} = {v} outside [{}, {}] m/s",
            SPEED_RANGE.0, SPEED_RANGE.1
        ))
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), String> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(format!("{name} = {v} must be positive"))
    }
}

impl ScenarioSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioSpec::ConstantSpeedLap { .. } => "constant_speed_lap",
            ScenarioSpec::SpeedRamp { .. } => "speed_ramp",
            ScenarioSpec::LaneChange { .. } => "lane_change",
            ScenarioSpec::Slalom { .. } => "slalom",
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            ScenarioSpec::ConstantSpeedLap {
                speed,
                laps,
                duration,
            } => {
                check_speed("speed", speed)?;
                match (laps, duration) {
                    (Some(l), None) => check_positive("laps", l),
                    (None, Some(d)) => check_positive("duration", d),
                    _ => Err("give exactly one of laps or duration".into()),
                }
            }
            ScenarioSpec::SpeedRamp {
                v_start,
                v_end,
                ramp_time,
                hold,
                duration,
            } => {
                check_speed("v_start", v_start)?;
                check_speed("v_end", v_end)?;
                check_positive("ramp_time", ramp_time)?;
                check_positive("duration", duration)?;
                if !(hold.is_finite() && hold >= 0.0) {
                    return Err(format!("hold = {hold} must be non-negative"));
                }
                Ok(())
            }
            ScenarioSpec::LaneChange {
                speed,
                trigger_s,
                transition_length,
                offset,
                duration,
            } => {
                check_speed("speed", speed)?;
                check_positive("transition_length", transition_length)?;
                check_positive("duration", duration)?;
                if !(trigger_s.is_finite() && trigger_s >= 0.0) {
                    return Err(format!("trigger_s = {trigger_s} must be non-negative"));
                }
                if !(offset.is_finite() && offset != 0.0) {
                    return Err(format!("offset = {offset} must be non-zero"));
                }
                Ok(())
            }
            ScenarioSpec::Slalom {
                speed,
                amplitude,
                cycles,
                duration,
            } => {
                check_speed("speed", speed)?;
                check_positive("amplitude", amplitude)?;
                check_positive("duration", duration)?;
                if cycles == 0 {
                    return Err("cycles must be at least 1".into());
                }
                Ok(())
            }
        }
    }

    /// Run length in seconds.
    pub fn duration(&self, line_length: f64, warmup: f64) -> f64 {
        match *self {
            ScenarioSpec::ConstantSpeedLap {
                speed,
                laps,
                duration,
            } => duration.unwrap_or_else(|| warmup + laps.unwrap_or(1.0) * line_length / speed),
            ScenarioSpec::SpeedRamp { duration, .. }
            | ScenarioSpec::LaneChange { duration, .. }
            | ScenarioSpec::Slalom { duration, .. } => duration,
        }
    }

    pub fn target_speed(&self, t: f64) -> f64 {
        match *self {
            ScenarioSpec::ConstantSpeedLap { speed, .. }
            | ScenarioSpec::LaneChange { speed, .. }
            | ScenarioSpec::Slalom { speed, .. } => speed,
            ScenarioSpec::SpeedRamp {
                v_start,
                v_end,
                ramp_time,
                hold,
                ..
            } => {
                let u = ((t - hold) / ramp_time).clamp(0.0, 1.0);
                v_start + (v_end - v_start) * u
            }
        }
    }

    /// Scenarios present in the default configuration.
    pub fn defaults() -> BTreeMap<String, ScenarioSpec> {
        let lap = |speed| ScenarioSpec::ConstantSpeedLap {
            speed,
            laps: Some(1.0),
            duration: None,
        };
        BTreeMap::from([
            ("lap25".to_string(), lap(25.0)),
            ("lap40".to_string(), lap(40.0)),
            ("lap50".to_string(), lap(50.0)),
            ("lap60".to_string(), lap(60.0)),
            (
                "speed_ramp".to_string(),
                ScenarioSpec::SpeedRamp {
                    v_start: 25.0,
                    v_end: 60.5,
                    ramp_time: 120.0,
                    hold: 5.0,
                    duration: 135.0,
                },
            ),
            (
                "lane_change".to_string(),
                ScenarioSpec::LaneChange {
                    speed: 25.0,
                    trigger_s: 140.0,
                    transition_length: 150.0,
                    offset: 3.5,
                    duration: 30.0,
                },
            ),
            (
                "slalom".to_string(),
                ScenarioSpec::Slalom {
                    speed: 30.0,
                    amplitude: 1.0,
                    cycles: 24,
                    duration: 40.0,
                },
            ),
        ])
    }
}
