//! Lateral (lookahead + scheduled LQR) and longitudinal (P + feedforward,
//! rate-limited pedals, gear lookup) control.
//!
//! Everything here is a pure function of its arguments; the only state a
//! control loop carries between steps is [`ControllerMemory`].

use nalgebra::{RowVector4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lqr::GainSchedule;
use crate::raceline::{RacelineError, TrackReference, TrajectoryTarget};
use crate::vehicle::{compute_error_state, ErrorState, ModelError, VehicleState, VX_MIN};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Raceline(#[from] RacelineError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LateralConfig {
    pub d_base: f64,
    pub k_vd: f64,
    pub schedule: GainSchedule,
    pub steer_limit: f64,
}

impl LateralConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.d_base.is_finite() && self.d_base > 0.0) {
            return Err(ControlError::InvalidConfig(format!("d_base = {} must be positive", self.d_base)));
        }
        if !(self.k_vd.is_finite() && self.k_vd >= 0.0) {
            return Err(ControlError::InvalidConfig(format!("k_vd = {} must be non-negative", self.k_vd)));
        }
        if !(self.steer_limit.is_finite() && self.steer_limit > 0.0) {
            return Err(ControlError::InvalidConfig(format!(
                "steer_limit = {} must be positive",
                self.steer_limit
            )));
        }
        Ok(())
    }

    pub fn lookahead_distance(&self, vx: f64) -> f64 {
        self.d_base + self.k_vd * vx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GearEntry {
    pub v_threshold: f64,
    pub gear: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LongitudinalConfig {
    pub kp: f64,
    pub k_ff: f64,
    pub alpha_brake: f64,
    /// Maximum throttle change per second.
    pub delta_throttle: f64,
    /// Maximum brake change per second.
    pub delta_brake: f64,
    pub gear_table: Vec<GearEntry>,
    /// Downshift hysteresis band, m/s.
    pub hysteresis: f64,
}

impl Default for LongitudinalConfig {
    fn default() -> Self {
        let thresholds = [0.0, 15.0, 30.0, 45.0, 58.0];
        Self {
            kp: 0.5,
            k_ff: 0.0054,
            alpha_brake: 1.0,
            delta_throttle: 1.0,
            delta_brake: 2.0,
            gear_table: thresholds
                .iter()
                .enumerate()
                .map(|(i, &v)| GearEntry {
                    v_threshold: v,
                    gear: i as u32 + 1,
                })
                .collect(),
            hysteresis: 2.0,
        }
    }
}

impl LongitudinalConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |name: &str, v: f64, what: &str| {
            Err(ControlError::InvalidConfig(format!("{name} = {v} must be {what}")))
        };
        for (name, v) in [("kp", self.kp), ("k_ff", self.k_ff), ("hysteresis", self.hysteresis)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(name, v, "non-negative");
            }
        }
        for (name, v) in [
            ("alpha_brake", self.alpha_brake),
            ("delta_throttle", self.delta_throttle),
            ("delta_brake", self.delta_brake),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(name, v, "positive");
            }
        }
        if self.gear_table.is_empty() {
            return Err(ControlError::InvalidConfig("gear_table is empty".into()));
        }
        if self.gear_table.iter().any(|g| !g.v_threshold.is_finite()) {
            return Err(ControlError::InvalidConfig("gear thresholds must be finite".into()));
        }
        if self
            .gear_table
            .windows(2)
            .any(|w| w[1].v_threshold <= w[0].v_threshold)
        {
            return Err(ControlError::InvalidConfig(
                "gear_table thresholds must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Actuator command for one control period.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub delta: f64,
    pub throttle: f64,
    pub brake: f64,
    pub gear: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pedals {
    pub throttle: f64,
    pub brake: f64,
}

/// What the loop remembers between control steps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerMemory {
    pub pedals: Pedals,
    pub gear: Option<u32>,
}

impl ControllerMemory {
    pub fn after(command: &Command) -> Self {
        Self {
            pedals: Pedals {
                throttle: command.throttle,
                brake: command.brake,
            },
            gear: Some(command.gear),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralOutput {
    pub delta: f64,
    /// Steering before the clamp.
    pub raw_delta: f64,
    pub saturated: bool,
    pub error: ErrorState,
    pub target: TrajectoryTarget,
    pub lookahead_distance: f64,
    pub bracket_index: usize,
}

/// Error vector in the frame the error-dynamics model is written in.
///
/// The lateral component of [`compute_error_state`] is the target's offset
/// from the vehicle, while its rate, the heading error and the yaw-rate error
/// are all measured from the path to the vehicle. The model's first state is
/// the vehicle's offset from the path, so the lateral component is negated
/// here; feeding the raw vector to `−K·e` turns the position loop into
/// positive feedback.
pub fn model_frame_error(e: &ErrorState) -> Vector4<f64> {
    Vector4::new(-e.e1, e.e1dot, e.e2, e.e2dot)
}

/// `u = −K·e`.
pub fn state_feedback(gain: &RowVector4<f64>, e: &Vector4<f64>) -> f64 {
    -(gain * e)[0]
}

/// One lateral control step against any tracked reference.
pub fn lateral_step<R: TrackReference + ?Sized>(
    state: &VehicleState,
    reference: &R,
    cfg: &LateralConfig,
) -> Result<LateralOutput, ControlError> {
    if !(state.xdot.is_finite() && state.xdot >= VX_MIN) {
        return Err(ModelError::Standstill { vx: state.xdot }.into());
    }
    if !state.is_finite() {
        return Err(ModelError::NonFinite.into());
    }
    let d = cfg.lookahead_distance(state.xdot);
    let target = reference.lookahead(state.x, state.y, d, state.xdot)?;
    let error = compute_error_state(state, &target);
    let (bracket_index, bracket) = cfg.schedule.select(state.xdot);
    let raw_delta = state_feedback(&bracket.gain, &model_frame_error(&error));
    let delta = raw_delta.clamp(-cfg.steer_limit, cfg.steer_limit);
    Ok(LateralOutput {
        delta,
        raw_delta,
        saturated: raw_delta.abs() > cfg.steer_limit,
        error,
        target,
        lookahead_distance: d,
        bracket_index,
    })
}

/// `prev + clamp(desired − prev, ±max_rate·dt)`.
pub fn rate_limit(prev: f64, desired: f64, max_rate: f64, dt: f64) -> f64 {
    let step = max_rate * dt;
    prev + (desired - prev).clamp(-step, step)
}

/// Unfiltered pedal demand: `kp·(v_target − ẋ) + k_ff·v_target`, split into
/// throttle or scaled brake and clamped to `[0, 1]`.
pub fn pedal_demand(vx: f64, v_target: f64, cfg: &LongitudinalConfig) -> Pedals {
    let command = cfg.kp * (v_target - vx) + cfg.k_ff * v_target;
    if command >= 0.0 {
        Pedals {
            throttle: command.min(1.0),
            brake: 0.0,
        }
    } else {
        Pedals {
            throttle: 0.0,
            brake: (-cfg.alpha_brake * command).min(1.0),
        }
    }
}

/// Rate-limited, mutually exclusive throttle and brake.
///
/// A pedal that is still applied must ramp out before the other one may
/// engage, so exclusivity never costs a rate-limit violation.
pub fn longitudinal_step(
    state: &VehicleState,
    v_target: f64,
    cfg: &LongitudinalConfig,
    prev: Pedals,
    dt: f64,
) -> Pedals {
    let demand = pedal_demand(state.xdot, v_target, cfg);
    let prev = Pedals {
        throttle: prev.throttle.clamp(0.0, 1.0),
        brake: prev.brake.clamp(0.0, 1.0),
    };
    if prev.brake > 0.0 && (demand.throttle > 0.0 || prev.throttle > 0.0) {
        return Pedals {
            throttle: 0.0,
            brake: rate_limit(prev.brake, 0.0, cfg.delta_brake, dt).max(0.0),
        };
    }
    if prev.throttle > 0.0 && demand.brake > 0.0 {
        return Pedals {
            throttle: rate_limit(prev.throttle, 0.0, cfg.delta_throttle, dt).max(0.0),
            brake: 0.0,
        };
    }
    Pedals {
        throttle: rate_limit(prev.throttle, demand.throttle, cfg.delta_throttle, dt).clamp(0.0, 1.0),
        brake: rate_limit(prev.brake, demand.brake, cfg.delta_brake, dt).clamp(0.0, 1.0),
    }
}

/// Gear of the highest entry with `v_threshold ≤ vx`; the first gear below
/// the table.
pub fn select_gear(table: &[GearEntry], vx: f64) -> u32 {
    table
        .iter()
        .rev()
        .find(|g| g.v_threshold <= vx)
        .or(table.first())
        .map_or(1, |g| g.gear)
}

/// [`select_gear`] with a downshift band: upshifts happen at the threshold,
/// downshifts only once `vx` is `hysteresis` below it.
pub fn select_gear_with_hysteresis(
    table: &[GearEntry],
    vx: f64,
    current: Option<u32>,
    hysteresis: f64,
) -> u32 {
    let target = select_gear(table, vx);
    match current {
        Some(cur) if target < cur => select_gear(table, vx + hysteresis).min(cur),
        _ => target,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub command: Command,
    pub lateral: LateralOutput,
}

/// Lateral, longitudinal and gear logic composed into one [`Command`].
pub fn control_step<R: TrackReference + ?Sized>(
    state: &VehicleState,
    reference: &R,
    v_target: f64,
    lat: &LateralConfig,
    lon: &LongitudinalConfig,
    prev: &ControllerMemory,
    dt: f64,
) -> Result<ControlOutput, ControlError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ControlError::InvalidConfig(format!("dt = {dt} must be positive")));
    }
    if !(v_target.is_finite() && v_target >= 0.0) {
        return Err(ControlError::InvalidConfig(format!(
            "v_target = {v_target} must be non-negative"
        )));
    }
    let lateral = lateral_step(state, reference, lat)?;
    let pedals = longitudinal_step(state, v_target, lon, prev.pedals, dt);
    let gear = select_gear_with_hysteresis(&lon.gear_table, state.xdot, prev.gear, lon.hysteresis);
    Ok(ControlOutput {
        command: Command {
            delta: lateral.delta,
            throttle: pedals.throttle,
            brake: pedals.brake,
            gear,
        },
        lateral,
    })
}
