//! Online cornering-stiffness estimation.
//!
//! Axle lateral forces are recovered from measured lateral and yaw
//! acceleration through the rigid-body force balance, then each axle runs an
//! independent scalar recursive least-squares fit of `F = 2·C·α` (two tires
//! per axle, `C` per tire as in [`VehicleParams`]).

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::lqr::{build_bracket_gains, GainSchedule, LqrError, VelocityBracket};
use crate::vehicle::{slip_angles, ModelError, VehicleParams, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Forgetting factor in `(0, 1]`.
    pub forgetting: f64,
    /// Updates are skipped on an axle while `|α|` is below this, rad.
    pub excitation_threshold: f64,
    /// Prior variance of each stiffness, (N/rad)².
    pub initial_variance: f64,
    /// Updates required before estimates are trusted for re-synthesis.
    pub warmup: u64,
    /// Standard deviation of lateral-acceleration noise, m/s².
    pub sigma_ay: f64,
    /// Standard deviation of yaw-acceleration noise, rad/s².
    pub sigma_psiddot: f64,
    /// Rebuild controller gains from the estimates when they drift.
    pub resynthesize: bool,
    /// Relative stiffness change that triggers a rebuild.
    pub resynthesis_threshold: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            forgetting: 0.999,
            excitation_threshold: 0.002,
            initial_variance: 1e12,
            warmup: 100,
            sigma_ay: 0.05,
            sigma_psiddot: 0.01,
            resynthesize: false,
            resynthesis_threshold: 0.1,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(format!("forgetting = {} must lie in (0, 1]", self.forgetting));
        }
        for (name, v) in [
            ("excitation_threshold", self.excitation_threshold),
            ("sigma_ay", self.sigma_ay),
            ("sigma_psiddot", self.sigma_psiddot),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} = {v} must be non-negative"));
            }
        }
        for (name, v) in [
            ("initial_variance", self.initial_variance),
            ("resynthesis_threshold", self.resynthesis_threshold),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} = {v} must be positive"));
            }
        }
        Ok(())
    }
}

/// Recovered axle forces with the slip angles they were produced at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxleForceMeasurement {
    pub f_front: f64,
    pub f_rear: f64,
    pub alpha_f: f64,
    pub alpha_r: f64,
    pub t: f64,
}

/// Solves `[1, 1; lf, −lr]·[F_f·cos δ; F_r] = [m·a_y; Iz·ψ̈]`.
pub fn measure_axle_forces(
    state: &VehicleState,
    a_y: f64,
    psiddot: f64,
    delta: f64,
    params: &VehicleParams,
    t: f64,
) -> Result<AxleForceMeasurement, ModelError> {
    let slip = slip_angles(state, delta, params)?;
    let lateral = params.m * a_y;
    let moment = params.iz * psiddot;
    let l = params.wheelbase();
    let front_projected = (params.lr * lateral + moment) / l;
    let f_rear = (params.lf * lateral - moment) / l;
    let meas = AxleForceMeasurement {
        f_front: front_projected / delta.cos(),
        f_rear,
        alpha_f: slip.alpha_f,
        alpha_r: slip.alpha_r,
        t,
    };
    if [meas.f_front, meas.f_rear, meas.alpha_f, meas.alpha_r]
        .iter()
        .all(|v| v.is_finite())
    {
        Ok(meas)
    } else {
        Err(ModelError::NonFinite)
    }
}

/// Per-tire stiffness estimates and their (diagonal) covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StiffnessEstimate {
    pub caf_hat: f64,
    pub car_hat: f64,
    pub var_front: f64,
    pub var_rear: f64,
    /// Measurements that updated at least one axle.
    pub sample_count: u64,
}

impl StiffnessEstimate {
    pub fn new(caf: f64, car: f64, initial_variance: f64) -> Self {
        Self {
            caf_hat: caf,
            car_hat: car,
            var_front: initial_variance,
            var_rear: initial_variance,
            sample_count: 0,
        }
    }

    pub fn from_params(params: &VehicleParams, cfg: &EstimatorConfig) -> Self {
        Self::new(params.caf, params.car, cfg.initial_variance)
    }

    pub fn covariance(&self) -> Matrix2<f64> {
        Matrix2::new(self.var_front, 0.0, 0.0, self.var_rear)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UpdateFlags {
    pub front: bool,
    pub rear: bool,
}

impl UpdateFlags {
    pub fn any(&self) -> bool {
        self.front || self.rear
    }
}

/// One scalar RLS step on `y = φ·θ`; returns the new `(θ, P)`.
fn scalar_rls(theta: f64, p: f64, phi: f64, y: f64, lambda: f64) -> (f64, f64) {
    let denom = lambda + phi * p * phi;
    let gain = p * phi / denom;
    let theta = theta + gain * (y - phi * theta);
    let p = (p - gain * phi * p) / lambda;
    (theta, p)
}

/// Updates each axle whose slip exceeds `excitation_threshold`. When neither
/// axle qualifies the estimate is returned untouched.
pub fn rls_update(
    est: &StiffnessEstimate,
    meas: &AxleForceMeasurement,
    forgetting: f64,
    excitation_threshold: f64,
) -> (StiffnessEstimate, UpdateFlags) {
    let mut next = *est;
    let flags = UpdateFlags {
        front: meas.alpha_f.abs() >= excitation_threshold,
        rear: meas.alpha_r.abs() >= excitation_threshold,
    };
    if flags.front {
        (next.caf_hat, next.var_front) =
            scalar_rls(est.caf_hat, est.var_front, 2.0 * meas.alpha_f, meas.f_front, forgetting);
    }
    if flags.rear {
        (next.car_hat, next.var_rear) =
            scalar_rls(est.car_hat, est.var_rear, 2.0 * meas.alpha_r, meas.f_rear, forgetting);
    }
    if flags.any() {
        next.sample_count += 1;
    }
    (next, flags)
}

/// Outcome of a re-synthesis check.
#[derive(Debug, Clone, PartialEq)]
pub enum Resynthesis {
    Unchanged,
    Rebuilt(GainSchedule),
    /// Rebuild attempted and failed; keep using the current schedule.
    Failed(LqrError),
}

fn relative_change(estimate: f64, in_use: f64) -> f64 {
    (estimate - in_use).abs() / in_use
}

/// Rebuilds every bracket gain from the estimated stiffnesses once either
/// axle drifts by more than `threshold` from what the schedule was built for.
pub fn maybe_resynthesize(
    est: &StiffnessEstimate,
    schedule: &GainSchedule,
    threshold: f64,
) -> Resynthesis {
    maybe_resynthesize_with(est, schedule, threshold, build_bracket_gains)
}

/// [`maybe_resynthesize`] with a caller-supplied synthesis routine.
pub fn maybe_resynthesize_with<F>(
    est: &StiffnessEstimate,
    schedule: &GainSchedule,
    threshold: f64,
    build: F,
) -> Resynthesis
where
    F: FnOnce(&VehicleParams, &[VelocityBracket]) -> Result<GainSchedule, LqrError>,
{
    let in_use = schedule.params();
    let drifted = relative_change(est.caf_hat, in_use.caf) > threshold
        || relative_change(est.car_hat, in_use.car) > threshold;
    if !drifted {
        return Resynthesis::Unchanged;
    }
    let params = VehicleParams {
        caf: est.caf_hat,
        car: est.car_hat,
        ..*in_use
    };
    match build(&params, &schedule.specs()) {
        Ok(s) => Resynthesis::Rebuilt(s),
        Err(e) => Resynthesis::Failed(e),
    }
}
