//! Closed-loop simulation: control at a fixed rate, plant integrated with RK4
//! under a zero-order hold.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{Config, PlantTires};
use super::scenario::ScenarioSpec;
use super::SimError;
use crate::controller::{control_step, Command, ControllerMemory, LateralConfig};
use crate::estimator::{
    maybe_resynthesize, measure_axle_forces, rls_update, Resynthesis, StiffnessEstimate,
};
use crate::lqr::build_bracket_gains;
use crate::raceline::{OffsetPath, OffsetProfile, RacingLine, TrackReference};
use crate::vehicle::{
    plant_derivative, ErrorState, ModelError, PlantCommand, StateRates, VehicleParams,
    VehicleState,
};

/// Maps a normalized command onto plant forces.
pub fn plant_command(command: &Command, params: &VehicleParams) -> PlantCommand {
    PlantCommand {
        delta: command.delta,
        drive_force: command.throttle * params.drive_force_max,
        brake_force: command.brake * params.brake_force_max,
    }
}

fn advance(state: &VehicleState, rates: &StateRates, h: f64) -> VehicleState {
    VehicleState::from_vector(&(state.as_vector() + rates.as_vector() * h))
}

/// One classical fourth-order Runge–Kutta step with the command held.
pub fn integrate_step(
    state: &VehicleState,
    command: &PlantCommand,
    params: &VehicleParams,
    tires: &PlantTires,
    dt: f64,
) -> Result<VehicleState, ModelError> {
    let f = |s: &VehicleState| plant_derivative(s, command, params, &tires.front, &tires.rear);
    let k1 = f(state)?;
    let k2 = f(&advance(state, &k1, 0.5 * dt))?;
    let k3 = f(&advance(state, &k2, 0.5 * dt))?;
    let k4 = f(&advance(state, &k3, dt))?;
    let slope = (k1.as_vector() + 2.0 * k2.as_vector() + 2.0 * k3.as_vector() + k4.as_vector()) / 6.0;
    let next = VehicleState::from_vector(&(state.as_vector() + slope * dt));
    if next.is_finite() {
        Ok(next)
    } else {
        Err(ModelError::NonFinite)
    }
}

/// One control period's record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRow {
    pub t: f64,
    pub state: VehicleState,
    pub command: Command,
    pub error: ErrorState,
    pub cte: f64,
    pub v_target: f64,
    pub bracket_index: usize,
    pub saturated: bool,
    pub active_line: usize,
    pub caf_hat: f64,
    pub car_hat: f64,
    pub alpha_f: f64,
    pub alpha_r: f64,
    pub ff_meas: f64,
    pub fr_meas: f64,
    pub updated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AbortReason {
    Corridor { cte: f64 },
    NonFinite { message: String },
    Control { message: String },
}

impl std::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AbortReason::Corridor { cte } => write!(f, "left the corridor (cte {cte:.2} m)"),
            AbortReason::NonFinite { message } => write!(f, "plant diverged: {message}"),
            AbortReason::Control { message } => write!(f, "controller failed: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub scenario: String,
    pub kind: String,
    pub seed: u64,
    pub config_hash: String,
    pub control_dt: f64,
    pub warmup: f64,
    pub line_switches: u32,
    pub resyntheses: u32,
    pub resynthesis_failures: u32,
    pub abort: Option<AbortReason>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Telemetry {
    pub rows: Vec<TelemetryRow>,
    pub metadata: RunMetadata,
}

impl Telemetry {
    pub fn completed(&self) -> bool {
        self.metadata.abort.is_none()
    }
}

/// Path the vehicle is currently asked to follow.
#[derive(Debug)]
enum ActivePath {
    Line(Arc<RacingLine>),
    Offset(OffsetPath),
}

impl ActivePath {
    fn reference(&self) -> &dyn TrackReference {
        match self {
            ActivePath::Line(l) => l.as_ref(),
            ActivePath::Offset(p) => p,
        }
    }
}

/// Runs `spec` on `line` with the given configuration and seed.
///
/// Returns `Err` only for setup failures (bad scenario, gain synthesis). A run
/// that leaves the corridor or diverges returns the telemetry recorded so far
/// with [`RunMetadata::abort`] set.
pub fn run_scenario(
    name: &str,
    spec: &ScenarioSpec,
    config: &Config,
    line: Arc<RacingLine>,
    seed: u64,
) -> Result<Telemetry, SimError> {
    spec.validate().map_err(SimError::Config)?;
    let params = config.vehicle;
    let sim = config.sim;
    let dt = sim.control_dt;
    let plant_dt = sim.plant_dt();
    let total = line.total_length();
    let duration = spec.duration(total, sim.warmup);
    let steps = (duration / dt).round() as usize;

    let schedule = build_bracket_gains(&params, &config.lateral.brackets)?;
    let mut lateral = LateralConfig {
        d_base: config.lateral.d_base,
        k_vd: config.lateral.k_vd,
        schedule,
        steer_limit: params.steer_limit,
    };
    lateral.validate().map_err(|e| SimError::Config(e.to_string()))?;

    let (mut active, pending) = match *spec {
        ScenarioSpec::LaneChange {
            trigger_s,
            transition_length,
            offset,
            ..
        } => {
            let ramp = OffsetProfile::Ramp {
                start: trigger_s,
                length: transition_length,
                offset,
            };
            let path = OffsetPath::new(line.clone(), ramp)
                .map_err(|e| SimError::Config(format!("lane change: {e}")))?;
            (ActivePath::Line(line.clone()), Some((trigger_s, path)))
        }
        ScenarioSpec::Slalom {
            amplitude, cycles, ..
        } => {
            let path = OffsetPath::new(line.clone(), OffsetProfile::Sinusoid { amplitude, cycles })?;
            (ActivePath::Offset(path), None)
        }
        _ => (ActivePath::Line(line.clone()), None),
    };
    let mut pending = pending;
    let mut active_line = 0;

    let start = active.reference().lookahead(
        line.samples()[0].x,
        line.samples()[0].y,
        1e-9,
        0.0,
    )?;
    let mut state = VehicleState {
        x: start.x_star,
        y: start.y_star,
        xdot: (spec.target_speed(0.0) * sim.start_speed_fraction).max(sim.min_start_speed),
        ydot: 0.0,
        psi: start.psi_star,
        psidot: 0.0,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ay_noise = Normal::new(0.0, config.estimator.sigma_ay)
        .map_err(|e| SimError::Config(format!("estimator.sigma_ay: {e}")))?;
    let yaw_noise = Normal::new(0.0, config.estimator.sigma_psiddot)
        .map_err(|e| SimError::Config(format!("estimator.sigma_psiddot: {e}")))?;
    let mut estimate = StiffnessEstimate::from_params(&params, &config.estimator);

    let mut metadata = RunMetadata {
        scenario: name.to_string(),
        kind: spec.kind().to_string(),
        seed,
        config_hash: config.hash(),
        control_dt: dt,
        warmup: sim.warmup,
        line_switches: 0,
        resyntheses: 0,
        resynthesis_failures: 0,
        abort: None,
    };
    let mut rows = Vec::with_capacity(steps + 1);
    let mut memory = ControllerMemory::default();
    let mut last_s = line.project(state.x, state.y)?.s;
    let mut travelled = 0.0;

    for k in 0..=steps {
        let t = k as f64 * dt;
        let v_target = spec.target_speed(t);

        let base_s = match line.project(state.x, state.y) {
            Ok(p) => p.s,
            Err(e) => {
                metadata.abort = Some(AbortReason::Control { message: e.to_string() });
                break;
            }
        };
        travelled += (base_s - last_s + 0.5 * total).rem_euclid(total) - 0.5 * total;
        last_s = base_s;
        if let Some((trigger, _)) = &pending {
            if travelled >= *trigger {
                let (_, path) = pending.take().expect("checked above");
                active = ActivePath::Offset(path);
                active_line = 1;
                metadata.line_switches += 1;
            }
        }
        let reference = active.reference();

        let cte = match reference.project(state.x, state.y) {
            Ok(p) => p.signed_lateral_offset,
            Err(e) => {
                metadata.abort = Some(AbortReason::Control { message: e.to_string() });
                break;
            }
        };
        let out = match control_step(
            &state,
            reference,
            v_target,
            &lateral,
            &config.longitudinal,
            &memory,
            dt,
        ) {
            Ok(out) => out,
            Err(e) => {
                metadata.abort = Some(AbortReason::Control { message: e.to_string() });
                break;
            }
        };
        let command = out.command;
        let forces = plant_command(&command, &params);

        // IMU stand-in: true accelerations plus noise, drawn every step so the
        // random stream does not depend on the estimator's decisions.
        let rates = match plant_derivative(&state, &forces, &params, &config.tires.front, &config.tires.rear) {
            Ok(r) => r,
            Err(e) => {
                metadata.abort = Some(AbortReason::NonFinite { message: e.to_string() });
                break;
            }
        };
        let a_y = rates.lateral_accel(&state) + ay_noise.sample(&mut rng);
        let psiddot = rates.yaw_accel + yaw_noise.sample(&mut rng);
        let meas = match measure_axle_forces(&state, a_y, psiddot, command.delta, &params, t) {
            Ok(m) => m,
            Err(e) => {
                metadata.abort = Some(AbortReason::NonFinite { message: e.to_string() });
                break;
            }
        };
        let (next_estimate, flags) = rls_update(
            &estimate,
            &meas,
            config.estimator.forgetting,
            config.estimator.excitation_threshold,
        );
        estimate = next_estimate;

        rows.push(TelemetryRow {
            t,
            state,
            command,
            error: out.lateral.error,
            cte,
            v_target,
            bracket_index: out.lateral.bracket_index,
            saturated: out.lateral.saturated,
            active_line,
            caf_hat: estimate.caf_hat,
            car_hat: estimate.car_hat,
            alpha_f: meas.alpha_f,
            alpha_r: meas.alpha_r,
            ff_meas: meas.f_front,
            fr_meas: meas.f_rear,
            updated: flags.any(),
        });

        if cte.abs() > sim.corridor {
            metadata.abort = Some(AbortReason::Corridor { cte });
            break;
        }
        if k == steps {
            break;
        }

        if config.estimator.resynthesize && estimate.sample_count >= config.estimator.warmup {
            match maybe_resynthesize(&estimate, &lateral.schedule, config.estimator.resynthesis_threshold) {
                Resynthesis::Unchanged => {}
                Resynthesis::Rebuilt(s) => {
                    lateral.schedule = s;
                    metadata.resyntheses += 1;
                }
                Resynthesis::Failed(_) => metadata.resynthesis_failures += 1,
            }
        }

        for _ in 0..sim.plant_substeps {
            match integrate_step(&state, &forces, &params, &config.tires, plant_dt) {
                Ok(s) => state = s,
                Err(e) => {
                    metadata.abort = Some(AbortReason::NonFinite { message: e.to_string() });
                    break;
                }
            }
        }
        if metadata.abort.is_some() {
            break;
        }
        memory = ControllerMemory::after(&command);
    }

    Ok(Telemetry { rows, metadata })
}
