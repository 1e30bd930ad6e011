//! Vehicle parameters, the linear error-frame bicycle model, tire force models
//! and the nonlinear plant used by the simulator.
//!
//! Lateral stiffness follows the two-tires-per-axle convention of the linear
//! model: `Caf`/`Car` are per-tire values and an axle produces `2·Caf·α`.
//! Tire models used by the plant ([`TireModel`]) are axle-level, so a Pacejka
//! axle whose linearization `B·C·D·μ·Fz` equals `2·Caf` matches the linear model
//! near zero slip.

use nalgebra::{Matrix4, SVector, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::wrap_angle;
use crate::raceline::TrajectoryTarget;

/// Lower speed bound for every `1/Vx` term.
pub const VX_MIN: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("longitudinal speed {vx} m/s is below the {VX_MIN} m/s standstill guard")]
    Standstill { vx: f64 },
    #[error("invalid vehicle parameter `{name}` = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("command outside actuator limits: {0}")]
    ActuatorLimit(String),
    #[error("plant derivative is not finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Mass, kg.
    pub m: f64,
    /// Yaw moment of inertia, kg·m².
    pub iz: f64,
    /// CoG to front axle, m.
    pub lf: f64,
    /// CoG to rear axle, m.
    pub lr: f64,
    /// Front cornering stiffness per tire, N/rad.
    pub caf: f64,
    /// Rear cornering stiffness per tire, N/rad.
    pub car: f64,
    /// Steering clamp, rad.
    pub steer_limit: f64,
    /// Quadratic drag coefficient, N·s²/m².
    pub drag_coeff: f64,
    /// Drive force at full throttle, N.
    pub drive_force_max: f64,
    /// Brake force at full brake, N.
    pub brake_force_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            m: 787.0,
            iz: 1000.0,
            lf: 1.7,
            lr: 1.25,
            caf: 1.2e5,
            car: 1.2e5,
            steer_limit: 0.3,
            drag_coeff: 0.9,
            drive_force_max: 10_000.0,
            brake_force_max: 15_000.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("m", self.m),
            ("iz", self.iz),
            ("lf", self.lf),
            ("lr", self.lr),
            ("caf", self.caf),
            ("car", self.car),
            ("steer_limit", self.steer_limit),
            ("drag_coeff", self.drag_coeff),
            ("drive_force_max", self.drive_force_max),
            ("brake_force_max", self.brake_force_max),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParam {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        if self.lf + self.lr > 5.0 {
            return Err(ModelError::InvalidParam {
                name: "lf + lr",
                value: self.lf + self.lr,
                reason: "wheelbase exceeds 5 m",
            });
        }
        for (name, value) in [("caf", self.caf), ("car", self.car)] {
            if !(1e4..=1e6).contains(&value) {
                return Err(ModelError::InvalidParam {
                    name,
                    value,
                    reason: "cornering stiffness outside [1e4, 1e6] N/rad",
                });
            }
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }
}

/// Magic-formula lateral tire model for one axle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacejkaTire {
    /// Stiffness factor.
    pub b: f64,
    /// Shape factor.
    pub c: f64,
    /// Peak value.
    pub d: f64,
    /// Curvature factor.
    pub e: f64,
    /// Tire-road friction coefficient.
    pub mu: f64,
    /// Vertical load, N.
    pub fz: f64,
}

impl Default for PacejkaTire {
    /// Linearizes to `2.4e5` N/rad, i.e. twice the default per-tire `Caf`.
    fn default() -> Self {
        Self {
            b: 10.0,
            c: 1.5,
            d: 1.6,
            e: 0.5,
            mu: 1.0,
            fz: 10_000.0,
        }
    }
}

impl PacejkaTire {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("mu", self.mu),
            ("fz", self.fz),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParam {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        if !(self.e.is_finite() && self.e <= 1.0) {
            return Err(ModelError::InvalidParam {
                name: "e",
                value: self.e,
                reason: "curvature factor must be <= 1",
            });
        }
        Ok(())
    }

    /// Slope of the force curve at zero slip, `B·C·D·μ·Fz`.
    pub fn linearized_stiffness(&self) -> f64 {
        self.b * self.c * self.d * self.mu * self.fz
    }

    pub fn lateral_force(&self, alpha: f64) -> f64 {
        pacejka_lateral_force(self, alpha)
    }
}

/// `F = D·sin(C·atan(Bα − E(Bα − atan(Bα))))·μ·Fz`.
pub fn pacejka_lateral_force(tire: &PacejkaTire, alpha: f64) -> f64 {
    let ba = tire.b * alpha;
    let inner = ba - tire.e * (ba - ba.atan());
    tire.d * (tire.c * inner.atan()).sin() * tire.mu * tire.fz
}

pub fn linear_lateral_force(c_alpha: f64, alpha: f64) -> f64 {
    c_alpha * alpha
}

/// Axle tire model used by the plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum TireModel {
    Pacejka(PacejkaTire),
    /// Linear axle force `stiffness·α`, N/rad.
    Linear { stiffness: f64 },
}

impl TireModel {
    pub fn lateral_force(&self, alpha: f64) -> f64 {
        match self {
            TireModel::Pacejka(t) => pacejka_lateral_force(t, alpha),
            TireModel::Linear { stiffness } => linear_lateral_force(*stiffness, alpha),
        }
    }

    pub fn linearized_stiffness(&self) -> f64 {
        match self {
            TireModel::Pacejka(t) => t.linearized_stiffness(),
            TireModel::Linear { stiffness } => *stiffness,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            TireModel::Pacejka(t) => t.validate(),
            TireModel::Linear { stiffness } if stiffness.is_finite() && *stiffness > 0.0 => Ok(()),
            TireModel::Linear { stiffness } => Err(ModelError::InvalidParam {
                name: "stiffness",
                value: *stiffness,
                reason: "must be finite and strictly positive",
            }),
        }
    }
}

/// Inertial pose with body-frame velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Body longitudinal speed, m/s.
    pub xdot: f64,
    /// Body lateral speed, m/s.
    pub ydot: f64,
    pub psi: f64,
    pub psidot: f64,
}

impl VehicleState {
    pub fn is_finite(&self) -> bool {
        self.as_vector().iter().all(|v| v.is_finite())
    }

    pub fn as_vector(&self) -> SVector<f64, 6> {
        SVector::<f64, 6>::new(self.x, self.y, self.xdot, self.ydot, self.psi, self.psidot)
    }

    /// Builds a state from `[x, y, xdot, ydot, psi, psidot]`, wrapping `psi`.
    pub fn from_vector(v: &SVector<f64, 6>) -> Self {
        Self {
            x: v[0],
            y: v[1],
            xdot: v[2],
            ydot: v[3],
            psi: wrap_angle(v[4]),
            psidot: v[5],
        }
    }
}

/// Time derivative of a [`VehicleState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateRates {
    pub x_rate: f64,
    pub y_rate: f64,
    /// d(xdot)/dt
    pub ax: f64,
    /// d(ydot)/dt
    pub ay: f64,
    pub yaw_rate: f64,
    pub yaw_accel: f64,
}

impl StateRates {
    pub fn as_vector(&self) -> SVector<f64, 6> {
        SVector::<f64, 6>::new(
            self.x_rate,
            self.y_rate,
            self.ax,
            self.ay,
            self.yaw_rate,
            self.yaw_accel,
        )
    }

    /// Body lateral acceleration as an IMU would see it, `ÿ + ẋψ̇`.
    pub fn lateral_accel(&self, state: &VehicleState) -> f64 {
        self.ay + state.xdot * state.psidot
    }
}

/// Tracking error in the path frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorState {
    pub e1: f64,
    pub e1dot: f64,
    pub e2: f64,
    pub e2dot: f64,
}

impl ErrorState {
    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.e1, self.e1dot, self.e2, self.e2dot)
    }
}

fn check_speed(vx: f64) -> Result<(), ModelError> {
    if vx.is_finite() && vx >= VX_MIN {
        Ok(())
    } else {
        Err(ModelError::Standstill { vx })
    }
}

/// Linear error-frame lateral dynamics `ė = A·e + B·δ` at constant speed `vx`.
pub fn error_dynamics_matrices(
    params: &VehicleParams,
    vx: f64,
) -> Result<(Matrix4<f64>, Vector4<f64>), ModelError> {
    check_speed(vx)?;
    let VehicleParams {
        m,
        iz,
        lf,
        lr,
        caf,
        car,
        ..
    } = *params;
    let c_sum = 2.0 * caf + 2.0 * car;
    let c_moment = 2.0 * caf * lf - 2.0 * car * lr;
    let c_inertia = 2.0 * lf * lf * caf + 2.0 * lr * lr * car;

    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, 1.0,                    0.0,             0.0,
        0.0, -c_sum / (m * vx),      c_sum / m,       -c_moment / (m * vx),
        0.0, 0.0,                    0.0,             1.0,
        0.0, -c_moment / (iz * vx),  c_moment / iz,   -c_inertia / (iz * vx),
    );
    Ok((a, input_matrix(params)))
}

/// Raw lateral dynamics in `(y, ẏ, ψ, ψ̇)` at constant speed `vx`.
pub fn lateral_dynamics_matrices(
    params: &VehicleParams,
    vx: f64,
) -> Result<(Matrix4<f64>, Vector4<f64>), ModelError> {
    check_speed(vx)?;
    let VehicleParams {
        m,
        iz,
        lf,
        lr,
        caf,
        car,
        ..
    } = *params;
    let c_sum = 2.0 * caf + 2.0 * car;
    let c_moment = 2.0 * caf * lf - 2.0 * car * lr;
    let c_inertia = 2.0 * lf * lf * caf + 2.0 * lr * lr * car;

    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, 1.0,                    0.0, 0.0,
        0.0, -c_sum / (m * vx),      0.0, -vx - c_moment / (m * vx),
        0.0, 0.0,                    0.0, 1.0,
        0.0, -c_moment / (iz * vx),  0.0, -c_inertia / (iz * vx),
    );
    Ok((a, input_matrix(params)))
}

fn input_matrix(params: &VehicleParams) -> Vector4<f64> {
    Vector4::new(
        0.0,
        2.0 * params.caf / params.m,
        0.0,
        2.0 * params.lf * params.caf / params.iz,
    )
}

/// Tracking error of `state` relative to `target`.
///
/// `e1 = (x*−x)·sin(−ψ*) + (y*−y)·cos(−ψ*)`, `ė1 = ẏ + ẋ·wrap(ψ−ψ*)`,
/// `e2 = wrap(ψ−ψ*)`, `ė2 = ψ̇ − ψ̇*`.
///
/// Note that `e1` is the offset of the target from the vehicle (positive when
/// the vehicle is right of the path) while `ė1` and `e2` are measured from the
/// path to the vehicle. See [`crate::controller::model_frame_error`].
pub fn compute_error_state(state: &VehicleState, target: &TrajectoryTarget) -> ErrorState {
    let (s, c) = (-target.psi_star).sin_cos();
    let e2 = wrap_angle(state.psi - target.psi_star);
    ErrorState {
        e1: (target.x_star - state.x) * s + (target.y_star - state.y) * c,
        e1dot: state.ydot + state.xdot * e2,
        e2,
        e2dot: state.psidot - target.psidot_star,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipAngles {
    pub alpha_f: f64,
    pub alpha_r: f64,
}

/// Front and rear slip angles, `α = δ − ζ`.
pub fn slip_angles(
    state: &VehicleState,
    delta: f64,
    params: &VehicleParams,
) -> Result<SlipAngles, ModelError> {
    check_speed(state.xdot)?;
    let zeta_f = (state.ydot + params.lf * state.psidot).atan2(state.xdot);
    let zeta_r = (state.ydot - params.lr * state.psidot).atan2(state.xdot);
    Ok(SlipAngles {
        alpha_f: delta - zeta_f,
        alpha_r: -zeta_r,
    })
}

/// Actuator forces applied to the plant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantCommand {
    pub delta: f64,
    pub drive_force: f64,
    pub brake_force: f64,
}

/// Axle lateral forces for a state and steering angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxleForces {
    pub front: f64,
    pub rear: f64,
    pub slip: SlipAngles,
}

pub fn axle_forces(
    state: &VehicleState,
    delta: f64,
    params: &VehicleParams,
    front_tire: &TireModel,
    rear_tire: &TireModel,
) -> Result<AxleForces, ModelError> {
    let slip = slip_angles(state, delta, params)?;
    Ok(AxleForces {
        front: front_tire.lateral_force(slip.alpha_f),
        rear: rear_tire.lateral_force(slip.alpha_r),
        slip,
    })
}

/// Nonlinear single-track plant.
pub fn plant_derivative(
    state: &VehicleState,
    command: &PlantCommand,
    params: &VehicleParams,
    front_tire: &TireModel,
    rear_tire: &TireModel,
) -> Result<StateRates, ModelError> {
    const LIMIT_SLACK: f64 = 1e-9;
    if command.delta.abs() > params.steer_limit + LIMIT_SLACK {
        return Err(ModelError::ActuatorLimit(format!(
            "|delta| = {} exceeds steer_limit {}",
            command.delta.abs(),
            params.steer_limit
        )));
    }
    if !(0.0..=params.drive_force_max * (1.0 + LIMIT_SLACK)).contains(&command.drive_force) {
        return Err(ModelError::ActuatorLimit(format!(
            "drive_force {} outside [0, {}]",
            command.drive_force, params.drive_force_max
        )));
    }
    if !(0.0..=params.brake_force_max * (1.0 + LIMIT_SLACK)).contains(&command.brake_force) {
        return Err(ModelError::ActuatorLimit(format!(
            "brake_force {} outside [0, {}]",
            command.brake_force, params.brake_force_max
        )));
    }

    let forces = axle_forces(state, command.delta, params, front_tire, rear_tire)?;
    let front_lateral = forces.front * command.delta.cos();
    let (sin_psi, cos_psi) = state.psi.sin_cos();

    let rates = StateRates {
        x_rate: state.xdot * cos_psi - state.ydot * sin_psi,
        y_rate: state.xdot * sin_psi + state.ydot * cos_psi,
        ax: (command.drive_force
            - command.brake_force
            - params.drag_coeff * state.xdot * state.xdot)
            / params.m,
        ay: (front_lateral + forces.rear) / params.m - state.xdot * state.psidot,
        yaw_rate: state.psidot,
        yaw_accel: (params.lf * front_lateral - params.lr * forces.rear) / params.iz,
    };
    if rates.as_vector().iter().all(|v| v.is_finite()) {
        Ok(rates)
    } else {
        Err(ModelError::NonFinite)
    }
}
