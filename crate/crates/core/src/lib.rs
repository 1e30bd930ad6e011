//! Closed-loop racing controls stack.
//!
//! The crate is organised bottom-up:
//!
//! - [`raceline`]: closed racing-line fitting and geometric queries.
//! - [`vehicle`]: parameters, the linear error-frame bicycle model, tire forces
//!   and the nonlinear plant.
//! - [`lqr`]: continuous-time Riccati solver and velocity-bracket gain schedule.
//! - [`controller`]: lateral (lookahead + LQR) and longitudinal (P + feedforward)
//!   control, plus gear selection.
//! - [`estimator`]: online cornering-stiffness estimation.
//! - [`sim`]: fixed-step simulator, scenarios, metrics, configuration and
//!   telemetry output.

pub mod angle;
pub mod controller;
pub mod estimator;
pub mod lqr;
pub mod raceline;
pub mod sim;
pub mod vehicle;

pub use angle::wrap_angle;
