use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Projection, RacelineError, RacingLine, TrajectoryTarget};
use crate::angle::wrap_angle;

/// Anything the lateral controller can track and the simulator can measure
/// cross-track error against.
pub trait TrackReference: Debug + Send + Sync {
    fn project(&self, x: f64, y: f64) -> Result<Projection, RacelineError>;

    fn lookahead(&self, x: f64, y: f64, d: f64, vx: f64)
        -> Result<TrajectoryTarget, RacelineError>;

    fn total_length(&self) -> f64;
}

impl TrackReference for RacingLine {
    fn project(&self, x: f64, y: f64) -> Result<Projection, RacelineError> {
        RacingLine::project(self, x, y)
    }

    fn lookahead(
        &self,
        x: f64,
        y: f64,
        d: f64,
        vx: f64,
    ) -> Result<TrajectoryTarget, RacelineError> {
        RacingLine::lookahead(self, x, y, d, vx)
    }

    fn total_length(&self) -> f64 {
        RacingLine::total_length(self)
    }
}

/// Lateral offset applied to a base line as a function of base arc length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OffsetProfile {
    Constant { offset: f64 },
    /// Quintic smoothstep from 0 to `offset` over `[start, start + length]`,
    /// holding `offset` until the seam.
    Ramp { start: f64, length: f64, offset: f64 },
    /// `amplitude·sin(2π·cycles·s/L)`; periodic on the closed base line.
    Sinusoid { amplitude: f64, cycles: u32 },
}

impl OffsetProfile {
    /// Offset and its first two derivatives with respect to base arc length.
    pub fn eval(&self, s: f64, total_length: f64) -> (f64, f64, f64) {
        match *self {
            OffsetProfile::Constant { offset } => (offset, 0.0, 0.0),
            OffsetProfile::Ramp {
                start,
                length,
                offset,
            } => {
                let u = (s - start) / length;
                if u <= 0.0 {
                    (0.0, 0.0, 0.0)
                } else if u >= 1.0 {
                    (offset, 0.0, 0.0)
                } else {
                    let u2 = u * u;
                    let u3 = u2 * u;
                    (
                        offset * u3 * (10.0 - 15.0 * u + 6.0 * u2),
                        offset * 30.0 * u2 * (1.0 - u).powi(2) / length,
                        offset * 60.0 * u * (1.0 - 3.0 * u + 2.0 * u2) / (length * length),
                    )
                }
            }
            OffsetProfile::Sinusoid { amplitude, cycles } => {
                let k = 2.0 * PI * cycles as f64 / total_length;
                let (sin, cos) = (k * s).sin_cos();
                (amplitude * sin, amplitude * k * cos, -amplitude * k * k * sin)
            }
        }
    }
}

/// A base line displaced along its left normal by an [`OffsetProfile`].
///
/// Arc lengths reported by [`OffsetPath::project`] and consumed by lookahead
/// are those of the base line.
#[derive(Debug, Clone)]
pub struct OffsetPath {
    base: Arc<RacingLine>,
    profile: OffsetProfile,
}

impl OffsetPath {
    pub fn new(base: Arc<RacingLine>, profile: OffsetProfile) -> Result<Self, RacelineError> {
        let total = base.total_length();
        match profile {
            OffsetProfile::Ramp { start, length, .. }
                if !(length > 0.0 && start >= 0.0 && start + length <= total) =>
            {
                return Err(RacelineError::InvalidLine(format!(
                    "offset ramp [{start}, {}] does not fit in [0, {total}]",
                    start + length
                )));
            }
            OffsetProfile::Sinusoid { cycles: 0, .. } => {
                return Err(RacelineError::InvalidLine(
                    "sinusoid offset needs at least one cycle".into(),
                ));
            }
            _ => {}
        }
        Ok(Self { base, profile })
    }

    pub fn base(&self) -> &RacingLine {
        &self.base
    }

    pub fn profile(&self) -> &OffsetProfile {
        &self.profile
    }

    fn offset(&self, s: f64) -> (f64, f64, f64) {
        self.profile.eval(s, self.base.total_length())
    }
}

impl TrackReference for OffsetPath {
    fn project(&self, x: f64, y: f64) -> Result<Projection, RacelineError> {
        let proj = self.base.project(x, y)?;
        let (o, o1, _) = self.offset(proj.s);
        let kappa = self.base.pose_at(proj.s).kappa;
        let a = 1.0 - o * kappa;
        let cos_rel = a / a.hypot(o1);
        Ok(Projection {
            s: proj.s,
            signed_lateral_offset: (proj.signed_lateral_offset - o) * cos_rel,
        })
    }

    fn lookahead(
        &self,
        x: f64,
        y: f64,
        d: f64,
        vx: f64,
    ) -> Result<TrajectoryTarget, RacelineError> {
        if !(d.is_finite() && d > 0.0) {
            return Err(RacelineError::InvalidLine(format!(
                "lookahead distance must be positive, got {d}"
            )));
        }
        let proj = self.base.project(x, y)?;
        let s = proj.s + d;
        let pose = self.base.pose_at(s);
        let kappa_rate = self.base.curvature_rate_at(s);
        let (o, o1, o2) = self.offset(pose.s);
        let (sin, cos) = pose.psi.sin_cos();

        // q = p + o·n, derivatives in the base frame (t, n)
        let a = 1.0 - o * pose.kappa;
        let b = o1;
        let c = -2.0 * o1 * pose.kappa - o * kappa_rate;
        let dd = pose.kappa * a + o2;
        let kappa = (a * dd - b * c) / (a * a + b * b).powf(1.5);

        Ok(TrajectoryTarget {
            x_star: pose.x - o * sin,
            y_star: pose.y + o * cos,
            psi_star: wrap_angle(pose.psi + b.atan2(a)),
            psidot_star: kappa * vx,
        })
    }

    fn total_length(&self) -> f64 {
        self.base.total_length()
    }
}
