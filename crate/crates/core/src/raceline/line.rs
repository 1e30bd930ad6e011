use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Point, RacelineError, TrajectoryTarget, MAX_QUERY_DISTANCE};
use crate::angle::wrap_angle;

/// One arc-length sample of a racing line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSample {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub kappa: f64,
}

/// Closest-point query result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the closest point, in `[0, total_length)`.
    pub s: f64,
    /// Positive to the left of the tangent direction.
    pub signed_lateral_offset: f64,
}

/// Closed path sampled at uniform arc length.
///
/// The line is always closed: the sample after the last one is the first one,
/// and any arc length is interpreted modulo [`RacingLine::total_length`].
#[derive(Debug, Clone, PartialEq)]
pub struct RacingLine {
    samples: Vec<LineSample>,
    spacing: f64,
    total_length: f64,
}

impl RacingLine {
    /// Validates and wraps a closed sample sequence. Sample `k` must sit at
    /// `s = k·total_length/n`.
    pub fn from_samples(
        mut samples: Vec<LineSample>,
        total_length: f64,
    ) -> Result<Self, RacelineError> {
        let n = samples.len();
        if n < 4 {
            return Err(RacelineError::InvalidLine(format!(
                "need at least 4 samples, got {n}"
            )));
        }
        if !(total_length.is_finite() && total_length > 0.0) {
            return Err(RacelineError::InvalidLine(format!(
                "total length {total_length} is not positive"
            )));
        }
        let spacing = total_length / n as f64;
        if samples[0].s != 0.0 {
            return Err(RacelineError::InvalidLine("first sample must have s = 0".into()));
        }
        for (k, smp) in samples.iter_mut().enumerate() {
            if ![smp.s, smp.x, smp.y, smp.psi, smp.kappa]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(RacelineError::InvalidLine(format!("sample {k} is not finite")));
            }
            let expected = k as f64 * spacing;
            if (smp.s - expected).abs() > 1e-9 * expected.max(spacing) {
                return Err(RacelineError::InvalidLine(format!(
                    "sample {k} at s = {} breaks uniform spacing {spacing}",
                    smp.s
                )));
            }
            smp.psi = wrap_angle(smp.psi);
        }
        Ok(Self {
            samples,
            spacing,
            total_length,
        })
    }

    /// Analytic stadium: two straights of `straight` metres joined by
    /// semicircles of `radius`. Starts at `(0, −radius)` heading `+x` and runs
    /// counter-clockwise. Curvature is discontinuous at the straight/arc joins.
    pub fn stadium(straight: f64, radius: f64, spacing: f64) -> Result<Self, RacelineError> {
        if !(straight >= 0.0 && radius > 0.0) {
            return Err(RacelineError::Degenerate(format!(
                "stadium needs straight >= 0 and radius > 0, got {straight}, {radius}"
            )));
        }
        let total = 2.0 * straight + 2.0 * PI * radius;
        Self::from_pose_fn(total, spacing, |s| stadium_pose(straight, radius, s))
    }

    /// Counter-clockwise circle about the origin starting at `(radius, 0)`.
    pub fn circle(radius: f64, spacing: f64) -> Result<Self, RacelineError> {
        if !(radius > 0.0) {
            return Err(RacelineError::Degenerate(format!("radius {radius}")));
        }
        let total = 2.0 * PI * radius;
        Self::from_pose_fn(total, spacing, |s| {
            let a = s / radius;
            (radius * a.cos(), radius * a.sin(), a + PI / 2.0, 1.0 / radius)
        })
    }

    pub(crate) fn from_pose_fn(
        total_length: f64,
        spacing: f64,
        pose: impl Fn(f64) -> (f64, f64, f64, f64),
    ) -> Result<Self, RacelineError> {
        let n = sample_count(total_length, spacing)?;
        let ds = total_length / n as f64;
        let samples = (0..n)
            .map(|k| {
                let s = k as f64 * ds;
                let (x, y, psi, kappa) = pose(s);
                LineSample {
                    s,
                    x,
                    y,
                    psi: wrap_angle(psi),
                    kappa,
                }
            })
            .collect();
        Self::from_samples(samples, total_length)
    }

    /// Copy of the line shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|s| LineSample {
                x: s.x + dx,
                y: s.y + dy,
                ..*s
            })
            .collect();
        Self {
            samples,
            ..*self
        }
    }

    pub fn samples(&self) -> &[LineSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn is_closed(&self) -> bool {
        true
    }

    fn wrap_s(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.total_length);
        // rem_euclid may round up to the modulus itself
        if w >= self.total_length {
            0.0
        } else {
            w
        }
    }

    fn bracket(&self, s: f64) -> (usize, usize, f64) {
        let s = self.wrap_s(s);
        let n = self.samples.len();
        let i = ((s / self.spacing).floor() as usize).min(n - 1);
        let f = ((s - self.samples[i].s) / self.spacing).clamp(0.0, 1.0);
        (i, (i + 1) % n, f)
    }

    /// Interpolated pose at arc length `s` (taken modulo the total length).
    ///
    /// Position is cubic Hermite between neighbouring samples using their
    /// headings; heading and curvature are interpolated linearly.
    pub fn pose_at(&self, s: f64) -> LineSample {
        let (i, j, f) = self.bracket(s);
        let a = &self.samples[i];
        let b = &self.samples[j];
        let h00 = (2.0 * f - 3.0) * f * f + 1.0;
        let h10 = ((f - 2.0) * f + 1.0) * f;
        let h01 = (3.0 - 2.0 * f) * f * f;
        let h11 = (f - 1.0) * f * f;
        let (sa, ca) = a.psi.sin_cos();
        let (sb, cb) = b.psi.sin_cos();
        let d = self.spacing;
        LineSample {
            s: self.wrap_s(s),
            x: h00 * a.x + h10 * d * ca + h01 * b.x + h11 * d * cb,
            y: h00 * a.y + h10 * d * sa + h01 * b.y + h11 * d * sb,
            psi: wrap_angle(a.psi + f * wrap_angle(b.psi - a.psi)),
            kappa: a.kappa + f * (b.kappa - a.kappa),
        }
    }

    /// Forward-difference `dκ/ds` of the bracketing sample pair.
    pub fn curvature_rate_at(&self, s: f64) -> f64 {
        let (i, j, _) = self.bracket(s);
        (self.samples[j].kappa - self.samples[i].kappa) / self.spacing
    }

    fn nearest_index(&self, x: f64, y: f64) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, smp) in self.samples.iter().enumerate() {
            let d2 = (smp.x - x).powi(2) + (smp.y - y).powi(2);
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        (best.0, best.1.sqrt())
    }

    /// Closest point on the line to `(x, y)`.
    ///
    /// The nearest sample is refined on that sample's osculating circle, which
    /// is exact for straight and circular stretches.
    pub fn project(&self, x: f64, y: f64) -> Result<Projection, RacelineError> {
        let (i, dist) = self.nearest_index(x, y);
        if !dist.is_finite() || dist > MAX_QUERY_DISTANCE {
            return Err(RacelineError::QueryTooFar { distance: dist });
        }
        let smp = &self.samples[i];
        let (sin, cos) = smp.psi.sin_cos();
        let (dx, dy) = (x - smp.x, y - smp.y);
        let along = dx * cos + dy * sin;
        let lateral = -dx * sin + dy * cos;

        let (ds, offset) = if smp.kappa.abs() < 1e-9 {
            (along, lateral)
        } else {
            let radius = 1.0 / smp.kappa;
            // centre at p_i + R·n, with n the left normal
            let (cx, cy) = (smp.x - radius * sin, smp.y + radius * cos);
            let (r0x, r0y) = (smp.x - cx, smp.y - cy);
            let (vx, vy) = (x - cx, y - cy);
            let theta = (r0x * vy - r0y * vx).atan2(r0x * vx + r0y * vy);
            let dist_c = vx.hypot(vy);
            let offset = if smp.kappa > 0.0 {
                radius - dist_c
            } else {
                dist_c + radius
            };
            (theta * radius, offset)
        };
        Ok(Projection {
            s: self.wrap_s(smp.s + ds),
            signed_lateral_offset: offset,
        })
    }

    /// Target `d` metres of arc length ahead of the vehicle's projection, with
    /// `ψ̇* = κ·vx`.
    pub fn lookahead(
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
        let proj = self.project(x, y)?;
        let pose = self.pose_at(proj.s + d);
        Ok(TrajectoryTarget {
            x_star: pose.x,
            y_star: pose.y,
            psi_star: pose.psi,
            psidot_star: pose.kappa * vx,
        })
    }

    pub fn position_at(&self, s: f64) -> Point {
        let p = self.pose_at(s);
        Point::new(p.x, p.y)
    }
}

/// `∮ (dκ/ds)² ds` by forward differences over the samples, seam included.
pub fn curvature_variation(line: &RacingLine) -> f64 {
    let n = line.samples.len();
    let ds = line.spacing;
    (0..n)
        .map(|i| {
            let rate = (line.samples[(i + 1) % n].kappa - line.samples[i].kappa) / ds;
            rate * rate * ds
        })
        .sum()
}

pub(crate) fn sample_count(total_length: f64, spacing: f64) -> Result<usize, RacelineError> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(RacelineError::InvalidSpacing(spacing));
    }
    Ok(((total_length / spacing).round() as usize).max(4))
}

/// Pose `(x, y, ψ, κ)` on the analytic stadium at arc length `s`.
pub(crate) fn stadium_pose(straight: f64, radius: f64, s: f64) -> (f64, f64, f64, f64) {
    let half = 0.5 * straight;
    let arc = PI * radius;
    let total = 2.0 * straight + 2.0 * arc;
    let s = s.rem_euclid(total);
    if s < half {
        (s, -radius, 0.0, 0.0)
    } else if s < half + arc {
        let a = (s - half) / radius;
        (half + radius * a.sin(), -radius * a.cos(), a, 1.0 / radius)
    } else if s < half + arc + straight {
        let u = s - half - arc;
        (half - u, radius, PI, 0.0)
    } else if s < half + 2.0 * arc + straight {
        let a = (s - half - arc - straight) / radius;
        (-half - radius * a.sin(), radius * a.cos(), PI + a, 1.0 / radius)
    } else {
        let u = s - half - 2.0 * arc - straight;
        (-half + u, -radius, 0.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stadium_is_closed_and_continuous() {
        let line = RacingLine::stadium(600.0, 200.0, 0.5).unwrap();
        let n = line.len();
        let total = line.total_length();
        assert!((total - (1200.0 + 400.0 * PI)).abs() < 1e-9);
        for i in 0..n {
            let a = &line.samples()[i];
            let b = &line.samples()[(i + 1) % n];
            let step = (b.x - a.x).hypot(b.y - a.y);
            assert!((step - line.spacing()).abs() < 1e-3);
        }
        let p0 = line.position_at(0.0);
        let pl = line.position_at(total);
        assert!((p0 - pl).norm() < 1e-9);
    }

    #[test]
    fn from_samples_rejects_irregular_spacing() {
        let line = RacingLine::circle(50.0, 1.0).unwrap();
        let mut samples = line.samples().to_vec();
        samples[3].s += 0.01;
        assert!(RacingLine::from_samples(samples, line.total_length()).is_err());
        let mut samples = line.samples().to_vec();
        samples[2].x = f64::NAN;
        assert!(RacingLine::from_samples(samples, line.total_length()).is_err());
    }

    #[test]
    fn project_point_on_line() {
        let line = RacingLine::circle(200.0, 0.5).unwrap();
        let bound = line.spacing().powi(2) / 8.0;
        for s in [0.0, 13.37, 400.1, 1200.0] {
            let p = line.position_at(s);
            let proj = line.project(p.x, p.y).unwrap();
            assert!(proj.signed_lateral_offset.abs() <= bound);
            assert!((proj.s - s).abs() < 1e-6);
        }
    }

    #[test]
    fn project_left_of_straight() {
        let line = RacingLine::stadium(600.0, 200.0, 0.5)
            .unwrap()
            .translated(0.0, 200.0);
        let proj = line.project(10.0, 1.0).unwrap();
        assert!((proj.signed_lateral_offset - 1.0).abs() < 1e-3);
        assert!((proj.s - 10.0).abs() < 1e-9);
        let proj = line.project(10.0, -2.5).unwrap();
        assert!((proj.signed_lateral_offset + 2.5).abs() < 1e-3);
    }

    #[test]
    fn project_inside_circle() {
        let r = 200.0;
        let line = RacingLine::circle(r, 0.5).unwrap();
        for a in [0.1f64, 1.0, 2.5, 4.0] {
            let p = (r - 1.0) * nalgebra::Vector2::new(a.cos(), a.sin());
            let proj = line.project(p.x, p.y).unwrap();
            assert!((proj.signed_lateral_offset - 1.0).abs() < 1e-2);
            assert!((proj.s - a * r).abs() < 1e-6);
        }
    }

    #[test]
    fn project_on_clockwise_line() {
        // reverse a circle so that curvature is negative
        let base = RacingLine::circle(100.0, 0.5).unwrap();
        let line = RacingLine::from_pose_fn(base.total_length(), 0.5, |s| {
            let a = -s / 100.0;
            (100.0 * a.cos(), 100.0 * a.sin(), a - PI / 2.0, -0.01)
        })
        .unwrap();
        // a point outside the circle is left of a clockwise tangent
        let proj = line.project(0.0, -102.0).unwrap();
        assert!((proj.signed_lateral_offset - 2.0).abs() < 1e-9);
        assert!((proj.s - 50.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn project_far_point_is_an_error() {
        let line = RacingLine::circle(100.0, 1.0).unwrap();
        assert!(matches!(
            line.project(5000.0, 0.0),
            Err(RacelineError::QueryTooFar { .. })
        ));
    }

    #[test]
    fn lookahead_on_straight() {
        let line = RacingLine::stadium(600.0, 200.0, 0.5)
            .unwrap()
            .translated(0.0, 200.0);
        let t = line.lookahead(0.0, 0.0, 15.0, 40.0).unwrap();
        assert!((t.x_star - 15.0).abs() < 1e-9);
        assert!(t.y_star.abs() < 1e-9);
        assert_eq!(t.psi_star, 0.0);
        assert_eq!(t.psidot_star, 0.0);
    }

    #[test]
    fn lookahead_yaw_rate_on_circle() {
        let r = 200.0;
        let line = RacingLine::circle(r, 0.5).unwrap();
        let t = line.lookahead(150.0, 120.0, 30.0, 50.0).unwrap();
        assert!((t.psidot_star - 50.0 / r).abs() / (50.0 / r) < 1e-2);
        assert!(line.lookahead(r, 0.0, 0.0, 50.0).is_err());
    }

    #[test]
    fn lookahead_wraps_across_seam() {
        let line = RacingLine::stadium(600.0, 200.0, 0.5).unwrap();
        let total = line.total_length();
        let near_end = line.position_at(total - 3.0);
        let t = line.lookahead(near_end.x, near_end.y, 10.0, 30.0).unwrap();
        let expected = line.position_at(7.0);
        assert!((t.x_star - expected.x).abs() < 1e-6);
        assert!((t.y_star - expected.y).abs() < 1e-6);
    }

    #[test]
    fn circle_has_no_curvature_variation() {
        let line = RacingLine::circle(200.0, 0.5).unwrap();
        assert!(curvature_variation(&line) < 1e-8);
        let stadium = RacingLine::stadium(600.0, 200.0, 0.5).unwrap();
        assert!(curvature_variation(&stadium) > 0.0);
    }
}
