use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::line::{curvature_variation, sample_count, stadium_pose, LineSample, RacingLine};
use super::spline::{chord_lengths, ClosedSpline, SplineSystem};
use super::{Point, RacelineError, Waypoint};
use crate::angle::wrap_angle;

/// Minimum distance between consecutive waypoints, m.
pub const MIN_WAYPOINT_GAP: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Target arc-length spacing of the output samples, m. The actual spacing
    /// is `total_length / round(total_length / sample_spacing)`.
    pub sample_spacing: f64,
    /// Curvature-variation smoothing passes applied after interpolation.
    pub smoothing_passes: usize,
    /// How far smoothing may move the curve away from any waypoint, m.
    pub max_deviation: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            sample_spacing: 0.5,
            smoothing_passes: 0,
            max_deviation: 0.5,
        }
    }
}

/// Fits a closed racing line through `waypoints`.
///
/// The curve is a periodic quintic spline with chord-length knots, so it is C⁴
/// in its parameter everywhere including the seam. Waypoint order defines the
/// travel direction. With `smoothing_passes > 0` the interpolation nodes are
/// moved by descent steps on `∮ (dκ/ds)² ds`, each node staying within
/// `max_deviation` of its waypoint; a step is only kept if it lowers the
/// sampled curvature variation.
pub fn fit_closed_raceline(
    waypoints: &[Waypoint],
    options: &FitOptions,
) -> Result<RacingLine, RacelineError> {
    validate_waypoints(waypoints)?;
    if !(options.sample_spacing.is_finite() && options.sample_spacing > 0.0) {
        return Err(RacelineError::InvalidSpacing(options.sample_spacing));
    }
    if options.smoothing_passes > 0
        && !(options.max_deviation.is_finite() && options.max_deviation >= 0.0)
    {
        return Err(RacelineError::Degenerate(format!(
            "max_deviation must be non-negative, got {}",
            options.max_deviation
        )));
    }

    let anchors: Vec<Point> = waypoints.iter().map(Waypoint::point).collect();
    let mut nodes = anchors.clone();
    let mut line = sample_spline(&ClosedSpline::fit(&nodes)?, options.sample_spacing)?;
    let mut cv = curvature_variation(&line);

    for _ in 0..options.smoothing_passes {
        match smoothing_step(&nodes, &anchors, options, cv)? {
            Some((next_nodes, next_line, next_cv)) => {
                nodes = next_nodes;
                line = next_line;
                cv = next_cv;
            }
            None => break,
        }
    }

    check_self_intersection(&line)?;
    Ok(line)
}

/// Runs one smoothing pass on an already fitted line. Returns the input line
/// unchanged when no descent step lowers the curvature variation.
pub(crate) fn smoothing_step(
    nodes: &[Point],
    anchors: &[Point],
    options: &FitOptions,
    current_cv: f64,
) -> Result<Option<(Vec<Point>, RacingLine, f64)>, RacelineError> {
    if options.max_deviation <= 0.0 {
        return Ok(None);
    }
    let system = SplineSystem::new(chord_lengths(nodes))?;
    let objective = |pts: &[Point]| -> Result<f64, RacelineError> {
        Ok(system.solve(pts)?.curvature_variation())
    };

    const EPS: f64 = 1e-3;
    let mut grad = vec![nalgebra::Vector2::<f64>::zeros(); nodes.len()];
    let mut probe = nodes.to_vec();
    for (i, g) in grad.iter_mut().enumerate() {
        for axis in 0..2 {
            let orig = probe[i][axis];
            probe[i][axis] = orig + EPS;
            let up = objective(&probe)?;
            probe[i][axis] = orig - EPS;
            let down = objective(&probe)?;
            probe[i][axis] = orig;
            g[axis] = (up - down) / (2.0 * EPS);
        }
    }
    let largest = grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
    if !(largest.is_finite() && largest > 0.0) {
        return Ok(None);
    }

    let mut step = options.max_deviation / largest;
    for _ in 0..30 {
        let trial: Vec<Point> = nodes
            .iter()
            .zip(&grad)
            .zip(anchors)
            .map(|((p, g), a)| clamp_to_ball(p - step * g, a, options.max_deviation))
            .collect();
        step *= 0.5;
        if validate_points(&trial).is_err() {
            continue;
        }
        let Ok(spline) = ClosedSpline::fit(&trial) else {
            continue;
        };
        let line = sample_spline(&spline, options.sample_spacing)?;
        let cv = curvature_variation(&line);
        if cv < current_cv {
            return Ok(Some((trial, line, cv)));
        }
    }
    Ok(None)
}

fn clamp_to_ball(p: Point, center: &Point, radius: f64) -> Point {
    let d = p - center;
    let len = d.norm();
    if len > radius {
        center + d * (radius / len)
    } else {
        p
    }
}

/// Samples `spline` at uniform arc length.
pub(crate) fn sample_spline(
    spline: &ClosedSpline,
    spacing: f64,
) -> Result<RacingLine, RacelineError> {
    let seg_lengths = spline.segment_arc_lengths();
    let total: f64 = seg_lengths.iter().sum();
    let n = sample_count(total, spacing)?;
    let ds = total / n as f64;

    let mut samples = Vec::with_capacity(n);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..n {
        let s = k as f64 * ds;
        while seg + 1 < seg_lengths.len() && s >= seg_start + seg_lengths[seg] {
            seg_start += seg_lengths[seg];
            seg += 1;
        }
        let tau = spline.invert_arc_length(seg, s - seg_start, seg_lengths[seg]);
        let jet = spline.local_jet(seg, tau);
        samples.push(LineSample {
            s,
            x: jet.pos.x,
            y: jet.pos.y,
            psi: wrap_angle(jet.heading()),
            kappa: jet.curvature(),
        });
    }
    RacingLine::from_samples(samples, total)
}

fn validate_waypoints(waypoints: &[Waypoint]) -> Result<(), RacelineError> {
    let points: Vec<Point> = waypoints.iter().map(Waypoint::point).collect();
    validate_points(&points)?;
    if let Some(s) = polygon_self_intersection(&points) {
        return Err(RacelineError::SelfIntersecting { s });
    }
    Ok(())
}

fn validate_points(points: &[Point]) -> Result<(), RacelineError> {
    let n = points.len();
    if n < 4 {
        return Err(RacelineError::TooFewWaypoints(n));
    }
    if let Some(i) = points.iter().position(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(RacelineError::Degenerate(format!("waypoint {i} is not finite")));
    }
    for i in 0..n {
        let gap = (points[(i + 1) % n] - points[i]).norm();
        if gap < MIN_WAYPOINT_GAP {
            return Err(RacelineError::Degenerate(format!(
                "waypoints {i} and {} are {gap:.3} m apart (minimum {MIN_WAYPOINT_GAP} m)",
                (i + 1) % n
            )));
        }
    }
    let far = points
        .iter()
        .max_by(|a, b| {
            (*a - points[0])
                .norm()
                .partial_cmp(&(*b - points[0]).norm())
                .unwrap()
        })
        .unwrap();
    let axis = (far - points[0]).normalize();
    let spread = points
        .iter()
        .map(|p| (p - points[0]).perp(&axis).abs())
        .fold(0.0, f64::max);
    if spread < 1e-6 * (far - points[0]).norm() {
        return Err(RacelineError::Degenerate("all waypoints are collinear".into()));
    }
    Ok(())
}

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    (b - a).perp(&(c - a))
}

fn segments_cross(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Cumulative chord length at the first edge of a crossing pair, if any.
fn polygon_self_intersection(points: &[Point]) -> Option<f64> {
    let n = points.len();
    let chords = chord_lengths(points);
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(&points[i], &points[i + 1], &points[j], &points[(j + 1) % n]) {
                return Some(chords[..i].iter().sum());
            }
        }
    }
    None
}

fn check_self_intersection(line: &RacingLine) -> Result<(), RacelineError> {
    let samples = line.samples();
    let n = samples.len();
    let pts: Vec<Point> = samples.iter().map(|s| Point::new(s.x, s.y)).collect();
    let cell = 4.0 * line.spacing();
    let key = |v: f64| (v / cell).floor() as i64;

    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for cx in key(a.x.min(b.x))..=key(a.x.max(b.x)) {
            for cy in key(a.y.min(b.y))..=key(a.y.max(b.y)) {
                grid.entry((cx, cy)).or_default().push(i);
            }
        }
    }
    let mut cells: Vec<_> = grid.into_iter().collect();
    cells.sort_unstable_by_key(|(k, _)| *k);
    for (_, segs) in cells {
        for (ai, &i) in segs.iter().enumerate() {
            for &j in &segs[ai + 1..] {
                let gap = (j + n - i) % n;
                if gap <= 1 || gap >= n - 1 {
                    continue;
                }
                if segments_cross(&pts[i], &pts[(i + 1) % n], &pts[j], &pts[(j + 1) % n]) {
                    return Err(RacelineError::SelfIntersecting {
                        s: samples[i.min(j)].s,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Waypoints spaced roughly `waypoint_spacing` apart along an analytic
/// stadium (see [`RacingLine::stadium`]).
pub fn stadium_waypoints(
    straight: f64,
    radius: f64,
    waypoint_spacing: f64,
) -> Result<Vec<Waypoint>, RacelineError> {
    if !(straight >= 0.0 && radius > 0.0) {
        return Err(RacelineError::Degenerate(format!(
            "stadium needs straight >= 0 and radius > 0, got {straight}, {radius}"
        )));
    }
    let total = 2.0 * straight + 2.0 * std::f64::consts::PI * radius;
    let n = sample_count(total, waypoint_spacing)?;
    Ok((0..n)
        .map(|k| {
            let (x, y, _, _) = stadium_pose(straight, radius, k as f64 * total / n as f64);
            Waypoint::new(x, y)
        })
        .collect())
}
