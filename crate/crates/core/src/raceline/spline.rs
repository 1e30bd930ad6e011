//! Periodic quintic spline through a closed node sequence.
//!
//! Each segment is a quintic in a local parameter `τ ∈ [0, 1]`; the global
//! parameter is cumulative chord length. Derivatives one through four are
//! continuous at every knot, including the seam.

use nalgebra::{DMatrix, Vector2, LU};

use super::{Point, RacelineError};

/// Five-point Gauss–Legendre nodes and weights on `[0, 1]`.
const GL5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_0, 0.118_463_442_528_094_5),
    (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
    (0.5, 0.284_444_444_444_444_4),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
    (0.953_089_922_969_332_0, 0.118_463_442_528_094_5),
];

const ARC_SUBDIVISIONS: usize = 8;

fn falling(k: usize, j: usize) -> f64 {
    ((k - j + 1)..=k).product::<usize>() as f64
}

/// Factorised interpolation system for a fixed set of chord lengths.
///
/// The coefficient matrix depends only on the knot spacing, so re-solving for
/// moved nodes with unchanged spacing is a pair of back-substitutions.
pub(crate) struct SplineSystem {
    chords: Vec<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl SplineSystem {
    pub(crate) fn new(chords: Vec<f64>) -> Result<Self, RacelineError> {
        let n = chords.len();
        let dim = 5 * n;
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..n {
            let next = (i + 1) % n;
            let row0 = 5 * i;
            // q_i(1) − q_i(0) = P_{i+1} − P_i
            for k in 1..=5 {
                m[(row0, 5 * i + k - 1)] = 1.0;
            }
            // h_i^j · (q_i^{(j)}(1)/h_i^j − q_{i+1}^{(j)}(0)/h_{i+1}^j) = 0
            let ratio = chords[i] / chords[next];
            for j in 1..=4 {
                let row = row0 + j;
                for k in j..=5 {
                    m[(row, 5 * i + k - 1)] = falling(k, j);
                }
                m[(row, 5 * next + j - 1)] -= ratio.powi(j as i32) * falling(j, j);
            }
        }
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(RacelineError::Degenerate(
                "spline interpolation system is singular".into(),
            ));
        }
        Ok(Self { chords, lu })
    }

    pub(crate) fn solve(&self, nodes: &[Point]) -> Result<ClosedSpline, RacelineError> {
        let n = self.chords.len();
        debug_assert_eq!(nodes.len(), n);
        let mut rhs = DMatrix::<f64>::zeros(5 * n, 2);
        for i in 0..n {
            let d = nodes[(i + 1) % n] - nodes[i];
            rhs[(5 * i, 0)] = d.x;
            rhs[(5 * i, 1)] = d.y;
        }
        let sol = self.lu.solve(&rhs).ok_or_else(|| {
            RacelineError::Degenerate("spline interpolation system is singular".into())
        })?;
        let mut coeffs = Vec::with_capacity(n);
        for (i, node) in nodes.iter().enumerate() {
            let mut c = [Vector2::zeros(); 6];
            c[0] = node.coords;
            for k in 1..=5 {
                c[k] = Vector2::new(sol[(5 * i + k - 1, 0)], sol[(5 * i + k - 1, 1)]);
            }
            coeffs.push(c);
        }
        let mut knots = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        knots.push(0.0);
        for h in &self.chords {
            acc += h;
            knots.push(acc);
        }
        if !sol.iter().all(|v| v.is_finite()) {
            return Err(RacelineError::Degenerate("non-finite spline coefficients".into()));
        }
        Ok(ClosedSpline { coeffs, knots })
    }
}

/// Closed piecewise-quintic planar curve.
#[derive(Debug, Clone)]
pub struct ClosedSpline {
    /// Per segment, polynomial coefficients in the local parameter `τ`.
    coeffs: Vec<[Vector2<f64>; 6]>,
    /// Cumulative chord-length knots, `knots[0] = 0`, `knots[n] = period`.
    knots: Vec<f64>,
}

/// Position and the first three derivatives with respect to a segment's local
/// parameter.
#[derive(Debug, Clone, Copy)]
pub struct LocalJet {
    pub pos: Vector2<f64>,
    pub d1: Vector2<f64>,
    pub d2: Vector2<f64>,
    pub d3: Vector2<f64>,
}

impl LocalJet {
    pub fn heading(&self) -> f64 {
        self.d1.y.atan2(self.d1.x)
    }

    pub fn curvature(&self) -> f64 {
        let v = self.d1.norm();
        self.d1.perp(&self.d2) / (v * v * v)
    }

    /// dκ/ds.
    pub fn curvature_rate(&self) -> f64 {
        let v = self.d1.norm();
        let cross12 = self.d1.perp(&self.d2);
        let cross13 = self.d1.perp(&self.d3);
        let dot12 = self.d1.dot(&self.d2);
        let dk_dtau = cross13 / v.powi(3) - 3.0 * cross12 * dot12 / v.powi(5);
        dk_dtau / v
    }
}

impl ClosedSpline {
    /// Fits the interpolating spline through `nodes` with chord-length knots.
    pub fn fit(nodes: &[Point]) -> Result<Self, RacelineError> {
        SplineSystem::new(chord_lengths(nodes))?.solve(nodes)
    }

    pub fn segment_count(&self) -> usize {
        self.coeffs.len()
    }

    pub fn period(&self) -> f64 {
        self.knots[self.coeffs.len()]
    }

    /// Jet of segment `seg` at local parameter `tau`.
    pub fn local_jet(&self, seg: usize, tau: f64) -> LocalJet {
        let c = &self.coeffs[seg];
        let mut pos = c[5];
        let mut d1 = 5.0 * c[5];
        let mut d2 = 20.0 * c[5];
        let mut d3 = 60.0 * c[5];
        for k in (0..5).rev() {
            pos = pos * tau + c[k];
        }
        for k in (1..5).rev() {
            d1 = d1 * tau + k as f64 * c[k];
        }
        for k in (2..5).rev() {
            d2 = d2 * tau + (k * (k - 1)) as f64 * c[k];
        }
        d3 = d3 * tau + 24.0 * c[4];
        d3 = d3 * tau + 6.0 * c[3];
        LocalJet { pos, d1, d2, d3 }
    }

    /// Position at global chord parameter `t`, taken modulo the period.
    pub fn position(&self, t: f64) -> Point {
        let (seg, tau) = self.locate(t);
        Point::from(self.local_jet(seg, tau).pos)
    }

    /// `j`-th derivative (1..=4) with respect to the global parameter, evaluated
    /// at the end of segment `seg` (`from_left`) or the start of segment `seg`.
    pub fn knot_derivative(&self, seg: usize, j: usize, from_left: bool) -> Vector2<f64> {
        let c = &self.coeffs[seg];
        let h = self.knots[seg + 1] - self.knots[seg];
        let raw = if from_left {
            (j..=5).fold(Vector2::zeros(), |acc, k| acc + falling(k, j) * c[k])
        } else {
            falling(j, j) * c[j]
        };
        raw / h.powi(j as i32)
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let period = self.period();
        let t = t.rem_euclid(period);
        let n = self.coeffs.len();
        let seg = match self.knots.binary_search_by(|k| k.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => (i - 1).min(n - 1),
        };
        let h = self.knots[seg + 1] - self.knots[seg];
        (seg, ((t - self.knots[seg]) / h).clamp(0.0, 1.0))
    }

    fn speed(&self, seg: usize, tau: f64) -> f64 {
        self.local_jet(seg, tau).d1.norm()
    }

    /// Arc length of segment `seg` over `τ ∈ [0, tau]`.
    pub fn partial_arc_length(&self, seg: usize, tau: f64) -> f64 {
        let width = tau / ARC_SUBDIVISIONS as f64;
        let mut total = 0.0;
        for sub in 0..ARC_SUBDIVISIONS {
            let a = sub as f64 * width;
            for (node, weight) in GL5 {
                total += weight * width * self.speed(seg, a + node * width);
            }
        }
        total
    }

    pub fn segment_arc_lengths(&self) -> Vec<f64> {
        (0..self.segment_count())
            .map(|seg| self.partial_arc_length(seg, 1.0))
            .collect()
    }

    /// Local parameter in segment `seg` at which the arc length from the
    /// segment start equals `target` (clamped to the segment).
    pub fn invert_arc_length(&self, seg: usize, target: f64, seg_length: f64) -> f64 {
        if target <= 0.0 {
            return 0.0;
        }
        if target >= seg_length {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut tau = target / seg_length;
        for _ in 0..50 {
            let f = self.partial_arc_length(seg, tau) - target;
            if f.abs() < 1e-11 {
                break;
            }
            if f > 0.0 {
                hi = tau;
            } else {
                lo = tau;
            }
            let next = tau - f / self.speed(seg, tau);
            tau = if next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
        }
        tau
    }

    /// `∮ (dκ/ds)² ds` by Gauss–Legendre quadrature on each segment.
    pub fn curvature_variation(&self) -> f64 {
        let mut total = 0.0;
        for seg in 0..self.segment_count() {
            for sub in 0..ARC_SUBDIVISIONS {
                let width = 1.0 / ARC_SUBDIVISIONS as f64;
                let a = sub as f64 * width;
                for (node, weight) in GL5 {
                    let jet = self.local_jet(seg, a + node * width);
                    let rate = jet.curvature_rate();
                    total += weight * width * rate * rate * jet.d1.norm();
                }
            }
        }
        total
    }
}

pub(crate) fn chord_lengths(nodes: &[Point]) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|i| (nodes[(i + 1) % n] - nodes[i]).norm())
        .collect()
}
