//! Closed racing lines: fitting through waypoints, arc-length sampling and the
//! geometric queries the controller needs (projection, lookahead).

mod fit;
mod io;
mod line;
mod path;
pub mod spline;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fit::{fit_closed_raceline, stadium_waypoints, FitOptions};
pub use io::{read_line_csv, read_waypoints_csv, write_line_csv};
pub use line::{curvature_variation, LineSample, Projection, RacingLine};
pub use path::{OffsetPath, OffsetProfile, TrackReference};

pub type Point = nalgebra::Point2<f64>;

/// Largest distance from the line at which a projection is answered.
pub const MAX_QUERY_DISTANCE: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum RacelineError {
    #[error("at least 4 waypoints are required, got {0}")]
    TooFewWaypoints(usize),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("racing line self-intersects near s = {s:.3} m")]
    SelfIntersecting { s: f64 },
    #[error("sample spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("query point is {distance:.1} m from the line (limit {MAX_QUERY_DISTANCE} m)")]
    QueryTooFar { distance: f64 },
    #[error("invalid racing line: {0}")]
    InvalidLine(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
}

impl Waypoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Reference pose and yaw rate handed to the lateral controller.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryTarget {
    pub x_star: f64,
    pub y_star: f64,
    /// Heading in `(-π, π]`.
    pub psi_star: f64,
    pub psidot_star: f64,
}
