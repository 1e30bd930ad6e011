use serde::{Deserialize, Serialize};

use super::run::{Telemetry, TelemetryRow};
use super::SimError;

/// Summary statistics over the post-warmup part of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub max_abs_cte: f64,
    pub mean_abs_cte: f64,
    pub max_steer: f64,
    pub speed_tracking_rmse: f64,
    pub saturation_fraction: f64,
}

/// Metrics over rows with `t ≥ warmup`. If the run ended before the warmup
/// did, all rows are used.
pub fn compute_metrics_rows(rows: &[TelemetryRow], warmup: f64) -> Result<Metrics, SimError> {
    if rows.is_empty() {
        return Err(SimError::EmptyTelemetry);
    }
    let start = rows.partition_point(|r| r.t < warmup);
    let window = if start < rows.len() { &rows[start..] } else { rows };
    let n = window.len() as f64;
    let mut m = Metrics {
        max_abs_cte: 0.0,
        mean_abs_cte: 0.0,
        max_steer: 0.0,
        speed_tracking_rmse: 0.0,
        saturation_fraction: 0.0,
    };
    let mut sq_speed = 0.0;
    let mut saturated = 0usize;
    for r in window {
        m.max_abs_cte = m.max_abs_cte.max(r.cte.abs());
        m.mean_abs_cte += r.cte.abs();
        m.max_steer = m.max_steer.max(r.command.delta.abs());
        sq_speed += (r.state.xdot - r.v_target).powi(2);
        saturated += usize::from(r.saturated);
    }
    m.mean_abs_cte /= n;
    m.speed_tracking_rmse = (sq_speed / n).sqrt();
    m.saturation_fraction = saturated as f64 / n;
    Ok(m)
}

pub fn compute_metrics(telemetry: &Telemetry) -> Result<Metrics, SimError> {
    compute_metrics_rows(&telemetry.rows, telemetry.metadata.warmup)
}
