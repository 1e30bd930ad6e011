//! Closed-loop simulator, scenarios, metrics, configuration and outputs.

mod config;
mod metrics;
mod output;
mod run;
mod scenario;

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

pub use config::{
    Config, LateralSettings, PlantTires, SimSettings, TrackConfig, DEFAULT_CONFIG_TOML,
};
pub use metrics::{compute_metrics, compute_metrics_rows, Metrics};
pub use output::{
    emit_outputs, read_summary, render_svg, write_telemetry, RunSummary, METRICS_FILE, PLOTS_FILE,
    TELEMETRY_COLUMNS, TELEMETRY_FILE, TELEMETRY_FORMAT_VERSION,
};
pub use run::{
    integrate_step, plant_command, run_scenario, AbortReason, RunMetadata, Telemetry, TelemetryRow,
};
pub use scenario::{ScenarioSpec, SPEED_RANGE};

use crate::lqr::LqrError;
use crate::raceline::{RacelineError, RacingLine};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),
    #[error("track error: {0}")]
    Raceline(#[from] RacelineError),
    #[error("gain synthesis failed: {0}")]
    Synthesis(#[from] LqrError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("telemetry is empty")]
    EmptyTelemetry,
}

impl SimError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        SimError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

/// Constant-speed runs at each of `speeds`, one thread per speed.
pub fn run_sweep(
    config: &Config,
    line: Arc<RacingLine>,
    speeds: &[f64],
    laps: f64,
    seed: u64,
) -> Vec<(f64, Result<Telemetry, SimError>)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = speeds
            .iter()
            .map(|&speed| {
                let line = line.clone();
                scope.spawn(move || {
                    let spec = ScenarioSpec::ConstantSpeedLap {
                        speed,
                        laps: Some(laps),
                        duration: None,
                    };
                    let name = format!("sweep_{speed}");
                    (speed, run_scenario(&name, &spec, config, line, seed))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}
