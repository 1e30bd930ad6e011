//! Run configuration: vehicle, tires, track, controller, estimator, simulator
//! settings and named scenarios, loaded from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scenario::ScenarioSpec;
use super::SimError;
use crate::controller::LongitudinalConfig;
use crate::estimator::EstimatorConfig;
use crate::lqr::{default_brackets, VelocityBracket};
use crate::raceline::{fit_closed_raceline, read_line_csv, read_waypoints_csv, stadium_waypoints, FitOptions, RacingLine};
use crate::vehicle::{PacejkaTire, TireModel, VehicleParams};

/// The configuration shipped with the crate.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../../../configs/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantTires {
    pub front: TireModel,
    pub rear: TireModel,
}

impl Default for PlantTires {
    fn default() -> Self {
        Self {
            front: TireModel::Pacejka(PacejkaTire::default()),
            rear: TireModel::Pacejka(PacejkaTire::default()),
        }
    }
}

/// Where the racing line comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrackConfig {
    /// Waypoints sampled from two straights joined by semicircles, then fitted.
    Stadium {
        straight: f64,
        radius: f64,
        waypoint_spacing: f64,
    },
    /// Waypoint CSV (`x,y`), fitted. Relative paths resolve against the
    /// config file's directory.
    Waypoints { path: PathBuf },
    /// Pre-fitted line CSV (`s,x,y,psi,kappa`).
    Line { path: PathBuf },
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig::Stadium {
            straight: 600.0,
            radius: 200.0,
            waypoint_spacing: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LateralSettings {
    /// Lookahead at zero speed, m.
    pub d_base: f64,
    /// Lookahead growth with speed, s.
    pub k_vd: f64,
    pub brackets: Vec<VelocityBracket>,
}

impl Default for LateralSettings {
    fn default() -> Self {
        Self {
            d_base: 8.0,
            k_vd: 0.25,
            brackets: default_brackets(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    /// Control period, s.
    pub control_dt: f64,
    /// Plant integration steps per control period.
    pub plant_substeps: u32,
    /// Run is aborted once |cte| exceeds this, m.
    pub corridor: f64,
    /// Initial window excluded from metrics, s.
    pub warmup: f64,
    /// Initial speed as a fraction of the first target speed.
    pub start_speed_fraction: f64,
    /// Lower bound on the initial speed, m/s.
    pub min_start_speed: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            control_dt: 0.01,
            plant_substeps: 10,
            corridor: 20.0,
            warmup: 5.0,
            start_speed_fraction: 0.8,
            min_start_speed: 10.0,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("control_dt", self.control_dt),
            ("corridor", self.corridor),
            ("start_speed_fraction", self.start_speed_fraction),
            ("min_start_speed", self.min_start_speed),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("sim.{name} = {v} must be positive"));
            }
        }
        if !(self.warmup.is_finite() && self.warmup >= 0.0) {
            return Err(format!("sim.warmup = {} must be non-negative", self.warmup));
        }
        if self.plant_substeps == 0 {
            return Err("sim.plant_substeps must be at least 1".into());
        }
        Ok(())
    }

    pub fn plant_dt(&self) -> f64 {
        self.control_dt / self.plant_substeps as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub vehicle: VehicleParams,
    pub tires: PlantTires,
    pub track: TrackConfig,
    pub fit: FitOptions,
    pub lateral: LateralSettings,
    pub longitudinal: LongitudinalConfig,
    pub estimator: EstimatorConfig,
    pub sim: SimSettings,
    pub scenarios: BTreeMap<String, ScenarioSpec>,
    /// Directory relative track paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            vehicle: VehicleParams::default(),
            tires: PlantTires::default(),
            track: TrackConfig::default(),
            fit: FitOptions::default(),
            lateral: LateralSettings::default(),
            longitudinal: LongitudinalConfig::default(),
            estimator: EstimatorConfig::default(),
            sim: SimSettings::default(),
            scenarios: ScenarioSpec::defaults(),
            base_dir: None,
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: Config = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// The embedded default configuration.
    pub fn builtin() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG_TOML).expect("embedded default config is valid")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let cfg_err = |e: String| SimError::Config(e);
        self.vehicle.validate().map_err(|e| cfg_err(format!("vehicle: {e}")))?;
        self.tires.front.validate().map_err(|e| cfg_err(format!("tires.front: {e}")))?;
        self.tires.rear.validate().map_err(|e| cfg_err(format!("tires.rear: {e}")))?;
        self.longitudinal
            .validate()
            .map_err(|e| cfg_err(format!("longitudinal: {e}")))?;
        self.estimator.validate().map_err(|e| cfg_err(format!("estimator: {e}")))?;
        self.sim.validate().map_err(cfg_err)?;
        if !(self.lateral.d_base.is_finite() && self.lateral.d_base > 0.0) {
            return Err(cfg_err(format!("lateral.d_base = {} must be positive", self.lateral.d_base)));
        }
        if !(self.lateral.k_vd.is_finite() && self.lateral.k_vd >= 0.0) {
            return Err(cfg_err(format!("lateral.k_vd = {} must be non-negative", self.lateral.k_vd)));
        }
        crate::lqr::validate_brackets(&self.lateral.brackets)
            .map_err(|e| cfg_err(format!("lateral.brackets: {e}")))?;
        for (name, spec) in &self.scenarios {
            spec.validate().map_err(|e| cfg_err(format!("scenarios.{name}: {e}")))?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Builds the racing line described by `[track]` and `[fit]`.
    pub fn build_line(&self) -> Result<RacingLine, SimError> {
        let line = match &self.track {
            TrackConfig::Stadium {
                straight,
                radius,
                waypoint_spacing,
            } => {
                let waypoints = stadium_waypoints(*straight, *radius, *waypoint_spacing)?;
                fit_closed_raceline(&waypoints, &self.fit)?
            }
            TrackConfig::Waypoints { path } => {
                let waypoints = read_waypoints_csv(&self.resolve(path))?;
                fit_closed_raceline(&waypoints, &self.fit)?
            }
            TrackConfig::Line { path } => read_line_csv(&self.resolve(path))?,
        };
        Ok(line)
    }

    pub fn scenario(&self, name: &str) -> Result<&ScenarioSpec, SimError> {
        self.scenarios.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.scenarios.keys().map(String::as_str).collect();
            SimError::Config(format!(
                "unknown scenario {name:?}; configured: {}",
                known.join(", ")
            ))
        })
    }
}
