//! Scenario configuration, read from strict TOML (unknown keys are errors).

use std::path::{Path, PathBuf};

use itrack_core::corridor::CorridorParams;
use itrack_core::intention::IntentionParams;
use itrack_core::prediction::{IntentionModelParams, PenaltyMatrix};
use itrack_core::target_state::FilterParams;
use itrack_core::trajopt::TrajOptParams;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    /// Simulated time, seconds.
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    /// Run the intention-blind ablation instead of the full planner.
    #[serde(default)]
    pub blind: bool,
    /// Disable wall-clock budgets so identical seeds give identical traces.
    #[serde(default = "yes")]
    pub deterministic: bool,
    pub map: MapConfig,
    pub target: TargetConfig,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub camera: CameraConfig,
    #[serde(default)]
    pub rates: RateConfig,
    #[serde(default)]
    pub filter: FilterParams,
    #[serde(default)]
    pub intention: IntentionParams,
    #[serde(default)]
    pub prediction: IntentionModelParams,
    #[serde(default)]
    pub penalty: PenaltyMatrix,
    #[serde(default)]
    pub corridor: CorridorParams,
    #[serde(default)]
    pub trajopt: TrajOptParams,
}

fn yes() -> bool {
    true
}

/// Where the occupancy grid comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    /// Map file, relative to the config file.
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// Generate free corridors around the target path instead of loading a file.
    #[serde(default)]
    pub carve: Option<CarveConfig>,
    #[serde(default = "default_inflation")]
    pub inflation: f64,
}

fn default_inflation() -> f64 {
    itrack_core::env::DEFAULT_INFLATION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarveConfig {
    /// Half-width of the free corridor around each path segment, meters.
    pub half_width: f64,
    /// Straight continuation carved past every turn, meters.
    pub stub: f64,
    /// Occupied border around the carved area, meters.
    pub margin: f64,
    pub resolution: f64,
    /// Extra clearing behind the path start so the tracker has room, meters.
    pub tail: f64,
}

impl Default for CarveConfig {
    fn default() -> Self {
        Self { half_width: 1.5, stub: 6.0, margin: 1.0, resolution: 0.1, tail: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// Explicit path vertices.
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
    /// Random path with sharp turns, used when `waypoints` is empty.
    #[serde(default)]
    pub random: Option<RandomPathConfig>,
    /// Cruise speed, m/s.
    pub speed: f64,
    /// Acceleration and deceleration limit, m/s^2.
    #[serde(default = "default_accel")]
    pub accel: f64,
    /// Fillet radius at path corners, meters.
    #[serde(default = "default_turn_radius")]
    pub turn_radius: f64,
    /// How far ahead (seconds of travel) the body heading looks along the path.
    #[serde(default = "default_heading_lead")]
    pub heading_lead: f64,
    /// Landmark noise standard deviation, meters.
    #[serde(default = "default_sigma_lm")]
    pub sigma_lm: f64,
    /// Standing time before the target starts walking, seconds.
    #[serde(default = "default_start_delay")]
    pub start_delay: f64,
    #[serde(default)]
    pub stops: Vec<StopEvent>,
}

fn default_accel() -> f64 {
    3.0
}
fn default_turn_radius() -> f64 {
    0.8
}
fn default_heading_lead() -> f64 {
    0.4
}
fn default_sigma_lm() -> f64 {
    0.02
}
fn default_start_delay() -> f64 {
    1.0
}

/// Stop at arc length `distance` along the path and stand for `hold` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopEvent {
    pub distance: f64,
    pub hold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomPathConfig {
    pub turns: usize,
    /// Segment length range, meters.
    pub segment: [f64; 2],
    /// Turn angle range, degrees.
    pub angle_deg: [f64; 2],
}

impl Default for RandomPathConfig {
    fn default() -> Self {
        Self { turns: 50, segment: [7.0, 10.0], angle_deg: [60.0, 120.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    /// Start position; defaults to `d0` behind the target along its first segment.
    pub start: Option<[f64; 2]>,
    /// Start yaw, radians; defaults to facing the target.
    pub yaw: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraConfig {
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    /// Sensing range cap, meters.
    pub range: f64,
    /// Yaw rate limit, rad/s.
    pub yaw_rate: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { fov_h_deg: 90.0, fov_v_deg: 75.0, range: 8.0, yaw_rate: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateConfig {
    pub perception_hz: f64,
    pub replan_hz: f64,
    pub control_hz: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self { perception_hz: 30.0, replan_hz: 10.0, control_hz: 100.0 }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> SimResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; a relative map path is resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> SimResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(f) = &cfg.map.file {
            if f.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                cfg.map.file = Some(base.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> SimResult<()> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be > 0");
        }
        let r = &self.rates;
        if !(r.perception_hz > 0.0 && r.replan_hz > 0.0 && r.control_hz > 0.0) {
            return bad("rates must be > 0");
        }
        if r.perception_hz > r.control_hz || r.replan_hz > r.control_hz {
            return bad("perception and replan rates cannot exceed the control rate");
        }
        let c = &self.camera;
        if !(c.fov_h_deg > 0.0 && c.fov_h_deg < 180.0 && c.fov_v_deg > 0.0 && c.fov_v_deg < 180.0) {
            return bad("camera FOV must lie in (0, 180) degrees");
        }
        if !(c.range > 0.0 && c.yaw_rate > 0.0) {
            return bad("camera range and yaw rate must be > 0");
        }
        match (&self.map.file, &self.map.carve) {
            (Some(_), Some(_)) => return bad("map: give either `file` or `carve`, not both"),
            (None, None) => return bad("map: one of `file` or `carve` is required"),
            _ => {}
        }
        if !(self.map.inflation >= 0.0) {
            return bad("map inflation must be >= 0");
        }
        let t = &self.target;
        if t.waypoints.len() < 2 && t.random.is_none() {
            return bad("target needs at least two waypoints or a random path");
        }
        if !(t.speed > 0.0 && t.accel > 0.0 && t.turn_radius >= 0.0 && t.sigma_lm >= 0.0 && t.start_delay >= 0.0) {
            return bad("target speed and accel must be > 0; radius, noise, and delay >= 0");
        }
        if t.stops.iter().any(|s| !(s.distance >= 0.0 && s.hold >= 0.0)) {
            return bad("stop events need distance >= 0 and hold >= 0");
        }
        self.prediction.validate().map_err(|e| SimError::Config(e.to_string()))?;
        if self.trajopt.k_pieces == 0 || self.trajopt.kappa < 2 {
            return bad("trajopt needs k_pieces >= 1 and kappa >= 2");
        }
        Ok(())
    }
}
