//! Benchmark scenario builders shared by the CLI, the tests, and the sample configs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{
    CameraConfig, CarveConfig, MapConfig, RateConfig, ScenarioConfig, StopEvent, TargetConfig, TrackerConfig,
};
use crate::config::RandomPathConfig;
use crate::world::{random_path, single_turn_path};

/// Corridor half width of the turn course, meters.
pub const COURSE_HALF_WIDTH: f64 = 1.0;

fn base(name: &str, seed: u64, duration: f64, waypoints: Vec<[f64; 2]>, target: TargetConfig) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        duration,
        seed,
        blind: false,
        deterministic: true,
        map: MapConfig { file: None, carve: Some(CarveConfig::default()), inflation: itrack_core::env::DEFAULT_INFLATION },
        target: TargetConfig { waypoints, ..target },
        tracker: TrackerConfig::default(),
        camera: CameraConfig::default(),
        rates: RateConfig::default(),
        filter: Default::default(),
        intention: Default::default(),
        prediction: Default::default(),
        penalty: Default::default(),
        corridor: Default::default(),
        trajopt: Default::default(),
    }
}

fn walker(speed: f64) -> TargetConfig {
    TargetConfig {
        waypoints: vec![],
        random: None,
        speed,
        accel: 3.0,
        turn_radius: 0.8,
        heading_lead: 0.4,
        sigma_lm: 0.02,
        start_delay: 1.0,
        stops: vec![],
    }
}

/// Corridor with one sharp turn into a side branch; the main corridor
/// continues past the junction. `angle` is signed radians, positive left.
pub fn turn(seed: u64, speed: f64, angle: f64) -> ScenarioConfig {
    let leg = 14.0;
    let after = 12.0;
    let pts = single_turn_path(leg, after, angle).iter().map(|p| [p.x, p.y]).collect();
    let duration = 1.0 + (leg + after) / speed + 2.0;
    base("turn", seed, duration, pts, walker(speed))
}

/// Turn suite member: the seed draws the turn angle in [60, 120] degrees and its side.
pub fn turn_suite(seed: u64, speed: f64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0x7u64);
    let deg: f64 = rng.gen_range(60.0..=120.0);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    turn(seed, speed, sign * deg.to_radians())
}

/// Narrow corridor course of `turns` random sharp turns, angles uniform in
/// [60, 120] degrees on a random side.
pub fn turn_course(seed: u64, speed: f64, turns: usize) -> ScenarioConfig {
    let carve = CarveConfig { half_width: COURSE_HALF_WIDTH, ..CarveConfig::default() };
    let rp = RandomPathConfig { turns, ..RandomPathConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0x7u64);
    // 200 placement attempts per turn never fail for a handful of turns.
    let pts = random_path(&rp, &carve, &mut rng).expect("course placement");
    let length: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let mut cfg = base("turn_course", seed, 1.0 + length / speed + 2.0, pts.iter().map(|p| [p.x, p.y]).collect(), walker(speed));
    cfg.map.carve = Some(carve);
    cfg
}

/// Straight corridor; the target stops suddenly mid-way, stands, and walks on.
pub fn sudden_stop(seed: u64, speed: f64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ 0x51u64);
    let at: f64 = rng.gen_range(12.0..=16.0);
    let length = 30.0;
    let target = TargetConfig { stops: vec![StopEvent { distance: at, hold: 4.0 }], ..walker(speed) };
    let duration = 1.0 + length / speed + 4.0 + 2.0;
    base("sudden_stop", seed, duration, vec![[0.0, 0.0], [length, 0.0]], target)
}

/// Target standing still in open space.
pub fn static_target(seed: u64) -> ScenarioConfig {
    let mut cfg = base("static", seed, 5.0, vec![[0.0, 0.0], [10.0, 0.0]], walker(1.0));
    cfg.target.start_delay = 1e3;
    cfg.map.carve = Some(CarveConfig { half_width: 5.0, ..CarveConfig::default() });
    cfg
}
