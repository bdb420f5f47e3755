//! The closed loop: scripted target, perception, replanning, and a tracker
//! that follows its current trajectory exactly.

use itrack_core::env::OccupancyGrid;
use itrack_core::geom::{angle_between, heading, unit_from_heading, wrap_angle};
use itrack_core::trajopt::{EndState, IterRecord, PiecewiseTrajectory};
use itrack_core::Vec2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{CameraConfig, ScenarioConfig};
use crate::error::{SimError, SimResult};
use crate::planner::{Planner, PlannerConfig, StageTimes};
use crate::script::{noisy_landmarks, Path, ScriptedTarget};
use crate::trace::{ReplanMark, Summary, TraceRow};
use crate::world::{carve_map, random_path};

/// Seconds after a maneuver during which ticks still count as maneuvering.
pub const SETTLE_TIME: f64 = 1.0;
/// Seconds after the target starts walking before ticks count as steady.
pub const WARMUP_TIME: f64 = 2.0;

/// A config with its world resolved: map loaded or carved, target path fixed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub map: OccupancyGrid,
    pub path: Path,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> SimResult<Self> {
        config.validate()?;
        let vertices: Vec<Vec2> = if config.target.waypoints.len() >= 2 {
            config.target.waypoints.iter().map(|p| Vec2::new(p[0], p[1])).collect()
        } else {
            let rp = config.target.random.unwrap_or_default();
            let carve = config.map.carve.unwrap_or_default();
            // Path shape depends on the seed only, never on the ablation flag.
            random_path(&rp, &carve, &mut ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_9a7))?
        };
        let map = match (&config.map.file, &config.map.carve) {
            (Some(f), _) => OccupancyGrid::load(f, config.map.inflation)?,
            (None, Some(c)) => carve_map(&vertices, c, config.map.inflation)?,
            (None, None) => unreachable!("validated"),
        };
        let path = Path::new(&vertices, config.target.turn_radius)?;
        Ok(Self { config, map, path })
    }

    /// Same world, other planner mode.
    pub fn with_blind(&self, blind: bool) -> Self {
        let mut s = self.clone();
        s.config.blind = blind;
        s
    }
}

/// Occluded iff the target is outside the horizontal FOV, hidden by an
/// obstacle, or beyond the sensing range.
pub fn occluded(map: &OccupancyGrid, tracker: Vec2, yaw: f64, target: Vec2, cam: &CameraConfig) -> bool {
    let d = target - tracker;
    let r = d.norm();
    if r > cam.range {
        return true;
    }
    if r > 1e-12 && angle_between(unit_from_heading(yaw), d) > cam.fov_h_deg.to_radians() / 2.0 {
        return true;
    }
    !map.line_of_sight(tracker, target).unwrap_or(false)
}

/// One replan's optimizer iterations, tagged with the replan time.
#[derive(Debug, Clone)]
pub struct OptLog {
    pub t: f64,
    pub records: Vec<IterRecord>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<TraceRow>,
    pub summary: Summary,
    /// Per-replan stage times, seconds.
    pub plan_times: Vec<StageTimes>,
    pub opt_logs: Vec<OptLog>,
    /// Time the first turn's fillet ends, if the path has one.
    pub turn_end_times: Vec<f64>,
}

/// Integer scheduling: whether an event at `rate` falls on base tick `n`.
fn due(n: u64, rate: f64, base: f64) -> bool {
    n == 0 || ((n as f64 * rate / base) + 1e-9).floor() > (((n - 1) as f64 * rate / base) + 1e-9).floor()
}

fn tracker_state(traj: &Option<(PiecewiseTrajectory, f64)>, hold: Vec2, t: f64) -> EndState {
    match traj {
        None => EndState::at_rest(hold),
        Some((tr, t0)) => {
            let tau = t - t0;
            if tau >= tr.total_duration() {
                EndState::at_rest(tr.eval_clamped(tau, 0))
            } else {
                EndState { pos: tr.eval_clamped(tau, 0), vel: tr.eval_clamped(tau, 1), acc: tr.eval_clamped(tau, 2) }
            }
        }
    }
}

pub fn run_scenario(sc: &Scenario) -> SimResult<RunOutput> {
    run_scenario_with(sc, false)
}

/// Runs the loop; with `keep_opt_logs` every replan's optimizer trace is kept.
pub fn run_scenario_with(sc: &Scenario, keep_opt_logs: bool) -> SimResult<RunOutput> {
    let cfg = &sc.config;
    let map = &sc.map;
    let rates = cfg.rates;
    let dt = 1.0 / rates.control_hz;
    let n_ticks = (cfg.duration * rates.control_hz).round() as u64;

    let mut target = ScriptedTarget::new(sc.path.clone(), &cfg.target);
    let mut noise = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut planner = Planner::new(PlannerConfig::from_scenario(cfg));

    let h0 = heading(sc.path.vertices()[1] - sc.path.vertices()[0]);
    let start = match cfg.tracker.start {
        Some(p) => Vec2::new(p[0], p[1]),
        None => sc.path.vertices()[0] - unit_from_heading(h0) * cfg.trajopt.d0,
    };
    if !map.is_free(start) {
        return Err(SimError::Collision(format!("tracker start ({:.2}, {:.2}) is not free", start.x, start.y)));
    }
    let mut yaw = cfg.tracker.yaw.unwrap_or(heading(sc.path.vertices()[0] - start));
    let mut traj: Option<(PiecewiseTrajectory, f64)> = None;
    let mut look_at: Option<Vec2> = None;
    let mut pred_end = sc.path.vertices()[0];

    let band = (cfg.trajopt.d0 - cfg.trajopt.d_tau, cfg.trajopt.d0 + cfg.trajopt.d_tau);
    let walk_start = cfg.target.start_delay;
    let mut last_maneuver = f64::NEG_INFINITY;
    let mut rows = Vec::with_capacity(n_ticks as usize + 1);
    let mut plan_times = Vec::new();
    let mut opt_logs = Vec::new();
    let mut truth = target.truth();

    for n in 0..=n_ticks {
        let t = n as f64 * dt;
        if n > 0 {
            truth = target.step(dt);
        }
        if !map.is_free(truth.position) {
            return Err(SimError::Collision(format!("target in occupied space at t = {t:.2}")));
        }
        if due(n, rates.perception_hz, rates.control_hz) {
            let lm = noisy_landmarks(&truth, cfg.target.sigma_lm, &mut noise);
            // A bad observation is skipped; the filter keeps its last state.
            let _ = planner.perceive(map, &lm, t);
        }
        let mut mark = ReplanMark::None;
        if due(n, rates.replan_hz, rates.control_hz) && planner.estimate().is_some() {
            let start_state = tracker_state(&traj, start, t);
            match planner.plan(map, t, start_state) {
                Ok(plan) => {
                    plan_times.push(plan.times);
                    if keep_opt_logs {
                        opt_logs.push(OptLog { t, records: plan.opt_trace.clone() });
                    }
                    look_at = plan.track.points.first().copied();
                    pred_end = plan.track.points.last().copied().unwrap_or(pred_end);
                    traj = Some((plan.traj, t));
                    mark = ReplanMark::Accepted;
                }
                Err(_) => mark = ReplanMark::Failed,
            }
        }
        let state = tracker_state(&traj, start, t);
        if !map.is_free(state.pos) {
            return Err(SimError::Collision(format!("tracker in occupied space at t = {t:.2}")));
        }
        if let Some(z1) = look_at {
            let d = z1 - state.pos;
            if d.norm() > 1e-9 {
                let err = wrap_angle(heading(d) - yaw);
                let lim = cfg.camera.yaw_rate * dt;
                yaw = wrap_angle(yaw + err.clamp(-lim, lim));
            }
        }

        if truth.maneuvering && t > walk_start {
            last_maneuver = t;
        }
        let maneuver = t < walk_start + WARMUP_TIME || t - last_maneuver < SETTLE_TIME;
        let dist = planner.distribution();
        rows.push(TraceRow {
            t,
            s: truth.s,
            target: [truth.position.x, truth.position.y],
            target_vel: [truth.velocity.x, truth.velocity.y],
            target_heading: truth.body_heading,
            tracker: [state.pos.x, state.pos.y],
            tracker_vel: [state.vel.x, state.vel.y],
            tracker_yaw: yaw,
            probs: dist.prob.0,
            intent: dist.argmax.label().to_string(),
            pred: [pred_end.x, pred_end.y],
            occluded: occluded(map, state.pos, yaw, truth.position, &cfg.camera),
            distance: (truth.position - state.pos).norm(),
            maneuver,
            replan: mark,
        });
    }

    let mut summary = Summary::from_rows(&rows, dt, band);
    if !plan_times.is_empty() {
        let ms: Vec<f64> = plan_times.iter().map(|p| p.total() * 1e3).collect();
        summary.mean_planning_ms = Some(ms.iter().sum::<f64>() / ms.len() as f64);
        summary.max_planning_ms = Some(ms.iter().copied().fold(0.0, f64::max));
    }
    let turn_end_times = turn_end_times(&rows, &sc.path);
    Ok(RunOutput { rows, summary, plan_times, opt_logs, turn_end_times })
}

/// Times at which the target leaves each fillet.
fn turn_end_times(rows: &[TraceRow], path: &Path) -> Vec<f64> {
    path.turn_intervals()
        .iter()
        .filter_map(|&(_, end, _)| rows.iter().find(|r| r.s >= end - 1e-9).map(|r| r.t))
        .collect()
}
