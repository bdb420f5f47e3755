//! The planning pipeline wired together: perception updates the target
//! estimate and intention distribution; each replan runs prediction,
//! corridor construction, and trajectory optimization.

use std::time::Instant;

use itrack_core::corridor::{
    desired_visible_region, generate_corridor, occlusion_free_waypoints, visible_region, CorridorParams,
};
use itrack_core::env::OccupancyGrid;
use itrack_core::intention::{Intention, IntentionDistribution, IntentionEstimator, IntentionParams};
use itrack_core::prediction::{predict_motion, IntentionModelParams, PenaltyMatrix, PredictedTrack};
use itrack_core::target_state::{FilterParams, LandmarkSet, TargetEstimate, TargetObserver};
use itrack_core::trajopt::{
    dec_lower_tolerance, optimize, seed_pieces, Boundary, EndState, IterRecord, OptProblem, PiecewiseTrajectory,
    TrajOptParams,
};
use itrack_core::{Error, Result, Vec2};

use crate::config::ScenarioConfig;

/// Sampling step of the collision check on new trajectories, seconds.
const COLLISION_DT: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct PlannerConfig {
    pub filter: FilterParams,
    pub intention: IntentionParams,
    pub prediction: IntentionModelParams,
    pub penalty: PenaltyMatrix,
    pub corridor: CorridorParams,
    pub trajopt: TrajOptParams,
    /// Intention-blind ablation.
    pub blind: bool,
}

impl PlannerConfig {
    pub fn from_scenario(cfg: &ScenarioConfig) -> Self {
        let mut trajopt = cfg.trajopt;
        if cfg.deterministic {
            trajopt.time_budget_ms = None;
        }
        Self {
            filter: cfg.filter,
            intention: cfg.intention,
            prediction: cfg.prediction.clone(),
            penalty: cfg.penalty,
            corridor: cfg.corridor,
            trajopt,
            blind: cfg.blind,
        }
    }
}

/// Wall-clock time spent in each planning stage, seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub prediction: f64,
    pub corridor: f64,
    pub optimization: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.prediction + self.corridor + self.optimization
    }
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub traj: PiecewiseTrajectory,
    pub track: PredictedTrack,
    pub waypoints: Vec<Vec2>,
    pub dist: IntentionDistribution,
    pub times: StageTimes,
    pub degraded_waypoints: usize,
    pub degraded_regions: usize,
    pub cost: f64,
    pub seed_cost: f64,
    pub iterations: usize,
    pub opt_trace: Vec<IterRecord>,
}

#[derive(Debug, Clone)]
pub struct Planner {
    cfg: PlannerConfig,
    observer: TargetObserver,
    estimator: IntentionEstimator,
    dist: IntentionDistribution,
}

impl Planner {
    pub fn new(cfg: PlannerConfig) -> Self {
        let dist = IntentionDistribution::cv_baseline(&cfg.intention);
        Self { observer: TargetObserver::new(cfg.filter), estimator: IntentionEstimator::new(cfg.intention), dist, cfg }
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn estimate(&self) -> Option<&TargetEstimate> {
        self.observer.estimate()
    }

    pub fn distribution(&self) -> &IntentionDistribution {
        &self.dist
    }

    /// Feeds one landmark observation through the filter and the intention model.
    pub fn perceive(&mut self, map: &OccupancyGrid, lm: &LandmarkSet, stamp: f64) -> Result<IntentionDistribution> {
        let est = self.observer.observe(lm, stamp)?.clone();
        self.dist = if self.cfg.blind {
            IntentionDistribution::cv_baseline(&self.cfg.intention)
        } else if map.contains(est.position) {
            self.estimator.update(map, &est)?.dist
        } else {
            self.dist
        };
        Ok(self.dist)
    }

    /// Plans a trajectory starting at time `now` from tracker state `start`.
    pub fn plan(&self, map: &OccupancyGrid, now: f64, start: EndState) -> Result<Plan> {
        let est = self.observer.estimate().ok_or_else(|| Error::InvalidArgument("no target estimate yet".into()))?;
        let cfg = &self.cfg;
        let op = &cfg.trajopt;
        let dist = self.dist;

        let t0 = Instant::now();
        let p_now = est.position + est.velocity * (now - est.stamp).max(0.0);
        let (i0, model) = if cfg.blind {
            (Intention::Cv, IntentionModelParams { intentions: vec![Intention::Cv], ..cfg.prediction.clone() })
        } else {
            (dist.argmax, cfg.prediction.clone())
        };
        let track = if map.is_free(p_now) {
            predict_motion(p_now, est.velocity, i0, map, &model, &cfg.penalty)?
        } else {
            PredictedTrack::constant_velocity(est.position, est.velocity, model.horizon, model.n_samples)
        };
        let t1 = Instant::now();

        let wps = occlusion_free_waypoints(map, &track.points, start.pos, op.d0, &cfg.corridor)?;
        let mut path = Vec::with_capacity(wps.points.len() + 1);
        path.push(start.pos);
        path.extend_from_slice(&wps.points);
        let corridor = generate_corridor(map, &path, cfg.corridor.max_grow)?;

        let (p_tl, p_tr, p_dec) = if cfg.blind {
            (0.0, 0.0, 0.0)
        } else {
            (dist.p(Intention::Tl), dist.p(Intention::Tr), dist.p(Intention::Dec))
        };
        let radius = op.d0 + op.d_tau;
        let mut visible = Vec::with_capacity(track.len());
        let mut desired = Vec::with_capacity(track.len());
        let mut degraded_regions = 0;
        for (z, s) in track.points.iter().zip(&wps.points) {
            let r = visible_region(map, *z, s - z, radius, cfg.corridor.theta_cap);
            let (d, zero) =
                desired_visible_region(&r.sector, p_tl, p_tr, cfg.corridor.theta_alpha, cfg.corridor.theta_beta);
            if r.degraded || zero {
                degraded_regions += 1;
            }
            visible.push(r.sector);
            desired.push(d);
        }

        // Time allotted to each refined corridor segment: its source segment's
        // stamp interval, split in proportion to length.
        let mut seg_t = vec![0.0; corridor.polytopes.len()];
        for src in 0..path.len() - 1 {
            let dt = track.stamps[src] - if src == 0 { 0.0 } else { track.stamps[src - 1] };
            let idx: Vec<usize> = (0..seg_t.len()).filter(|&i| corridor.source_segment[i] == src).collect();
            let lens: Vec<f64> =
                idx.iter().map(|&i| (corridor.vertices[i + 1] - corridor.vertices[i]).norm() + 1e-3).collect();
            let total: f64 = lens.iter().sum();
            for (&i, l) in idx.iter().zip(&lens) {
                seg_t[i] = dt * l / total;
            }
        }
        let (q0, t_seed) = seed_pieces(&corridor.vertices, &seg_t, op.k_pieces)?;
        let t2 = Instant::now();

        let horizon: f64 = t_seed.iter().sum();
        let stamps: Vec<f64> = track.stamps.iter().map(|s| s.min(horizon)).collect();
        let prob = OptProblem {
            corridors: corridor.polytopes.clone(),
            k_pieces: op.k_pieces,
            v_max: op.v_max,
            a_max: op.a_max,
            kappa: op.kappa,
            stamps,
            targets: track.points.clone(),
            d0: op.d0,
            d_l: if cfg.blind { op.d_tau } else { dec_lower_tolerance(op.d_tau, p_dec) },
            d_u: op.d_tau,
            visible,
            desired,
            weights: op.weights,
        };
        let end_vel = track.velocities.last().copied().unwrap_or_else(Vec2::zeros);
        let boundary = Boundary { start, end: EndState { pos: *wps.points.last().unwrap(), vel: end_vel, acc: Vec2::zeros() } };
        let res = optimize(&q0, &t_seed, boundary, &prob, op)?;
        let t3 = Instant::now();

        check_collision_free(map, &res.traj)?;
        Ok(Plan {
            traj: res.traj,
            track,
            waypoints: wps.points,
            dist,
            times: StageTimes {
                prediction: (t1 - t0).as_secs_f64(),
                corridor: (t2 - t1).as_secs_f64(),
                optimization: (t3 - t2).as_secs_f64(),
            },
            degraded_waypoints: wps.degraded.iter().filter(|d| **d).count(),
            degraded_regions,
            cost: res.cost.total(),
            seed_cost: res.seed_cost.total(),
            iterations: res.iterations,
            opt_trace: res.trace,
        })
    }
}

/// Errors if any sample of `traj` lies in an inflated-occupied cell or off the map.
pub fn check_collision_free(map: &OccupancyGrid, traj: &PiecewiseTrajectory) -> Result<()> {
    let total = traj.total_duration();
    let n = (total / COLLISION_DT).ceil() as usize;
    for k in 0..=n {
        let p = traj.eval_clamped(k as f64 * total / n.max(1) as f64, 0);
        if !map.is_free(p) {
            return Err(Error::NoFreeSpace(format!("trajectory enters occupied space at ({:.2}, {:.2})", p.x, p.y)));
        }
    }
    Ok(())
}
