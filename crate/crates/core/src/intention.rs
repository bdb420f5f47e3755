//! Reachable regions and the four-intention probability model.
//!
//! Each intention gets a risk score (from map geometry around the target)
//! and an observation score (from the target's own measured state). The
//! two are squashed into a probability with a shifted `tanh`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::env::{OccupancyGrid, Sector, Side};
use crate::error::Result;
use crate::geom::{rotate, Vec2};
use crate::target_state::{TargetEstimate, EPS_SPEED};

/// Target intentions, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intention {
    Cv,
    Tl,
    Tr,
    Dec,
}

impl Intention {
    pub const ALL: [Intention; 4] = [Intention::Cv, Intention::Tl, Intention::Tr, Intention::Dec];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Intention::Cv => "cv",
            Intention::Tl => "tl",
            Intention::Tr => "tr",
            Intention::Dec => "dec",
        }
    }
}

impl std::fmt::Display for Intention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntentionParams {
    /// Turn-risk gain on reachable-angle growth.
    pub k1: f64,
    /// Turn-observation gain on the body/velocity angle.
    pub k2: f64,
    /// Deceleration-risk gain on `speed^2 / d_o`.
    pub k3: f64,
    /// Deceleration-observation gain on the speed drop.
    pub k4: f64,
    /// Gain of the strongest non-cv risk inside the cv risk.
    pub k_cv_risk: f64,
    /// Gain of the strongest non-cv observation inside the cv observation.
    pub k5: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    /// Look-ahead for the second reachable region, seconds.
    pub t0: f64,
    /// Speed-drop observation interval, seconds.
    pub dt_obs: f64,
    /// Fan cap per side, radians.
    pub theta_max: f64,
    /// Minimum reach of the reachable region, meters.
    pub r_min: f64,
    /// Reach horizon of the reachable region, seconds.
    pub reach_time: f64,
    /// Range cap of the obstacle-ahead raycast, meters.
    pub d_o_cap: f64,
}

impl Default for IntentionParams {
    fn default() -> Self {
        Self {
            k1: 2.0,
            k2: 1.5,
            k3: 0.5,
            k4: 1.0,
            k_cv_risk: 1.0,
            k5: 1.0,
            b0: 0.5,
            b1: 0.5,
            b2: 0.5,
            t0: 1.0,
            dt_obs: 0.3,
            theta_max: std::f64::consts::FRAC_PI_2,
            r_min: 0.5,
            reach_time: 1.0,
            d_o_cap: 10.0,
        }
    }
}

/// Left and right reachable fans on either side of the travel direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachableRegion {
    pub apex: Vec2,
    /// Unit travel direction; `None` when undefined.
    pub dir: Option<Vec2>,
    pub theta_l: f64,
    pub theta_r: f64,
    pub radius: f64,
}

impl ReachableRegion {
    pub fn is_defined(&self) -> bool {
        self.dir.is_some()
    }

    /// Sector spanning `[0, theta_l]` counter-clockwise from the travel direction.
    pub fn left_sector(&self) -> Option<Sector> {
        let dir = self.dir?;
        Some(Sector {
            apex: self.apex,
            axis: rotate(dir, self.theta_l / 2.0),
            half_angle: self.theta_l / 2.0,
            radius: self.radius,
        })
    }

    pub fn right_sector(&self) -> Option<Sector> {
        let dir = self.dir?;
        Some(Sector {
            apex: self.apex,
            axis: rotate(dir, -self.theta_r / 2.0),
            half_angle: self.theta_r / 2.0,
            radius: self.radius,
        })
    }
}

/// Reachable region at `p` for velocity `v`. When `v` is too slow to give a
/// direction, `held_dir` (the last valid one) is used; with neither the
/// region is undefined and both fans are 0.
pub fn reachable_region(
    map: &OccupancyGrid,
    p: Vec2,
    v: Vec2,
    held_dir: Option<Vec2>,
    params: &IntentionParams,
) -> Result<ReachableRegion> {
    let speed = v.norm();
    let radius = (speed * params.reach_time).max(params.r_min);
    let dir = if speed > EPS_SPEED { Some(v / speed) } else { held_dir.map(|d| d.normalize()) };
    let Some(dir) = dir else {
        // Still validate the apex.
        map.raycast(p, Vec2::x(), 0.0)?;
        return Ok(ReachableRegion { apex: p, dir: None, theta_l: 0.0, theta_r: 0.0, radius });
    };
    let theta_l = map.clearance_fan(p, dir, Side::Left, params.theta_max, radius)?;
    let theta_r = map.clearance_fan(p, dir, Side::Right, params.theta_max, radius)?;
    Ok(ReachableRegion { apex: p, dir: Some(dir), theta_l, theta_r, radius })
}

/// Per-intention scores indexed by [`Intention::index`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Scores(pub [f64; 4]);

impl Scores {
    pub fn get(&self, i: Intention) -> f64 {
        self.0[i.index()]
    }
}

pub fn risk_scores(
    now: &ReachableRegion,
    ahead: &ReachableRegion,
    v: Vec2,
    d_o: f64,
    d_o_floor: f64,
    params: &IntentionParams,
) -> Scores {
    let d_o = d_o.max(d_o_floor).max(f64::MIN_POSITIVE);
    let tl = (params.k1 * (ahead.theta_l - now.theta_l)).max(0.0);
    let tr = (params.k1 * (ahead.theta_r - now.theta_r)).max(0.0);
    let dec = params.k3 * v.norm_squared() / d_o;
    let cv = -params.k_cv_risk * tl.max(tr).max(dec) + params.b1;
    Scores([cv, tl, tr, dec])
}

/// Observation scores. `r_bv` is `None` when the body/velocity angle is
/// undefined, which zeroes both turn observations.
pub fn observation_scores(
    r_bv: Option<f64>,
    speed_now: f64,
    speed_prev: f64,
    params: &IntentionParams,
) -> Scores {
    let r_bv = r_bv.unwrap_or(0.0);
    let tl = (params.k2 * r_bv).max(0.0);
    let tr = (-params.k2 * r_bv).max(0.0);
    let dec = (params.k4 * (speed_prev - speed_now)).max(0.0);
    let cv = -params.k5 * tl.max(tr).max(dec) + params.b2;
    Scores([cv, tl, tr, dec])
}

/// `(tanh(risk + obs - b0) + 1) / 2`.
pub fn activate(risk: f64, obs: f64, b0: f64) -> f64 {
    ((risk + obs - b0).tanh() + 1.0) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntentionDistribution {
    pub risk: Scores,
    pub obs: Scores,
    pub prob: Scores,
    pub argmax: Intention,
}

impl IntentionDistribution {
    pub fn from_scores(risk: Scores, obs: Scores, b0: f64) -> Self {
        let mut prob = [0.0; 4];
        for i in Intention::ALL {
            prob[i.index()] = activate(risk.get(i), obs.get(i), b0);
        }
        let mut argmax = Intention::Cv;
        for i in Intention::ALL {
            // Strict comparison keeps the earliest intention on ties.
            if prob[i.index()] > prob[argmax.index()] {
                argmax = i;
            }
        }
        Self { risk, obs, prob: Scores(prob), argmax }
    }

    /// The fixed point with no risk and no observation evidence.
    pub fn cv_baseline(params: &IntentionParams) -> Self {
        let risk = Scores([params.b1, 0.0, 0.0, 0.0]);
        let obs = Scores([params.b2, 0.0, 0.0, 0.0]);
        Self::from_scores(risk, obs, params.b0)
    }

    pub fn p(&self, i: Intention) -> f64 {
        self.prob.get(i)
    }
}

/// Stateful intention predictor: keeps the short speed history needed by the
/// deceleration observation.
#[derive(Debug, Clone)]
pub struct IntentionEstimator {
    params: IntentionParams,
    speeds: VecDeque<(f64, f64)>,
}

/// Everything computed during one intention update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntentionUpdate {
    pub dist: IntentionDistribution,
    pub region_now: ReachableRegion,
    pub region_ahead: ReachableRegion,
    pub d_o: f64,
}

impl IntentionEstimator {
    pub fn new(params: IntentionParams) -> Self {
        Self { params, speeds: VecDeque::new() }
    }

    pub fn params(&self) -> &IntentionParams {
        &self.params
    }

    fn speed_before(&self, stamp: f64) -> Option<f64> {
        let cutoff = stamp - self.params.dt_obs;
        self.speeds
            .iter()
            .rev()
            .find(|(t, _)| *t <= cutoff + 1e-9)
            .or_else(|| self.speeds.front())
            .map(|&(_, s)| s)
    }

    pub fn update(&mut self, map: &OccupancyGrid, est: &TargetEstimate) -> Result<IntentionUpdate> {
        let params = self.params;
        let p = est.position;
        let v = est.velocity;
        let speed = v.norm();
        let region_now = reachable_region(map, p, v, est.motion_dir, &params)?;

        let d_o = match region_now.dir {
            Some(dir) => map.raycast(p, dir, params.d_o_cap)?,
            None => params.d_o_cap,
        };
        // Look-ahead by the constant-velocity model, stopped short of the obstacle ahead.
        let region_ahead = match region_now.dir {
            Some(dir) if speed > EPS_SPEED => {
                let reach = (speed * params.t0).min((d_o - map.resolution()).max(0.0));
                let ahead = p + dir * reach;
                if map.contains(ahead) {
                    reachable_region(map, ahead, v, est.motion_dir, &params)?
                } else {
                    region_now
                }
            }
            _ => region_now,
        };
        let risk = risk_scores(&region_now, &region_ahead, v, d_o, map.resolution(), &params);

        let speed_prev = self.speed_before(est.stamp).unwrap_or(speed);
        let r_bv = est.rotation_valid.then_some(est.r_bv);
        let obs = observation_scores(r_bv, speed, speed_prev, &params);

        self.speeds.push_back((est.stamp, speed));
        while self.speeds.len() > 2
            && self.speeds[1].0 <= est.stamp - params.dt_obs - 1e-9
        {
            self.speeds.pop_front();
        }

        Ok(IntentionUpdate {
            dist: IntentionDistribution::from_scores(risk, obs, params.b0),
            region_now,
            region_ahead,
            d_o,
        })
    }
}
