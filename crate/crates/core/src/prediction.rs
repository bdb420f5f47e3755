//! Intention-driven hybrid A* over target motion primitives.
//!
//! Every node carries one intention. Expanding a node applies each allowed
//! intention's motion model (constant velocity, coordinated turn, or
//! constant deceleration) for one step; switching intention between parent
//! and child costs the corresponding penalty-matrix entry. The search looks
//! for the depth-`T_p / dt` path minimizing total switch cost plus the
//! weighted horizontal distance of its end point to the constant-velocity
//! goal.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::env::OccupancyGrid;
use crate::error::{Error, Result};
use crate::geom::{heading, Vec2};
use crate::intention::Intention;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntentionModelParams {
    /// Turn-rate magnitudes for the coordinated-turn primitives, rad/s.
    pub turn_rates: Vec<f64>,
    /// Along-track accelerations for the deceleration primitives (negative), m/s^2.
    pub decel_values: Vec<f64>,
    /// Expansion step, seconds.
    pub dt_exp: f64,
    /// Prediction horizon, seconds.
    pub horizon: f64,
    /// Number of output samples.
    pub n_samples: usize,
    /// Heuristic weight per meter.
    pub w_h: f64,
    /// Target speed cap used for pruning, m/s.
    pub speed_cap: f64,
    /// Heading bucket of the closed set, radians; 0 disables the closed set
    /// and makes the search exhaustive.
    pub heading_bucket: f64,
    /// Intentions the search may use.
    pub intentions: Vec<Intention>,
    pub max_expansions: usize,
}

impl Default for IntentionModelParams {
    fn default() -> Self {
        Self {
            turn_rates: vec![0.6, 1.2, 1.8],
            decel_values: vec![-1.0, -2.0, -3.0],
            dt_exp: 0.25,
            horizon: 2.0,
            n_samples: 8,
            w_h: 0.4,
            speed_cap: 3.0,
            heading_bucket: 30f64.to_radians(),
            intentions: Intention::ALL.to_vec(),
            max_expansions: 20_000,
        }
    }
}

impl IntentionModelParams {
    pub fn depth(&self) -> usize {
        (self.horizon / self.dt_exp).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.dt_exp > 0.0) {
            return bad("dt_exp must be > 0");
        }
        let ratio = self.horizon / self.dt_exp;
        if !(self.horizon > 0.0) || (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return bad("horizon must be a positive multiple of dt_exp");
        }
        if self.turn_rates.iter().any(|w| *w == 0.0 || !w.is_finite()) {
            return bad("turn rates must be nonzero");
        }
        if self.decel_values.iter().any(|a| !(*a < 0.0)) {
            return bad("deceleration values must be negative");
        }
        if !(self.heading_bucket >= 0.0) {
            return bad("heading_bucket must be >= 0");
        }
        if self.n_samples == 0 {
            return bad("n_samples must be >= 1");
        }
        if self.intentions.is_empty() {
            return bad("at least one intention required");
        }
        Ok(())
    }

    /// Primitive list in tie-break order: intention order, then parameter order.
    pub fn primitives(&self) -> Vec<Primitive> {
        let mut out = Vec::new();
        for i in Intention::ALL {
            if !self.intentions.contains(&i) {
                continue;
            }
            match i {
                Intention::Cv => out.push(Primitive { intention: i, param: 0.0 }),
                Intention::Tl => out.extend(self.turn_rates.iter().map(|w| Primitive { intention: i, param: w.abs() })),
                Intention::Tr => out.extend(self.turn_rates.iter().map(|w| Primitive { intention: i, param: -w.abs() })),
                Intention::Dec => out.extend(self.decel_values.iter().map(|a| Primitive { intention: i, param: *a })),
            }
        }
        out
    }
}

/// One intention with its model parameter: turn rate for turns, along-track
/// acceleration for deceleration, unused for constant velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub intention: Intention,
    pub param: f64,
}

/// Closed-form one-step state transition of the intention's motion model.
pub fn step_model(p: Vec2, v: Vec2, intention: Intention, dt: f64, param: f64) -> Result<(Vec2, Vec2)> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("step dt must be >= 0, got {dt}")));
    }
    match intention {
        Intention::Cv => Ok((p + v * dt, v)),
        Intention::Tl | Intention::Tr => {
            let w = param;
            if w == 0.0 {
                return Err(Error::InvalidArgument("coordinated turn needs a nonzero rate".into()));
            }
            let (s, c) = (w * dt).sin_cos();
            let dp = Vec2::new(
                v.x * s / w + v.y * (c - 1.0) / w,
                v.x * (1.0 - c) / w + v.y * s / w,
            );
            let nv = Vec2::new(v.x * c - v.y * s, v.x * s + v.y * c);
            Ok((p + dp, nv))
        }
        Intention::Dec => {
            let a = param;
            if !(a < 0.0) {
                return Err(Error::InvalidArgument("deceleration must oppose the velocity".into()));
            }
            let speed = v.norm();
            if speed == 0.0 {
                return Ok((p, v));
            }
            let dir = v / speed;
            let t_stop = speed / -a;
            if dt >= t_stop {
                Ok((p + dir * (speed * t_stop / 2.0), Vec2::zeros()))
            } else {
                Ok((p + v * dt + dir * (0.5 * a * dt * dt), v + dir * (a * dt)))
            }
        }
    }
}

/// Intention-switch cost matrix indexed by [`Intention::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 4]; 4]", into = "[[f64; 4]; 4]")]
pub struct PenaltyMatrix([[f64; 4]; 4]);

impl PenaltyMatrix {
    pub fn new(m: [[f64; 4]; 4]) -> Result<Self> {
        for (i, row) in m.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if i == j && x != 0.0 {
                    return Err(Error::InvalidArgument("penalty diagonal must be 0".into()));
                }
                if i != j && !(x > 0.0 && x.is_finite()) {
                    return Err(Error::InvalidArgument("penalty off-diagonal must be > 0".into()));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn get(&self, from: Intention, to: Intention) -> f64 {
        self.0[from.index()][to.index()]
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        let mut m = self.0;
        m.iter_mut().flatten().for_each(|x| *x *= s);
        Self::new(m)
    }

    pub fn as_rows(&self) -> &[[f64; 4]; 4] {
        &self.0
    }
}

impl Default for PenaltyMatrix {
    fn default() -> Self {
        let mut m = [[1.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        m[Intention::Tl.index()][Intention::Tr.index()] = 2.0;
        m[Intention::Tr.index()][Intention::Tl.index()] = 2.0;
        Self(m)
    }
}

impl TryFrom<[[f64; 4]; 4]> for PenaltyMatrix {
    type Error = Error;
    fn try_from(m: [[f64; 4]; 4]) -> Result<Self> {
        Self::new(m)
    }
}

impl From<PenaltyMatrix> for [[f64; 4]; 4] {
    fn from(p: PenaltyMatrix) -> Self {
        p.0
    }
}

/// One-hot intention vector.
pub fn one_hot(i: Intention) -> [f64; 4] {
    let mut e = [0.0; 4];
    e[i.index()] = 1.0;
    e
}

/// `prev^T * I_pen * next` for one-hot `prev` and `next`.
pub fn transition_cost(prev: &[f64], next: &[f64], pen: &PenaltyMatrix) -> Result<f64> {
    let check = |v: &[f64]| {
        v.len() == 4
            && v.iter().all(|&x| x == 0.0 || x == 1.0)
            && v.iter().filter(|&&x| x == 1.0).count() == 1
    };
    if !check(prev) || !check(next) {
        return Err(Error::InvalidArgument("transition cost needs one-hot vectors".into()));
    }
    let mut acc = 0.0;
    for (i, &a) in prev.iter().enumerate() {
        for (j, &b) in next.iter().enumerate() {
            acc += a * pen.0[i][j] * b;
        }
    }
    Ok(acc)
}

/// Weighted horizontal distance to the goal.
pub fn heuristic(p: Vec2, goal: Vec2, w_h: f64) -> f64 {
    w_h * (p - goal).norm()
}

/// Predicted target positions at uniform stamps over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedTrack {
    pub points: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
    pub stamps: Vec<f64>,
    pub intents: Vec<Intention>,
    /// Switch cost plus terminal heuristic of the chosen path.
    pub cost: f64,
    /// Search ran out of collision-free children before the horizon.
    pub truncated: bool,
    pub expansions: usize,
}

impl PredictedTrack {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Straight constant-velocity track, used when no search is possible.
    pub fn constant_velocity(p0: Vec2, v0: Vec2, horizon: f64, n: usize) -> Self {
        let stamps: Vec<f64> = (1..=n).map(|k| horizon * k as f64 / n as f64).collect();
        Self {
            points: stamps.iter().map(|t| p0 + v0 * *t).collect(),
            velocities: vec![v0; n],
            stamps,
            intents: vec![Intention::Cv; n],
            cost: 0.0,
            truncated: false,
            expansions: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    p: Vec2,
    v: Vec2,
    intention: Intention,
    prim: Option<usize>,
    depth: usize,
    g: f64,
    parent: Option<usize>,
    seq: Vec<u8>,
}

#[derive(Debug)]
struct Entry {
    key: f64,
    seq: Vec<u8>,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // Reversed so the max-heap pops the smallest (key, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.total_cmp(&self.key).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Slack keeping intermediate keys strictly below the cost they bound.
const KEY_SLACK: f64 = 1e-9;

/// True when the target can move from `a` to `b` without touching obstacles.
pub fn step_is_free(map: &OccupancyGrid, a: Vec2, b: Vec2) -> bool {
    map.is_free(b) && map.line_of_sight(a, b).unwrap_or(false)
}

/// Runs the intention-driven search from target state `(p0, v0)` whose most
/// likely intention is `i0`.
///
/// Nodes are popped in order of `g` plus a bound on the terminal heuristic:
/// at the final depth the bound is the heuristic itself, earlier it is
/// discounted by the distance the node can still cover. The first popped
/// final-depth node therefore minimizes switch cost plus terminal heuristic;
/// exact ties go to the lexicographically smallest primitive sequence.
pub fn predict_motion(
    p0: Vec2,
    v0: Vec2,
    i0: Intention,
    map: &OccupancyGrid,
    params: &IntentionModelParams,
    pen: &PenaltyMatrix,
) -> Result<PredictedTrack> {
    params.validate()?;
    if !map.is_free(p0) {
        return Err(Error::NoFreeSpace(format!("target start ({:.2}, {:.2}) not free", p0.x, p0.y)));
    }
    let v0 = if v0.norm() > params.speed_cap { v0 * (params.speed_cap / v0.norm()) } else { v0 };
    let depth = params.depth();
    let dt = params.dt_exp;
    let goal = p0 + v0 * params.horizon;
    let prims = params.primitives();

    let key_of = |n: &Node| -> f64 {
        let d = (n.p - goal).norm();
        let remaining = (depth - n.depth) as f64 * dt;
        if remaining == 0.0 {
            n.g + params.w_h * d
        } else {
            n.g + params.w_h * (d - n.v.norm() * remaining - KEY_SLACK).max(0.0)
        }
    };

    let mut nodes = vec![Node { p: p0, v: v0, intention: i0, prim: None, depth: 0, g: 0.0, parent: None, seq: Vec::new() }];
    let mut heap = BinaryHeap::new();
    heap.push(Entry { key: key_of(&nodes[0]), seq: Vec::new(), idx: 0 });
    let mut closed: HashSet<(i64, i64, i64, Intention, usize)> = HashSet::new();
    let mut expansions = 0usize;
    let mut goal_idx = None;
    // Deepest node generated so far, kept as the fallback when the search stalls.
    let mut deepest = 0usize;

    while let Some(Entry { idx, .. }) = heap.pop() {
        let node = nodes[idx].clone();
        if node.depth == depth {
            goal_idx = Some(idx);
            break;
        }
        let (cx, cy) = map.cell_of(node.p);
        let hb = if params.heading_bucket > 0.0 && node.v.norm() > 0.0 {
            ((heading(node.v) + std::f64::consts::PI) / params.heading_bucket).floor() as i64
        } else {
            -1
        };
        if params.heading_bucket > 0.0 && !closed.insert((cx, cy, hb, node.intention, node.depth)) {
            continue;
        }
        expansions += 1;
        if expansions > params.max_expansions {
            break;
        }
        for (k, prim) in prims.iter().enumerate() {
            let (p, v) = step_model(node.p, node.v, prim.intention, dt, prim.param)?;
            if v.norm() > params.speed_cap + 1e-9 || !step_is_free(map, node.p, p) {
                continue;
            }
            let mut seq = node.seq.clone();
            seq.push(k as u8);
            let child = Node {
                p,
                v,
                intention: prim.intention,
                prim: Some(k),
                depth: node.depth + 1,
                g: node.g + pen.get(node.intention, prim.intention),
                parent: Some(idx),
                seq: seq.clone(),
            };
            let key = key_of(&child);
            nodes.push(child);
            let cidx = nodes.len() - 1;
            if better_fallback(&nodes[cidx], &nodes[deepest], goal, params.w_h) {
                deepest = cidx;
            }
            heap.push(Entry { key, seq, idx: cidx });
        }
    }

    let (end, truncated) = match goal_idx {
        Some(i) => (i, false),
        None => (deepest, true),
    };
    let mut chain = Vec::new();
    let mut cur = Some(end);
    while let Some(i) = cur {
        chain.push(i);
        cur = nodes[i].parent;
    }
    chain.reverse();
    let path: Vec<&Node> = chain.iter().map(|&i| &nodes[i]).collect();
    let cost = path.last().map(|n| n.g + heuristic(n.p, goal, params.w_h)).unwrap_or(0.0);

    let n = params.n_samples;
    let mut track = PredictedTrack {
        points: Vec::with_capacity(n),
        velocities: Vec::with_capacity(n),
        stamps: Vec::with_capacity(n),
        intents: Vec::with_capacity(n),
        cost,
        truncated,
        expansions,
    };
    let reached = path.len() - 1;
    for k in 1..=n {
        let t = params.horizon * k as f64 / n as f64;
        let j = ((t / dt) - 1e-9).ceil().max(1.0) as usize;
        let (p, v, intent) = if j <= reached {
            let from = path[j - 1];
            let to = path[j];
            let prim = prims[to.prim.expect("non-root node has a primitive")];
            let tau = t - (j - 1) as f64 * dt;
            let (p, v) = step_model(from.p, from.v, prim.intention, tau, prim.param)?;
            (p, v, prim.intention)
        } else {
            let last = path[reached];
            (last.p, Vec2::zeros(), last.intention)
        };
        track.points.push(p);
        track.velocities.push(v);
        track.stamps.push(t);
        track.intents.push(intent);
    }
    Ok(track)
}

fn better_fallback(a: &Node, b: &Node, goal: Vec2, w_h: f64) -> bool {
    if a.depth != b.depth {
        return a.depth > b.depth;
    }
    let ca = a.g + heuristic(a.p, goal, w_h);
    let cb = b.g + heuristic(b.p, goal, w_h);
    match ca.total_cmp(&cb) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.seq < b.seq,
    }
}
