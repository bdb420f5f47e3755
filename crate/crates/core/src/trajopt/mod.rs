//! Spatial-temporal trajectory optimization.
//!
//! The decision variables are the intermediate waypoints `q` and the piece
//! durations `T` of a minimum-jerk piecewise quintic. Durations are written
//! as `T = T_p * softmax(tau)` so they stay positive and sum to the
//! prediction horizon, and L-BFGS runs over `(q, tau)` unconstrained.

pub mod banded;
pub mod cost;
pub mod lbfgs;
pub mod minco;

use std::time::Duration;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use cost::{
    absolute_penalty, dec_lower_tolerance, evaluate, relative_penalty, smoothness_cost, AbsoluteTerms,
    CostBreakdown, Gradient, OptProblem, PenaltyWeights, RelativeTerms,
};
pub use lbfgs::{IterRecord, LbfgsParams, Termination};
pub use minco::{locate_piece, Boundary, EndState, Minco, PiecewiseTrajectory};

use crate::error::{Error, Result};
use crate::geom::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajOptParams {
    pub weights: PenaltyWeights,
    pub v_max: f64,
    pub a_max: f64,
    pub kappa: usize,
    /// Desired tracking distance, meters.
    pub d0: f64,
    /// Distance tolerance, meters.
    pub d_tau: f64,
    /// Trajectory pieces per corridor polytope.
    pub k_pieces: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Wall-clock budget per solve, milliseconds (`None` for no limit).
    pub time_budget_ms: Option<f64>,
    pub memory: usize,
}

impl Default for TrajOptParams {
    fn default() -> Self {
        Self {
            weights: PenaltyWeights::default(),
            v_max: 3.0,
            a_max: 5.0,
            kappa: 16,
            d0: 2.0,
            d_tau: 0.4,
            k_pieces: 2,
            max_iters: 100,
            grad_tol: 1e-5,
            time_budget_ms: Some(40.0),
            memory: 8,
        }
    }
}

/// `T_p * softmax(tau)`, with the last entry set so the sum is exactly `T_p`.
pub fn durations_from_logits(tau: &[f64], total: f64) -> Vec<f64> {
    let mx = tau.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = tau.iter().map(|t| (t - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    let mut out: Vec<f64> = e.iter().map(|x| total * x / s).collect();
    let n = out.len();
    if n == 1 {
        return vec![total];
    }
    // Sequential sums can skip `total` on a rounding tie; moving the head sum
    // by one of its ulps breaks the tie.
    for _ in 0..16 {
        let head: f64 = out[..n - 1].iter().sum();
        let mut last = total - head;
        if !(last > 0.0) {
            break;
        }
        for _ in 0..4 {
            let s = head + last;
            if s == total {
                break;
            }
            last -= s - total;
        }
        out[n - 1] = last;
        if head + last == total {
            break;
        }
        out[n - 2] += head.next_up() - head;
    }
    out
}

/// Logits reproducing the given positive durations.
pub fn logits_from_durations(t: &[f64]) -> Vec<f64> {
    t.iter().map(|x| x.ln()).collect()
}

/// Chain rule from `dJ/dT` to `dJ/dtau` through the softmax.
pub fn logit_gradient(t: &[f64], grad_t: &[f64], total: f64) -> Vec<f64> {
    let avg: f64 = grad_t.iter().zip(t).map(|(g, x)| g * x).sum::<f64>() / total;
    t.iter().zip(grad_t).map(|(x, g)| x * (g - avg)).collect()
}

/// Total cost and its gradient with respect to the waypoints and durations.
pub fn cost_and_gradient(
    q: &[Vec2],
    t: &[f64],
    boundary: Boundary,
    prob: &OptProblem,
) -> Result<(Minco, CostBreakdown, Vec<Vec2>, Vec<f64>)> {
    let minco = Minco::construct(q, t, boundary)?;
    let (cost, grad) = evaluate(&minco.traj, prob)?;
    let (gq, gt) = minco.propagate_grad(&grad.c, &grad.t);
    Ok((minco, cost, gq, gt))
}

/// Splits each polyline segment into `k` equal pieces. `seg_durations[i]`
/// is the time allotted to segment `i`. Returns interior waypoints and piece
/// durations.
pub fn seed_pieces(vertices: &[Vec2], seg_durations: &[f64], k: usize) -> Result<(Vec<Vec2>, Vec<f64>)> {
    if vertices.len() < 2 || seg_durations.len() + 1 != vertices.len() || k == 0 {
        return Err(Error::InvalidArgument("seed needs n + 1 vertices for n segment durations".into()));
    }
    let mut q = Vec::new();
    let mut t = Vec::new();
    for (i, w) in vertices.windows(2).enumerate() {
        for j in 0..k {
            if i > 0 || j > 0 {
                q.push(w[0] + (w[1] - w[0]) * (j as f64 / k as f64));
            }
            t.push(seg_durations[i] / k as f64);
        }
    }
    Ok((q, t))
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub traj: PiecewiseTrajectory,
    pub cost: CostBreakdown,
    pub seed_cost: CostBreakdown,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Vec<IterRecord>,
}

impl OptResult {
    pub fn budget_exhausted(&self) -> bool {
        matches!(self.termination, Termination::TimeBudget | Termination::IterationCap)
    }
}

fn pack(q: &[Vec2], tau: &[f64]) -> DVector<f64> {
    DVector::from_iterator(2 * q.len() + tau.len(), q.iter().flat_map(|p| [p.x, p.y]).chain(tau.iter().copied()))
}

fn unpack(x: &DVector<f64>, nq: usize) -> (Vec<Vec2>, Vec<f64>) {
    let q = (0..nq).map(|i| Vec2::new(x[2 * i], x[2 * i + 1])).collect();
    let tau = x.iter().skip(2 * nq).copied().collect();
    (q, tau)
}

/// Minimizes the total cost over `(q, T)` from the seed `(q0, t0)`, keeping
/// the total duration equal to `sum(t0)`.
pub fn optimize(
    q0: &[Vec2],
    t0: &[f64],
    boundary: Boundary,
    prob: &OptProblem,
    params: &TrajOptParams,
) -> Result<OptResult> {
    prob.validate(t0.len())?;
    let total: f64 = t0.iter().sum();
    if prob.stamps.iter().any(|s| !(*s > 0.0 && *s <= total * (1.0 + 1e-12))) {
        return Err(Error::InvalidArgument("stamps must lie in (0, total duration]".into()));
    }
    let seed = Minco::construct(q0, t0, boundary)?;
    let (seed_cost, _) = evaluate(&seed.traj, prob)?;
    if !seed_cost.total().is_finite() {
        return Err(Error::NonFinite("seed cost".into()));
    }
    let nq = q0.len();
    let f = |x: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
        let (q, tau) = unpack(x, nq);
        let t = durations_from_logits(&tau, total);
        let (_, cost, gq, gt) = cost_and_gradient(&q, &t, boundary, prob)?;
        let gtau = logit_gradient(&t, &gt, total);
        Ok((cost.total(), pack(&gq, &gtau)))
    };
    let lp = LbfgsParams {
        memory: params.memory,
        max_iters: params.max_iters,
        grad_tol: params.grad_tol,
        time_budget: params.time_budget_ms.map(|ms| Duration::from_secs_f64(ms / 1e3)),
        ..Default::default()
    };
    let res = lbfgs::minimize(f, pack(q0, &logits_from_durations(t0)), &lp)?;
    let (q, tau) = unpack(&res.x, nq);
    let t = durations_from_logits(&tau, total);
    let minco = Minco::construct(&q, &t, boundary)?;
    let (cost, _) = evaluate(&minco.traj, prob)?;
    // Rounding in the reparameterization may nudge the cost; fall back to the seed if so.
    let (traj, cost) = if cost.total() <= seed_cost.total() { (minco.traj, cost) } else { (seed.traj, seed_cost) };
    Ok(OptResult { traj, cost, seed_cost, iterations: res.iterations, termination: res.termination, trace: res.trace })
}
