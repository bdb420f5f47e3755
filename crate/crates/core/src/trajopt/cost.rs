//! Cost terms of the tracking trajectory problem and their gradients with
//! respect to coefficients `c` and durations `T`.
//!
//! Every penalty is `w * max(G, 0)^3` of some constraint function `G`, which
//! keeps the cost twice continuously differentiable at the constraint boundary.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::minco::{basis, locate_piece, PiecewiseTrajectory, NCOEF};
use crate::corridor::Polytope;
use crate::env::Sector;
use crate::error::{Error, Result};
use crate::geom::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyWeights {
    pub smooth: f64,
    pub corridor: f64,
    pub vel: f64,
    pub acc: f64,
    pub dist_lower: f64,
    pub dist_upper: f64,
    pub vis_desired: f64,
    pub vis_next: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self {
            smooth: 1.0,
            corridor: 1e4,
            vel: 1e3,
            acc: 1e3,
            dist_lower: 64.0,
            dist_upper: 64.0,
            vis_desired: 32.0,
            vis_next: 32.0,
        }
    }
}

impl PenaltyWeights {
    /// Smoothness only; every penalty switched off.
    pub fn smooth_only() -> Self {
        Self {
            smooth: 1.0,
            corridor: 0.0,
            vel: 0.0,
            acc: 0.0,
            dist_lower: 0.0,
            dist_upper: 0.0,
            vis_desired: 0.0,
            vis_next: 0.0,
        }
    }

    fn all_nonnegative(&self) -> bool {
        [
            self.smooth,
            self.corridor,
            self.vel,
            self.acc,
            self.dist_lower,
            self.dist_upper,
            self.vis_desired,
            self.vis_next,
        ]
        .iter()
        .all(|w| *w >= 0.0 && w.is_finite())
    }
}

/// Inner distance slack: shrinks to zero as deceleration becomes certain.
pub fn dec_lower_tolerance(d_tau: f64, p_dec: f64) -> f64 {
    (1.0 - p_dec.clamp(0.0, 1.0)) * d_tau
}

/// Everything the cost needs besides the trajectory itself.
#[derive(Debug, Clone)]
pub struct OptProblem {
    pub corridors: Vec<Polytope>,
    /// Pieces per corridor polytope; piece `i` belongs to polytope `i / k_pieces`.
    pub k_pieces: usize,
    pub v_max: f64,
    pub a_max: f64,
    /// Quadrature intervals per piece.
    pub kappa: usize,
    /// Absolute stamps `t_k`, measured from the trajectory start.
    pub stamps: Vec<f64>,
    /// Predicted target positions `z_k`.
    pub targets: Vec<Vec2>,
    pub d0: f64,
    pub d_l: f64,
    pub d_u: f64,
    /// Visible regions `V_k`, one per stamp.
    pub visible: Vec<Sector>,
    /// Desired visible regions, one per stamp.
    pub desired: Vec<Sector>,
    pub weights: PenaltyWeights,
}

impl OptProblem {
    pub fn validate(&self, pieces: usize) -> Result<()> {
        let n = self.stamps.len();
        if self.targets.len() != n || self.visible.len() != n || self.desired.len() != n {
            return Err(Error::InvalidArgument("track, regions, and stamps must align".into()));
        }
        if self.kappa < 2 {
            return Err(Error::InvalidArgument("quadrature needs kappa >= 2".into()));
        }
        if self.k_pieces == 0 || pieces > self.k_pieces * self.corridors.len() {
            return Err(Error::InvalidArgument(format!(
                "{pieces} pieces but only {} corridor polytopes at {} pieces each",
                self.corridors.len(),
                self.k_pieces
            )));
        }
        if !(self.d_l >= 0.0 && self.d_l < self.d0 && self.d_u >= 0.0) {
            return Err(Error::InvalidArgument("distance tolerances out of range".into()));
        }
        if !self.weights.all_nonnegative() {
            return Err(Error::InvalidArgument("penalty weights must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Gradient with respect to coefficients and durations.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub c: DMatrix<f64>,
    pub t: Vec<f64>,
}

impl Gradient {
    pub fn zeros(pieces: usize) -> Self {
        Self { c: DMatrix::zeros(NCOEF * pieces, 2), t: vec![0.0; pieces] }
    }

    fn add_point(&mut self, piece: usize, tau: f64, order: usize, g: Vec2) {
        let b = basis(tau, order);
        for (k, bk) in b.iter().enumerate().skip(order) {
            self.c[(NCOEF * piece + k, 0)] += g.x * bk;
            self.c[(NCOEF * piece + k, 1)] += g.y * bk;
        }
    }
}

/// Per-term cost values (already weighted).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostBreakdown {
    pub smooth: f64,
    pub corridor: f64,
    pub vel: f64,
    pub acc: f64,
    pub dist_lower: f64,
    pub dist_upper: f64,
    pub vis_desired: f64,
    pub vis_next: f64,
    /// Some stamp had the trajectory exactly on the target.
    pub zero_range: bool,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.smooth
            + self.corridor
            + self.vel
            + self.acc
            + self.dist_lower
            + self.dist_upper
            + self.vis_desired
            + self.vis_next
    }
}

/// `max(g, 0)^3` and its derivative.
#[inline]
fn cubic(g: f64) -> (f64, f64) {
    if g > 0.0 {
        (g * g * g, 3.0 * g * g)
    } else {
        (0.0, 0.0)
    }
}

/// Integral of squared jerk, in closed form per piece.
pub fn smoothness_cost(traj: &PiecewiseTrajectory, grad: &mut Gradient, weight: f64) -> f64 {
    let mut total = 0.0;
    for (i, &t) in traj.durations.iter().enumerate() {
        let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
        for dim in 0..2 {
            let c = |k: usize| traj.coeffs[(NCOEF * i + k, dim)];
            // jerk(s) = a + b s + e s^2
            let (a, b, e) = (6.0 * c(3), 24.0 * c(4), 60.0 * c(5));
            total += a * a * t + a * b * t2 + (b * b + 2.0 * a * e) * t3 / 3.0 + b * e * t4 / 2.0 + e * e * t5 / 5.0;
            let da = 2.0 * a * t + b * t2 + 2.0 * e * t3 / 3.0;
            let db = a * t2 + 2.0 * b * t3 / 3.0 + e * t4 / 2.0;
            let de = 2.0 * a * t3 / 3.0 + b * t4 / 2.0 + 2.0 * e * t5 / 5.0;
            grad.c[(NCOEF * i + 3, dim)] += weight * 6.0 * da;
            grad.c[(NCOEF * i + 4, dim)] += weight * 24.0 * db;
            grad.c[(NCOEF * i + 5, dim)] += weight * 60.0 * de;
            let j = a + b * t + e * t2;
            grad.t[i] += weight * j * j;
        }
    }
    weight * total
}

/// Weighted corridor, velocity, and acceleration penalties of one piece.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RelativeTerms {
    pub corridor: f64,
    pub vel: f64,
    pub acc: f64,
}

/// Trapezoidal quadrature of the corridor and dynamics penalties over piece `i`.
#[allow(clippy::too_many_arguments)]
pub fn relative_penalty(
    traj: &PiecewiseTrajectory,
    i: usize,
    polytope: &Polytope,
    v_max: f64,
    a_max: f64,
    kappa: usize,
    weights: &PenaltyWeights,
    grad: &mut Gradient,
) -> RelativeTerms {
    let t = traj.durations[i];
    let step = t / kappa as f64;
    let mut out = RelativeTerms::default();
    let mut dt_sum = 0.0;
    for j in 0..=kappa {
        let omega = if j == 0 || j == kappa { 0.5 } else { 1.0 };
        let frac = j as f64 / kappa as f64;
        let tau = frac * t;
        let p = traj.eval_piece(i, tau, 0);
        let v = traj.eval_piece(i, tau, 1);
        let a = traj.eval_piece(i, tau, 2);
        let jk = traj.eval_piece(i, tau, 3);
        let scale = step * omega;

        if weights.corridor > 0.0 {
            for (n, b) in polytope.normals.iter().zip(&polytope.offsets) {
                let (f, df) = cubic(n.dot(&p) - b);
                if f > 0.0 {
                    let w = weights.corridor * scale;
                    out.corridor += w * f;
                    grad.add_point(i, tau, 0, n * (w * df));
                    // d/dT: the step factor, then the sample time moving with T.
                    dt_sum += weights.corridor * omega * f / kappa as f64 + w * df * n.dot(&v) * frac;
                }
            }
        }
        if weights.vel > 0.0 {
            let (f, df) = cubic(v.norm_squared() - v_max * v_max);
            if f > 0.0 {
                let w = weights.vel * scale;
                out.vel += w * f;
                grad.add_point(i, tau, 1, v * (2.0 * w * df));
                dt_sum += weights.vel * omega * f / kappa as f64 + w * df * 2.0 * v.dot(&a) * frac;
            }
        }
        if weights.acc > 0.0 {
            let (f, df) = cubic(a.norm_squared() - a_max * a_max);
            if f > 0.0 {
                let w = weights.acc * scale;
                out.acc += w * f;
                grad.add_point(i, tau, 2, a * (2.0 * w * df));
                dt_sum += weights.acc * omega * f / kappa as f64 + w * df * 2.0 * a.dot(&jk) * frac;
            }
        }
    }
    grad.t[i] += dt_sum;
    out
}

/// Weighted distance and visibility penalties at the absolute stamps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AbsoluteTerms {
    pub dist_lower: f64,
    pub dist_upper: f64,
    pub vis_desired: f64,
    pub vis_next: f64,
    pub zero_range: bool,
}

/// `cos(half_angle) - cos(angle(p - apex, axis))` and its gradient in `p`.
fn visibility_constraint(p: Vec2, s: &Sector) -> Option<(f64, Vec2)> {
    let d = p - s.apex;
    let r = d.norm();
    if r < 1e-9 {
        return None;
    }
    let u = d / r;
    let cosang = u.dot(&s.axis);
    let g = s.half_angle.cos() - cosang;
    let dg = -(s.axis - u * cosang) / r;
    Some((g, dg))
}

pub fn absolute_penalty(traj: &PiecewiseTrajectory, prob: &OptProblem, grad: &mut Gradient) -> Result<AbsoluteTerms> {
    let mut out = AbsoluteTerms::default();
    let w = &prob.weights;
    let r_l = prob.d0 - prob.d_l;
    let r_u = prob.d0 + prob.d_u;
    let n = prob.stamps.len();
    for k in 0..n {
        let (j, tau) = locate_piece(&traj.durations, prob.stamps[k])?;
        let p = traj.eval_piece(j, tau, 0);
        let z = prob.targets[k];
        let d = p - z;
        let d2 = d.norm_squared();
        let mut gp = Vec2::zeros();

        if w.dist_lower > 0.0 {
            let (f, df) = cubic((r_l * r_l - d2) / (2.0 * r_l));
            out.dist_lower += w.dist_lower * f;
            gp += -d / r_l * (w.dist_lower * df);
        }
        if w.dist_upper > 0.0 {
            let (f, df) = cubic((d2 - r_u * r_u) / (2.0 * r_u));
            out.dist_upper += w.dist_upper * f;
            gp += d / r_u * (w.dist_upper * df);
        }
        if d2 < 1e-18 {
            out.zero_range = true;
        }
        if w.vis_desired > 0.0 {
            if let Some((g, dg)) = visibility_constraint(p, &prob.desired[k]) {
                let (f, df) = cubic(g);
                out.vis_desired += w.vis_desired * f;
                gp += dg * (w.vis_desired * df);
            }
        }
        if w.vis_next > 0.0 && k + 1 < n {
            if let Some((g, dg)) = visibility_constraint(p, &prob.visible[k + 1]) {
                let (f, df) = cubic(g);
                out.vis_next += w.vis_next * f;
                gp += dg * (w.vis_next * df);
            }
        }
        if gp != Vec2::zeros() {
            grad.add_point(j, tau, 0, gp);
            // The local time is t_k minus earlier durations.
            let shift = -gp.dot(&traj.eval_piece(j, tau, 1));
            for gt in grad.t.iter_mut().take(j) {
                *gt += shift;
            }
        }
    }
    Ok(out)
}

/// Total cost of a trajectory with gradients in `(c, T)`.
pub fn evaluate(traj: &PiecewiseTrajectory, prob: &OptProblem) -> Result<(CostBreakdown, Gradient)> {
    let m = traj.pieces();
    let mut grad = Gradient::zeros(m);
    let mut cost = CostBreakdown { smooth: smoothness_cost(traj, &mut grad, prob.weights.smooth), ..Default::default() };
    for i in 0..m {
        let poly = &prob.corridors[(i / prob.k_pieces).min(prob.corridors.len() - 1)];
        let r = relative_penalty(traj, i, poly, prob.v_max, prob.a_max, prob.kappa, &prob.weights, &mut grad);
        cost.corridor += r.corridor;
        cost.vel += r.vel;
        cost.acc += r.acc;
    }
    let a = absolute_penalty(traj, prob, &mut grad)?;
    cost.dist_lower = a.dist_lower;
    cost.dist_upper = a.dist_upper;
    cost.vis_desired = a.vis_desired;
    cost.vis_next = a.vis_next;
    cost.zero_range = a.zero_range;
    Ok((cost, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajopt::minco::{Boundary, EndState, Minco};

    fn line(v: Vec2, t: f64) -> PiecewiseTrajectory {
        let start = EndState { pos: Vec2::zeros(), vel: v, acc: Vec2::zeros() };
        let end = EndState { pos: v * t, vel: v, acc: Vec2::zeros() };
        Minco::construct(&[v * (t / 2.0)], &[t / 2.0, t / 2.0], Boundary { start, end }).unwrap().traj
    }

    #[test]
    fn straight_line_has_no_jerk() {
        let traj = line(Vec2::new(1.0, 0.5), 2.0);
        let mut g = Gradient::zeros(2);
        assert!(smoothness_cost(&traj, &mut g, 1.0).abs() < 1e-18);
    }

    #[test]
    fn constant_overspeed_closed_form() {
        let v_max = 3.0;
        let traj = line(Vec2::new(2.0 * v_max, 0.0), 1.0);
        let poly = Polytope::from_box(Vec2::new(-100.0, -100.0), Vec2::new(100.0, 100.0));
        let w = PenaltyWeights { vel: 1.0, ..PenaltyWeights::smooth_only() };
        let mut g = Gradient::zeros(2);
        let r = relative_penalty(&traj, 0, &poly, v_max, 100.0, 16, &w, &mut g);
        let expect = 0.5 * (3.0 * v_max * v_max).powi(3);
        assert!((r.vel - expect).abs() < 1e-9 * expect, "{} vs {}", r.vel, expect);
    }

    #[test]
    fn inside_limits_has_zero_penalty_and_gradient() {
        let traj = line(Vec2::new(1.0, 0.0), 2.0);
        let poly = Polytope::from_box(Vec2::new(-1.0, -1.0), Vec2::new(5.0, 1.0));
        let mut g = Gradient::zeros(2);
        let r = relative_penalty(&traj, 1, &poly, 3.0, 5.0, 16, &PenaltyWeights::default(), &mut g);
        assert_eq!(r, RelativeTerms::default());
        assert!(g.c.iter().all(|x| *x == 0.0) && g.t.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn dec_lower_tolerance_examples() {
        assert_eq!(dec_lower_tolerance(0.4, 0.0), 0.4);
        assert_eq!(dec_lower_tolerance(0.4, 1.0), 0.0);
        assert!((dec_lower_tolerance(0.4, 0.5) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn on_axis_at_d0_is_free() {
        let z = Vec2::new(3.0, 0.0);
        let sector = Sector { apex: z, axis: Vec2::new(-1.0, 0.0), half_angle: 0.1, radius: 2.4 };
        // Constant trajectory sitting at d0 behind the target.
        let p = Vec2::new(1.0, 0.0);
        let traj = Minco::construct(&[], &[1.0], Boundary { start: EndState::at_rest(p), end: EndState::at_rest(p) })
            .unwrap()
            .traj;
        let prob = OptProblem {
            corridors: vec![Polytope::from_box(Vec2::new(-10.0, -10.0), Vec2::new(10.0, 10.0))],
            k_pieces: 2,
            v_max: 3.0,
            a_max: 5.0,
            kappa: 16,
            stamps: vec![0.5, 1.0],
            targets: vec![z, z],
            d0: 2.0,
            d_l: 0.4,
            d_u: 0.4,
            visible: vec![sector; 2],
            desired: vec![sector; 2],
            weights: PenaltyWeights::default(),
        };
        let mut g = Gradient::zeros(1);
        let a = absolute_penalty(&traj, &prob, &mut g).unwrap();
        assert_eq!(a, AbsoluteTerms::default());
    }
}
