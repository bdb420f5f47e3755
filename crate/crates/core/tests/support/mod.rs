//! Oracles and random instance generators shared by the integration tests.
//! The simulator's acceptance target includes this file too.

#![allow(dead_code)]

use itrack_core::corridor::Polytope;
use itrack_core::env::{OccupancyGrid, Sector};
use itrack_core::geom::{rotate, unit_from_heading};
use itrack_core::intention::Intention;
use itrack_core::nalgebra::{DMatrix, DVector};
use itrack_core::prediction::{heuristic, step_is_free, step_model, IntentionModelParams, PenaltyMatrix};
use itrack_core::trajopt::minco::NCOEF;
use itrack_core::trajopt::{cost_and_gradient, Boundary, EndState, OptProblem, PenaltyWeights};
use itrack_core::Vec2;
use rand::Rng;

fn rvec<R: Rng>(rng: &mut R, s: f64) -> Vec2 {
    Vec2::new(rng.gen_range(-s..=s), rng.gen_range(-s..=s))
}

// ---------------------------------------------------------------------------
// Minimum-jerk oracle: the dense KKT system of the constrained quadratic
// program, solved by full LU. Knows nothing about the banded construction.

/// Jerk-energy Hessian of one quintic piece of duration `t` (monomial basis).
fn jerk_hessian(t: f64) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(NCOEF, NCOEF);
    let a = |k: usize| (k * (k - 1) * (k - 2)) as f64;
    for j in 3..NCOEF {
        for k in 3..NCOEF {
            let p = (j + k - 5) as i32;
            h[(j, k)] = a(j) * a(k) * t.powi(p) / p as f64;
        }
    }
    h
}

fn deriv_row(t: f64, d: usize) -> [f64; NCOEF] {
    let mut out = [0.0; NCOEF];
    for k in d..NCOEF {
        let f: usize = (0..d).map(|m| k - m).product();
        out[k] = f as f64 * t.powi((k - d) as i32);
    }
    out
}

/// Coefficients (`6M x 2`) minimizing total squared jerk subject to the
/// boundary states, waypoint positions, and velocity/acceleration continuity.
pub fn dense_kkt_coefficients(q: &[Vec2], t: &[f64], bd: &Boundary) -> DMatrix<f64> {
    let m = t.len();
    let n = NCOEF * m;
    let n_con = 3 + 4 * (m - 1) + 3;
    let mut e = DMatrix::zeros(n_con, n);
    let mut f = DMatrix::zeros(n_con, 2);
    let mut r = 0;
    let set_f = |f: &mut DMatrix<f64>, r: usize, v: Vec2| {
        f[(r, 0)] = v.x;
        f[(r, 1)] = v.y;
    };
    let start = [bd.start.pos, bd.start.vel, bd.start.acc];
    for (d, v) in start.iter().enumerate() {
        let row = deriv_row(0.0, d);
        for k in 0..NCOEF {
            e[(r, k)] = row[k];
        }
        set_f(&mut f, r, *v);
        r += 1;
    }
    for i in 0..m - 1 {
        let end = deriv_row(t[i], 0);
        let zero = deriv_row(0.0, 0);
        for k in 0..NCOEF {
            e[(r, NCOEF * i + k)] = end[k];
            e[(r + 1, NCOEF * (i + 1) + k)] = zero[k];
        }
        set_f(&mut f, r, q[i]);
        set_f(&mut f, r + 1, q[i]);
        r += 2;
        for d in 1..3 {
            let a = deriv_row(t[i], d);
            let b = deriv_row(0.0, d);
            for k in 0..NCOEF {
                e[(r, NCOEF * i + k)] = a[k];
                e[(r, NCOEF * (i + 1) + k)] = -b[k];
            }
            r += 1;
        }
    }
    let end = [bd.end.pos, bd.end.vel, bd.end.acc];
    for (d, v) in end.iter().enumerate() {
        let row = deriv_row(t[m - 1], d);
        for k in 0..NCOEF {
            e[(r, NCOEF * (m - 1) + k)] = row[k];
        }
        set_f(&mut f, r, *v);
        r += 1;
    }
    assert_eq!(r, n_con);

    let mut kkt = DMatrix::zeros(n + n_con, n + n_con);
    for i in 0..m {
        let h = jerk_hessian(t[i]);
        for j in 0..NCOEF {
            for k in 0..NCOEF {
                kkt[(NCOEF * i + j, NCOEF * i + k)] = 2.0 * h[(j, k)];
            }
        }
    }
    for a in 0..n_con {
        for b in 0..n {
            kkt[(n + a, b)] = e[(a, b)];
            kkt[(b, n + a)] = e[(a, b)];
        }
    }
    let mut rhs = DMatrix::zeros(n + n_con, 2);
    for a in 0..n_con {
        rhs[(n + a, 0)] = f[(a, 0)];
        rhs[(n + a, 1)] = f[(a, 1)];
    }
    let sol = kkt.lu().solve(&rhs).expect("KKT system is nonsingular");
    sol.rows(0, n).into_owned()
}

/// Random well-posed trajectory instance with `m` pieces.
pub fn random_minco_instance<R: Rng>(rng: &mut R, m: usize) -> (Vec<Vec2>, Vec<f64>, Boundary) {
    let t: Vec<f64> = (0..m).map(|_| rng.gen_range(0.3..=1.5)).collect();
    let mut p = Vec2::zeros();
    let mut q = Vec::with_capacity(m - 1);
    for _ in 0..m - 1 {
        p += rvec(rng, 1.5);
        q.push(p);
    }
    let start = EndState { pos: rvec(rng, 1.0), vel: rvec(rng, 1.5), acc: rvec(rng, 2.0) };
    let end = EndState { pos: p + rvec(rng, 1.5), vel: rvec(rng, 1.5), acc: rvec(rng, 2.0) };
    (q, t, Boundary { start, end })
}

// ---------------------------------------------------------------------------
// Gradient checks.

/// Weight vectors that switch on a single cost term each.
pub fn single_term_weights() -> Vec<(&'static str, PenaltyWeights)> {
    let z = PenaltyWeights { smooth: 0.0, ..PenaltyWeights::smooth_only() };
    vec![
        ("smooth", PenaltyWeights { smooth: 1.0, ..z }),
        ("corridor", PenaltyWeights { corridor: 1e4, ..z }),
        ("vel", PenaltyWeights { vel: 1e3, ..z }),
        ("acc", PenaltyWeights { acc: 1e3, ..z }),
        ("dist_lower", PenaltyWeights { dist_lower: 64.0, ..z }),
        ("dist_upper", PenaltyWeights { dist_upper: 64.0, ..z }),
        ("vis_desired", PenaltyWeights { vis_desired: 32.0, ..z }),
        ("vis_next", PenaltyWeights { vis_next: 32.0, ..z }),
    ]
}

/// A random optimization instance whose penalties are partly active: tight
/// boxes, low limits, and targets placed off the desired ring and sectors.
pub struct GradInstance {
    pub q: Vec<Vec2>,
    pub t: Vec<f64>,
    pub boundary: Boundary,
    pub prob: OptProblem,
}

pub fn random_grad_instance<R: Rng>(rng: &mut R, m: usize) -> GradInstance {
    let (q, t, boundary) = random_minco_instance(rng, m);
    let k = 2;
    let total: f64 = t.iter().sum();
    let traj = itrack_core::trajopt::Minco::construct(&q, &t, boundary).unwrap().traj;
    let n_poly = m.div_ceil(k);
    let corridors = (0..n_poly)
        .map(|j| {
            let piece = (j * k).min(m - 1);
            let c = traj.eval_piece(piece, t[piece] / 2.0, 0);
            let half = Vec2::new(rng.gen_range(0.2..=1.2), rng.gen_range(0.2..=1.2));
            Polytope::from_box(c - half, c + half)
        })
        .collect();
    let n_p = rng.gen_range(2..=8);
    let mut stamps: Vec<f64> = (0..n_p).map(|_| rng.gen_range(0.05..=0.95) * total).collect();
    stamps.sort_by(f64::total_cmp);
    let d0 = 2.0;
    let mut targets = Vec::new();
    let mut visible = Vec::new();
    let mut desired = Vec::new();
    for &s in &stamps {
        let p = traj.eval_clamped(s, 0);
        let z = p + unit_from_heading(rng.gen_range(-3.1..=3.1)) * rng.gen_range(1.0..=3.0);
        let axis = rotate((p - z).normalize(), rng.gen_range(-1.5..=1.5));
        let half = rng.gen_range(0.2..=1.2);
        let v = Sector { apex: z, axis, half_angle: half, radius: 2.4 };
        let shrink = rng.gen_range(0.0..half);
        let d = Sector { apex: z, axis: rotate(axis, rng.gen_range(-0.5..=0.5) * shrink), half_angle: half - shrink, radius: 2.4 };
        targets.push(z);
        visible.push(v);
        desired.push(d);
    }
    let prob = OptProblem {
        corridors,
        k_pieces: k,
        v_max: rng.gen_range(0.5..=3.0),
        a_max: rng.gen_range(0.5..=5.0),
        kappa: 16,
        stamps,
        targets,
        d0,
        d_l: rng.gen_range(0.05..=0.4),
        d_u: rng.gen_range(0.05..=0.4),
        visible,
        desired,
        weights: PenaltyWeights::default(),
    };
    GradInstance { q, t, boundary, prob }
}

/// Worst relative error of the analytic gradient against central finite
/// differences, as `|g_a - g_fd|_inf / |g_fd|_inf`, for waypoints and
/// durations together. `None` when the cost is flat (term inactive).
pub fn gradient_error(inst: &GradInstance, weights: PenaltyWeights) -> Option<f64> {
    let prob = OptProblem { weights, ..inst.prob.clone() };
    let cost = |q: &[Vec2], t: &[f64]| cost_and_gradient(q, t, inst.boundary, &prob).unwrap().1.total();
    let (_, _, gq, gt) = cost_and_gradient(&inst.q, &inst.t, inst.boundary, &prob).unwrap();
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for i in 0..inst.q.len() {
        for c in 0..2 {
            let h = 1e-6 * inst.q[i][c].abs().max(1.0);
            let mut qp = inst.q.clone();
            let mut qm = inst.q.clone();
            qp[i][c] += h;
            qm[i][c] -= h;
            numeric.push((cost(&qp, &inst.t) - cost(&qm, &inst.t)) / (2.0 * h));
            analytic.push(gq[i][c]);
        }
    }
    for i in 0..inst.t.len() {
        let h = 1e-7 * inst.t[i];
        let mut tp = inst.t.clone();
        let mut tm = inst.t.clone();
        tp[i] += h;
        tm[i] -= h;
        numeric.push((cost(&inst.q, &tp) - cost(&inst.q, &tm)) / (2.0 * h));
        analytic.push(gt[i]);
    }
    let scale = numeric.iter().chain(&analytic).fold(0.0f64, |a, x| a.max(x.abs()));
    if scale < 1e-9 {
        return None;
    }
    let err = analytic.iter().zip(&numeric).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    Some(err / scale)
}

// ---------------------------------------------------------------------------
// Search oracle: enumerate every primitive sequence of full depth.

/// Minimal-cost sequence by brute force, ties to the lexicographically
/// smallest primitive-index sequence. Returns `(cost, node positions)`.
pub fn enumerate_best(
    p0: Vec2,
    v0: Vec2,
    i0: Intention,
    map: &OccupancyGrid,
    params: &IntentionModelParams,
    pen: &PenaltyMatrix,
) -> Option<(f64, Vec<Vec2>)> {
    let prims = params.primitives();
    let depth = params.depth();
    let goal = p0 + v0 * params.horizon;
    let mut best: Option<(f64, Vec<usize>, Vec<Vec2>)> = None;
    let total = prims.len().pow(depth as u32);
    'seq: for code in 0..total {
        // Most significant digit first, so numeric order is lexicographic order.
        let seq: Vec<usize> = (0..depth).rev().map(|d| (code / prims.len().pow(d as u32)) % prims.len()).collect();
        let (mut p, mut v, mut intent, mut g) = (p0, v0, i0, 0.0);
        let mut pts = Vec::with_capacity(depth);
        for &k in &seq {
            let prim = prims[k];
            let (np, nv) = step_model(p, v, prim.intention, params.dt_exp, prim.param).unwrap();
            if nv.norm() > params.speed_cap + 1e-9 || !step_is_free(map, p, np) {
                continue 'seq;
            }
            g += pen.get(intent, prim.intention);
            p = np;
            v = nv;
            intent = prim.intention;
            pts.push(p);
        }
        let c = g + heuristic(p, goal, params.w_h);
        let better = match &best {
            None => true,
            Some((bc, bs, _)) => c < *bc || (c == *bc && seq < *bs),
        };
        if better {
            best = Some((c, seq, pts));
        }
    }
    best.map(|(c, _, pts)| (c, pts))
}

/// Random 20 x 20 map at 0.25 m with scattered blocks and a free start cell.
pub fn random_small_map<R: Rng>(rng: &mut R) -> (OccupancyGrid, Vec2) {
    let mut map = OccupancyGrid::new(0.25, Vec2::zeros(), 20, 20, 0.0).unwrap();
    let blocks = rng.gen_range(3..=10);
    for _ in 0..blocks {
        let lo = Vec2::new(rng.gen_range(0.0..4.5), rng.gen_range(0.0..4.5));
        let size = Vec2::new(rng.gen_range(0.25..1.5), rng.gen_range(0.25..1.5));
        map.fill_box(lo, lo + size);
    }
    loop {
        let p = Vec2::new(rng.gen_range(1.0..4.0), rng.gen_range(1.0..4.0));
        if map.is_free(p) {
            return (map, p);
        }
    }
}

/// Model parameters with one primitive per intention and no closed set.
pub fn oracle_params(depth: usize) -> IntentionModelParams {
    IntentionModelParams {
        turn_rates: vec![1.2],
        decel_values: vec![-2.0],
        dt_exp: 0.25,
        horizon: 0.25 * depth as f64,
        n_samples: depth,
        heading_bucket: 0.0,
        ..IntentionModelParams::default()
    }
}

pub fn random_velocity<R: Rng>(rng: &mut R) -> Vec2 {
    unit_from_heading(rng.gen_range(-3.14..=3.14)) * rng.gen_range(0.5..=2.0)
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
