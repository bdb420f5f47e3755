//! Minimum-jerk piecewise quintic trajectories parameterized by
//! intermediate waypoints and piece durations.
//!
//! For fixed boundary states, waypoints `q` and durations `T`, the
//! coefficients come from one banded linear system `A(T) c = b(q)`:
//! start/end position, velocity, and acceleration, waypoint positions, and
//! continuity of derivatives 0 through 4 at every junction. The same
//! factorization propagates cost gradients from `(c, T)` back to `(q, T)`.

use nalgebra::DMatrix;

use super::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Polynomial degree of each piece.
pub const DEGREE: usize = 5;
/// Coefficients per piece and dimension.
pub const NCOEF: usize = DEGREE + 1;

/// Position, velocity, and acceleration at one end of the trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndState {
    pub pos: Vec2,
    pub vel: Vec2,
    pub acc: Vec2,
}

impl EndState {
    pub fn at_rest(pos: Vec2) -> Self {
        Self { pos, vel: Vec2::zeros(), acc: Vec2::zeros() }
    }

    fn component(&self, d: usize) -> Vec2 {
        match d {
            0 => self.pos,
            1 => self.vel,
            _ => self.acc,
        }
    }

    fn is_finite(&self) -> bool {
        [self.pos, self.vel, self.acc].iter().all(|v| v.x.is_finite() && v.y.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    pub start: EndState,
    pub end: EndState,
}

/// `d`-th derivative of the monomial basis `[1, t, ..., t^5]` at `t`.
#[inline]
pub fn basis(t: f64, d: usize) -> [f64; NCOEF] {
    let mut out = [0.0; NCOEF];
    for (k, o) in out.iter_mut().enumerate().skip(d) {
        let mut f = 1.0;
        for m in 0..d {
            f *= (k - m) as f64;
        }
        *o = f * t.powi((k - d) as i32);
    }
    out
}

/// A solved trajectory: durations, coefficients (`6M x 2`, row `6i + k`
/// multiplies `t^k` on piece `i`), waypoints, and boundary.
#[derive(Debug, Clone)]
pub struct PiecewiseTrajectory {
    pub durations: Vec<f64>,
    pub coeffs: DMatrix<f64>,
    pub waypoints: Vec<Vec2>,
    pub boundary: Boundary,
}

impl PiecewiseTrajectory {
    pub fn pieces(&self) -> usize {
        self.durations.len()
    }

    pub fn total_duration(&self) -> f64 {
        self.durations.iter().sum()
    }

    /// Derivative of order `d` of piece `i` at local time `t`.
    pub fn eval_piece(&self, i: usize, t: f64, d: usize) -> Vec2 {
        eval_block(&self.coeffs, i, t, d)
    }

    /// Derivative of order `d` (0..=5) at global time `t in [0, sum T]`.
    /// Junctions belong to the earlier piece, except `t = 0`.
    pub fn eval(&self, t: f64, d: usize) -> Result<Vec2> {
        if d > DEGREE {
            return Err(Error::InvalidArgument(format!("derivative order {d} > {DEGREE}")));
        }
        if t == 0.0 {
            return Ok(self.eval_piece(0, 0.0, d));
        }
        let (j, tau) = locate_piece(&self.durations, t)?;
        Ok(self.eval_piece(j, tau, d))
    }

    /// Evaluation clamped to `[0, sum T]`; past the end it holds the final position.
    pub fn eval_clamped(&self, t: f64, d: usize) -> Vec2 {
        let total = self.total_duration();
        if t >= total {
            return if d == 0 { self.eval_piece(self.pieces() - 1, *self.durations.last().unwrap(), 0) } else { Vec2::zeros() };
        }
        self.eval(t.max(0.0), d).unwrap_or_else(|_| Vec2::zeros())
    }
}

#[inline]
pub(crate) fn eval_block(coeffs: &DMatrix<f64>, i: usize, t: f64, d: usize) -> Vec2 {
    let b = basis(t, d);
    let mut out = Vec2::zeros();
    for (k, bk) in b.iter().enumerate().skip(d) {
        out.x += coeffs[(NCOEF * i + k, 0)] * bk;
        out.y += coeffs[(NCOEF * i + k, 1)] * bk;
    }
    out
}

/// Zero-based index of the piece holding global time `t` and the local time
/// within it. A time on a junction belongs to the earlier piece.
pub fn locate_piece(durations: &[f64], t: f64) -> Result<(usize, f64)> {
    let total: f64 = durations.iter().sum();
    if !(t >= 0.0) || t > total * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::OutOfBounds(format!("time {t} outside [0, {total}]")));
    }
    let mut start = 0.0;
    for (j, &d) in durations.iter().enumerate() {
        let end = start + d;
        if t <= end || j + 1 == durations.len() {
            return Ok((j, (t - start).clamp(0.0, d)));
        }
        start = end;
    }
    Err(Error::InvalidArgument("no pieces".into()))
}

/// Factorized system for one `(q, T)` pair, kept around for gradient propagation.
#[derive(Debug, Clone)]
pub struct Minco {
    system: BandedMatrix,
    pub traj: PiecewiseTrajectory,
}

impl Minco {
    /// Builds and solves the coefficient system.
    pub fn construct(waypoints: &[Vec2], durations: &[f64], boundary: Boundary) -> Result<Self> {
        let m = durations.len();
        if m == 0 {
            return Err(Error::InvalidArgument("need at least one piece".into()));
        }
        if waypoints.len() + 1 != m {
            return Err(Error::InvalidArgument(format!(
                "{} pieces need {} intermediate waypoints, got {}",
                m,
                m - 1,
                waypoints.len()
            )));
        }
        if let Some(t) = durations.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("piece duration must be > 0, got {t}")));
        }
        if !boundary.start.is_finite() || !boundary.end.is_finite() {
            return Err(Error::InvalidArgument("non-finite boundary".into()));
        }
        if waypoints.iter().any(|q| !(q.x.is_finite() && q.y.is_finite())) {
            return Err(Error::InvalidArgument("non-finite waypoint".into()));
        }
        let n = NCOEF * m;
        let mut a = BandedMatrix::zeros(n, NCOEF, NCOEF);
        let mut b = DMatrix::zeros(n, 2);
        let put = |b: &mut DMatrix<f64>, r: usize, v: Vec2| {
            b[(r, 0)] = v.x;
            b[(r, 1)] = v.y;
        };

        for d in 0..3 {
            let row = basis(0.0, d);
            a.set(d, d, row[d]);
            put(&mut b, d, boundary.start.component(d));
        }
        for i in 0..m - 1 {
            let t = durations[i];
            let base = NCOEF * i;
            let next = base + NCOEF;
            // Jerk and snap continuity come first so elimination needs no pivoting.
            for (r, d) in [(3, 3), (4, 4)] {
                let row = basis(t, d);
                for k in d..NCOEF {
                    a.set(base + r, base + k, row[k]);
                }
                a.set(base + r, next + d, -basis(0.0, d)[d]);
            }
            let row = basis(t, 0);
            for k in 0..NCOEF {
                a.set(base + 5, base + k, row[k]);
            }
            put(&mut b, base + 5, waypoints[i]);
            for (r, d) in [(6, 0), (7, 1), (8, 2)] {
                let row = basis(t, d);
                for k in d..NCOEF {
                    a.set(base + r, base + k, row[k]);
                }
                a.set(base + r, next + d, -basis(0.0, d)[d]);
            }
        }
        let last = NCOEF * (m - 1);
        let t = durations[m - 1];
        for d in 0..3 {
            let row = basis(t, d);
            for k in d..NCOEF {
                a.set(n - 3 + d, last + k, row[k]);
            }
            put(&mut b, n - 3 + d, boundary.end.component(d));
        }

        a.factorize()?;
        a.solve(&mut b);
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular("non-finite coefficients".into()));
        }
        Ok(Self {
            system: a,
            traj: PiecewiseTrajectory {
                durations: durations.to_vec(),
                coeffs: b,
                waypoints: waypoints.to_vec(),
                boundary,
            },
        })
    }

    /// Maps `dJ/dc` and the explicit `dJ/dT` to `dJ/dq` and total `dJ/dT`.
    pub fn propagate_grad(&self, grad_c: &DMatrix<f64>, grad_t: &[f64]) -> (Vec<Vec2>, Vec<f64>) {
        let m = self.traj.pieces();
        let n = NCOEF * m;
        let mut adj = grad_c.clone();
        self.system.solve_transposed(&mut adj);

        let grad_q = (0..m - 1)
            .map(|i| {
                let r = NCOEF * i + 5;
                Vec2::new(adj[(r, 0)], adj[(r, 1)])
            })
            .collect();

        let mut out_t = grad_t.to_vec();
        let row_dot = |r: usize, v: Vec2| adj[(r, 0)] * v.x + adj[(r, 1)] * v.y;
        for (i, g) in out_t.iter_mut().enumerate() {
            let t = self.traj.durations[i];
            let dp = |d: usize| self.traj.eval_piece(i, t, d);
            // Each row evaluates piece i at its end; its T-derivative is one order higher.
            let rows: Vec<(usize, usize)> = if i + 1 < m {
                let base = NCOEF * i;
                vec![(base + 3, 4), (base + 4, 5), (base + 5, 1), (base + 6, 1), (base + 7, 2), (base + 8, 3)]
            } else {
                vec![(n - 3, 1), (n - 2, 2), (n - 1, 3)]
            };
            for (r, d) in rows {
                *g -= row_dot(r, dp(d));
            }
        }
        (grad_q, out_t)
    }
}
