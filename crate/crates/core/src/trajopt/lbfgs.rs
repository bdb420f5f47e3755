//! Limited-memory BFGS with Armijo backtracking.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsParams {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop once the gradient infinity norm falls below this.
    pub grad_tol: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    pub time_budget: Option<Duration>,
}

impl Default for LbfgsParams {
    fn default() -> Self {
        Self { memory: 8, max_iters: 100, grad_tol: 1e-5, armijo: 1e-4, max_backtracks: 40, time_budget: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    IterationCap,
    TimeBudget,
    /// No step along the search direction decreased the cost.
    LineSearch,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: DVector<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Vec<IterRecord>,
}

/// Minimizes `f`, which returns the cost and its gradient.
/// The returned cost never exceeds the cost at `x0`.
pub fn minimize<F>(mut f: F, x0: DVector<f64>, params: &LbfgsParams) -> Result<LbfgsResult>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let start = Instant::now();
    let (mut fx, mut g) = f(&x0)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost or gradient at the initial point".into()));
    }
    let mut x = x0;
    let mut hist: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::with_capacity(params.memory);
    let mut trace = vec![IterRecord { iter: 0, cost: fx, grad_norm: g.amax(), step: 0.0 }];
    let mut termination = Termination::IterationCap;
    let mut iterations = 0;

    for it in 1..=params.max_iters {
        if g.amax() < params.grad_tol {
            termination = Termination::Converged;
            break;
        }
        if params.time_budget.is_some_and(|b| start.elapsed() >= b) {
            termination = Termination::TimeBudget;
            break;
        }
        // Two-loop recursion.
        let mut d = -g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * s.dot(&d);
            d -= y * a;
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            d *= s.dot(y) / y.dot(y);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * y.dot(&d);
            d += s * (a - b);
        }
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            hist.clear();
            d = -g.clone();
            slope = -g.norm_squared();
        }

        let mut step = if hist.is_empty() { (1.0 / d.amax()).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..params.max_backtracks {
            let xn = &x + &d * step;
            if let Ok((fn_, gn)) = f(&xn) {
                if fn_.is_finite() && gn.iter().all(|v| v.is_finite()) && fn_ <= fx + params.armijo * step * slope {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            termination = Termination::LineSearch;
            break;
        };
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * y.norm_squared().max(1e-300) {
            if hist.len() == params.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fn_;
        g = gn;
        iterations = it;
        trace.push(IterRecord { iter: it, cost: fx, grad_norm: g.amax(), step });
        if it == params.max_iters && g.amax() < params.grad_tol {
            termination = Termination::Converged;
        }
    }
    Ok(LbfgsResult { x, cost: fx, iterations, termination, trace })
}
