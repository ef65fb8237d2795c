//! Compact limited-memory BFGS with projection onto box constraints.
//!
//! Two-loop recursion over a bounded (s, y) history, Armijo backtracking
//! line search, and a history reset whenever the projection clips a step or
//! curvature degenerates. Deterministic for a given start point.

use std::collections::VecDeque;

const C1: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 40;
const CURVATURE_EPS: f64 = 1e-12;

pub struct LbfgsOptions {
    pub max_iters: usize,
    pub memory: usize,
    pub grad_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { max_iters: 200, memory: 10, grad_tol: 1e-10 }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimize `f` (value and gradient) starting from `x0`, projecting every
/// iterate through `project`. Returns the best point and value seen.
pub fn minimize(
    f: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    project: &dyn Fn(&mut [f64]),
    x0: &[f64],
    opts: &LbfgsOptions,
) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return (x, fx);
    }

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new(); // (s, y, 1/(y.s))

    for _ in 0..opts.max_iters {
        if inf_norm(&g) < opts.grad_tol {
            break;
        }

        // Two-loop recursion for d = -H g.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let scale = dot(s, y) / dot(y, y).max(CURVATURE_EPS);
            for di in d.iter_mut() {
                *di *= scale;
            }
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }

        let mut gd = dot(&g, &d);
        if gd >= 0.0 {
            // Not a descent direction; fall back to steepest descent.
            history.clear();
            d = g.iter().map(|v| -v).collect();
            gd = dot(&g, &d);
        }

        // Backtracking Armijo line search through the projection.
        let mut t = 1.0f64;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut xc: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            project(&mut xc);
            let (fc, gc) = f(&xc);
            let clipped = xc
                .iter()
                .zip(x.iter().zip(&d))
                .any(|(xc_i, (xi, di))| (xc_i - (xi + t * di)).abs() > 1e-14);
            let ok = if clipped {
                fc.is_finite() && fc < fx
            } else {
                fc.is_finite() && fc <= fx + C1 * t * gd
            };
            if ok {
                accepted = Some((xc, fc, gc, clipped));
                break;
            }
            t *= SHRINK;
        }
        let Some((xn, fn_, gn, clipped)) = accepted else {
            break; // no progress possible
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if clipped || sy <= CURVATURE_EPS {
            history.clear();
        } else {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let progress = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if progress.abs() < 1e-15 * (1.0 + fx.abs()) {
            break;
        }
    }
    (x, fx)
}
