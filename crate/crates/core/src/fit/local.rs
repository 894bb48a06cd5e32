//! Bounded limited-memory quasi-Newton minimization with numerical gradients.
//!
//! Variables sitting on a bound with the gradient pushing outward are frozen;
//! the L-BFGS two-loop recursion runs on the remaining free subspace and the
//! trial point is projected back onto the box before an Armijo backtracking
//! test.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::FitError;
use crate::math::abs;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptions {
    pub max_iters: usize,
    /// Convergence threshold on the infinity norm of the projected gradient.
    pub pgtol: f64,
    /// Stop when the relative decrease of one accepted step falls below this.
    pub ftol: f64,
    /// Relative central-difference step.
    pub grad_step: f64,
    /// Stored correction pairs.
    pub memory: usize,
}

impl Default for LocalOptions {
    fn default() -> Self {
        LocalOptions { max_iters: 500, pgtol: 1e-8, ftol: 1e-15, grad_step: 1e-7, memory: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMinimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// The projected-gradient test was met (as opposed to running out of
    /// iterations or stalling in the line search).
    pub converged: bool,
}

/// Minimizes `f` over the box `bounds` starting from `start`.
pub fn local_minimize<F>(
    f: F,
    start: &[f64],
    bounds: &[(f64, f64)],
    opts: &LocalOptions,
) -> Result<LocalMinimum, FitError>
where
    F: Fn(&[f64]) -> f64,
{
    check_box(start, bounds)?;
    let dim = start.len();
    let mut x = start.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(FitError::NonFiniteStart);
    }
    let mut g = gradient(&f, &x, bounds, opts.grad_step);
    let mut history: VecDeque<Correction> = VecDeque::with_capacity(opts.memory);
    let mut free = vec![true; dim];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if projected_gradient_norm(&x, &g, bounds) <= opts.pgtol {
            converged = true;
            break;
        }
        iterations += 1;

        for i in 0..dim {
            let (lo, hi) = bounds[i];
            free[i] = !((x[i] <= lo && g[i] > 0.0) || (x[i] >= hi && g[i] < 0.0));
        }
        let mut direction = two_loop(&g, &history, &free);
        if !(dot(&g, &direction) < 0.0) {
            history.clear();
            direction = steepest(&g, &free);
        }

        let mut step = if history.is_empty() {
            let norm = direction.iter().fold(0.0_f64, |m, v| m.max(abs(*v)));
            if norm > 1.0 { 1.0 / norm } else { 1.0 }
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            let trial = project(&x, &direction, step, bounds);
            if trial == x {
                break;
            }
            let ft = f(&trial);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if ft.is_finite() && ft <= fx + 1e-4 * dot(&g, &moved) {
                accepted = Some((trial, ft, moved));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, s)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };

        let g_new = gradient(&f, &x_new, bounds, opts.grad_step);
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > f64::EPSILON * dot(&y, &y) {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back(Correction { s, y });
        }

        let decrease = fx - f_new;
        let scale = abs(fx).max(abs(f_new));
        x = x_new;
        g = g_new;
        fx = f_new;
        if decrease <= opts.ftol * scale {
            converged = projected_gradient_norm(&x, &g, bounds) <= opts.pgtol;
            break;
        }
    }
    if !converged && iterations >= opts.max_iters {
        converged = projected_gradient_norm(&x, &g, bounds) <= opts.pgtol;
    }
    Ok(LocalMinimum { x, value: fx, iterations, converged })
}

pub(crate) fn check_box(point: &[f64], bounds: &[(f64, f64)]) -> Result<(), FitError> {
    if point.len() != bounds.len() {
        return Err(FitError::DimensionMismatch { expected: bounds.len(), got: point.len() });
    }
    for (i, (&v, &(lo, hi))) in point.iter().zip(bounds).enumerate() {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(FitError::InvalidBounds { index: i, lo, hi });
        }
        if !(v >= lo && v <= hi) {
            return Err(FitError::StartOutOfBounds { index: i, value: v });
        }
    }
    Ok(())
}

struct Correction {
    s: Vec<f64>,
    y: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn masked_dot(a: &[f64], b: &[f64], mask: &[bool]) -> f64 {
    a.iter().zip(b).zip(mask).filter(|(_, &m)| m).map(|((x, y), _)| x * y).sum()
}

fn steepest(g: &[f64], free: &[bool]) -> Vec<f64> {
    g.iter().zip(free).map(|(&gi, &m)| if m { -gi } else { 0.0 }).collect()
}

/// `-H g` on the free coordinates, with H the implicit inverse-Hessian estimate.
fn two_loop(g: &[f64], history: &VecDeque<Correction>, free: &[bool]) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().zip(free).map(|(&gi, &m)| if m { gi } else { 0.0 }).collect();
    let mut alphas = Vec::with_capacity(history.len());
    let mut gamma = 1.0;
    let mut usable = false;
    for c in history.iter().rev() {
        let sy = masked_dot(&c.s, &c.y, free);
        if !(sy > 0.0) {
            alphas.push(None);
            continue;
        }
        let rho = 1.0 / sy;
        let a = rho * masked_dot(&c.s, &q, free);
        for i in 0..q.len() {
            if free[i] {
                q[i] -= a * c.y[i];
            }
        }
        alphas.push(Some((a, rho)));
        if !usable {
            let yy = masked_dot(&c.y, &c.y, free);
            if yy > 0.0 {
                gamma = sy / yy;
            }
            usable = true;
        }
    }
    for v in q.iter_mut() {
        *v *= gamma;
    }
    for (c, a) in history.iter().zip(alphas.iter().rev()) {
        let Some((a, rho)) = *a else { continue };
        let b = rho * masked_dot(&c.y, &q, free);
        for i in 0..q.len() {
            if free[i] {
                q[i] += c.s[i] * (a - b);
            }
        }
    }
    q.iter().zip(free).map(|(&v, &m)| if m { -v } else { 0.0 }).collect()
}

fn project(x: &[f64], d: &[f64], step: f64, bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter()
        .zip(d)
        .zip(bounds)
        .map(|((&xi, &di), &(lo, hi))| (xi + step * di).clamp(lo, hi))
        .collect()
}

fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &[(f64, f64)]) -> f64 {
    x.iter()
        .zip(g)
        .zip(bounds)
        .map(|((&xi, &gi), &(lo, hi))| abs((xi - gi).clamp(lo, hi) - xi))
        .fold(0.0, f64::max)
}

/// Central differences with step `rel * max(|x|, 1)`, shifted one-sided at a bound.
pub(crate) fn gradient<F>(f: &F, x: &[f64], bounds: &[(f64, f64)], rel: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel * abs(x[i]).max(1.0);
            let (lo, hi) = bounds[i];
            let up = (x[i] + h).min(hi);
            let down = (x[i] - h).max(lo);
            probe[i] = up;
            let fu = f(&probe);
            probe[i] = down;
            let fd = f(&probe);
            probe[i] = x[i];
            (fu - fd) / (up - down)
        })
        .collect()
}
