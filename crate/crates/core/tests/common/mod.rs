#![allow(dead_code)]

use proptest::prelude::*;
use scalefit_core::ScalingLawParams;

pub const CASES: u32 = 1000;

pub const DEVLOG_BUDGETS: [f64; 10] =
    [1e18, 3e18, 6e18, 1e19, 3e19, 6e19, 1e20, 3e20, 6e20, 1e21];

/// Reducible part `A N^-alpha + B D^-beta` raised to gamma, evaluated directly.
pub fn reducible(p: &ScalingLawParams, n: f64, d: f64) -> f64 {
    (p.a * n.powf(-p.alpha) + p.b * d.powf(-p.beta)).powf(p.gamma)
}

/// Laws whose reducible term is O(1e-3..1) for N in 1e6..1e10 and D in 1e8..1e12.
pub fn law() -> impl Strategy<Value = ScalingLawParams> {
    (0.0..1.0f64, 0.05..1.0f64, 0.05..1.0f64, 0.3..0.7f64, 0.3..0.7f64, 0.5..1.2f64).prop_map(
        |(e, a, b, alpha, beta, gamma)| {
            ScalingLawParams::new(
                e,
                a * 1e7f64.powf(alpha),
                b * 1e10f64.powf(beta),
                alpha,
                beta,
                gamma,
            )
            .unwrap()
        },
    )
}

/// Broad positive laws over several decades of every coefficient.
pub fn wide_law() -> impl Strategy<Value = ScalingLawParams> {
    (0.0..2.0f64, -2.0..4.0f64, -2.0..6.0f64, 0.1..1.0f64, 0.1..1.0f64, 0.3..1.5f64).prop_map(
        |(e, la, lb, alpha, beta, gamma)| {
            ScalingLawParams::new(e, 10f64.powf(la), 10f64.powf(lb), alpha, beta, gamma).unwrap()
        },
    )
}

pub fn log_uniform(lo_exp: f64, hi_exp: f64) -> impl Strategy<Value = f64> {
    (lo_exp..hi_exp).prop_map(|x| 10f64.powf(x))
}

/// `wide_law` with E replaced by `ratio` times the reducible loss at the
/// optimum of `compute`, so the optimum is resolvable in f64.
pub fn with_scaled_e(p: ScalingLawParams, compute: f64, ratio: f64) -> ScalingLawParams {
    let zero_e = ScalingLawParams { e: 0.0, ..p };
    let opt = zero_e.optimal_allocation(compute).unwrap();
    ScalingLawParams { e: ratio * opt.l_star, ..p }
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Laws inside the default fit bounds with reducible terms O(0.1..1) over the
/// synthetic grids.
pub fn fit_law() -> impl Strategy<Value = ScalingLawParams> {
    (0.2..1.0f64, 0.2..0.6f64, 0.2..1.0f64, 0.3..0.7f64, 0.3..0.7f64, 0.5..1.2f64).prop_map(
        |(e, a, b, alpha, beta, gamma)| {
            ScalingLawParams::new(
                e,
                a * 1e6f64.powf(alpha),
                b * 1e8f64.powf(beta),
                alpha,
                beta,
                gamma,
            )
            .unwrap()
        },
    )
}
