//! The parametric loss surface and its compute-optimal geometry.
//!
//! `L(N, D) = E + (A N^-alpha + B D^-beta)^gamma` under the compute constraint
//! `C = 6 N D`. Along an isoFLOP the outer power is monotone, so the frontier
//! is the argmin of the inner sum and has a closed form:
//!
//! ```text
//! N*(C) = G (C/6)^(beta/(alpha+beta)),   G = (alpha A / (beta B))^(1/(alpha+beta))
//! D*(C) = C / (6 N*(C))
//! r*(C) = D*/N* = (C/6)^((alpha-beta)/(alpha+beta)) G^-2
//! ```
//!
//! Everything is evaluated through logarithms of N and D so budgets near 1e30
//! do not overflow intermediate powers.

use alloc::vec::Vec;

use crate::math::{exp, ln};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum LawError {
    #[error("scaling-law parameter {name} = {value} is out of its domain")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("model size and dataset size must be positive (N={n}, D={d})")]
    NonpositiveSize { n: f64, d: f64 },
    #[error("compute budget must be positive, got {0}")]
    NonpositiveCompute(f64),
    #[error("target ratio must be positive, got {0}")]
    NonpositiveRatio(f64),
    #[error("ratio is compute-invariant (alpha == beta)")]
    RatioComputeInvariant,
    #[error("solution overflows f64 (target ratio {0})")]
    Overflow(f64),
    #[error("loss tolerance must be positive, got {0}")]
    NonpositiveEpsilon(f64),
}

/// Coefficients of `E + (A / N^alpha + B / D^beta)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingLawParams {
    /// Irreducible loss.
    #[cfg_attr(feature = "serde", serde(rename = "E"))]
    pub e: f64,
    #[cfg_attr(feature = "serde", serde(rename = "A"))]
    pub a: f64,
    #[cfg_attr(feature = "serde", serde(rename = "B"))]
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// A point on the compute-optimal frontier.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComputeOptimalPoint {
    pub compute: f64,
    pub n_star: f64,
    pub d_star: f64,
    /// Tokens per parameter, `D* / N*`.
    pub r_star: f64,
    pub l_star: f64,
}

/// The span of an isoFLOP whose loss stays within `epsilon` of the optimum.
///
/// `d1` pairs with the small-model root `n1`, so `d1 > d2`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlatnessReport {
    pub compute: f64,
    pub l_star: f64,
    pub epsilon: f64,
    pub n1: f64,
    pub n2: f64,
    pub delta_n: f64,
    pub d1: f64,
    pub d2: f64,
    pub delta_d: f64,
    pub kappa: f64,
    /// A root fell outside `[1, C/6]` and was clamped to the bound.
    pub truncated: bool,
}

/// Default loss tolerance for [`ScalingLawParams::flatness_range`].
pub const DEFAULT_FLATNESS_EPSILON: f64 = 1e-3;

/// Relative finite-difference step for the isoFLOP curvature.
const CURVATURE_STEP: f64 = 1e-4;

impl ScalingLawParams {
    pub fn new(e: f64, a: f64, b: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self, LawError> {
        let p = ScalingLawParams { e, a, b, alpha, beta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), LawError> {
        let bad = |name, value: f64| LawError::InvalidParameter { name, value };
        if !(self.e >= 0.0) || !self.e.is_finite() {
            return Err(bad("E", self.e));
        }
        for (name, value) in [
            ("A", self.a),
            ("B", self.b),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(bad(name, value));
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.e, self.a, self.b, self.alpha, self.beta, self.gamma]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        ScalingLawParams { e: v[0], a: v[1], b: v[2], alpha: v[3], beta: v[4], gamma: v[5] }
    }

    /// `L(N, D)`.
    pub fn loss(&self, n: f64, d: f64) -> Result<f64, LawError> {
        if !(n > 0.0 && d > 0.0) {
            return Err(LawError::NonpositiveSize { n, d });
        }
        Ok(self.loss_ln(ln(n), ln(d)))
    }

    /// `L` at `(exp(ln_n), exp(ln_d))`, no domain checks.
    pub fn loss_ln(&self, ln_n: f64, ln_d: f64) -> f64 {
        self.e + exp(self.gamma * self.ln_inner(ln_n, ln_d))
    }

    /// `ln(A N^-alpha + B D^-beta)` via log-sum-exp.
    fn ln_inner(&self, ln_n: f64, ln_d: f64) -> f64 {
        let t1 = ln(self.a) - self.alpha * ln_n;
        let t2 = ln(self.b) - self.beta * ln_d;
        let (hi, lo) = if t1 >= t2 { (t1, t2) } else { (t2, t1) };
        hi + libm::log1p(exp(lo - hi))
    }

    /// `ln G` with `G = (alpha A / (beta B))^(1/(alpha+beta))`.
    fn ln_frontier_scale(&self) -> f64 {
        (ln(self.alpha * self.a) - ln(self.beta * self.b)) / (self.alpha + self.beta)
    }

    /// Loss along the isoFLOP of budget `compute` at model size `n`.
    pub fn isoflop_loss(&self, compute: f64, n: f64) -> f64 {
        let ln_n = ln(n);
        self.loss_ln(ln_n, ln(compute / 6.0) - ln_n)
    }

    pub fn optimal_allocation(&self, compute: f64) -> Result<ComputeOptimalPoint, LawError> {
        if !(compute > 0.0) || !compute.is_finite() {
            return Err(LawError::NonpositiveCompute(compute));
        }
        let ln_half = ln(compute / 6.0);
        let ln_n = self.ln_frontier_scale() + self.beta / (self.alpha + self.beta) * ln_half;
        let n_star = exp(ln_n);
        let d_star = compute / (6.0 * n_star);
        Ok(ComputeOptimalPoint {
            compute,
            n_star,
            d_star,
            r_star: d_star / n_star,
            l_star: self.loss_ln(ln(n_star), ln(d_star)),
        })
    }

    /// `r*(C)` from its power law.
    pub fn optimal_ratio(&self, compute: f64) -> Result<f64, LawError> {
        if !(compute > 0.0) || !compute.is_finite() {
            return Err(LawError::NonpositiveCompute(compute));
        }
        let exponent = (self.alpha - self.beta) / (self.alpha + self.beta);
        Ok(exp(exponent * ln(compute / 6.0) - 2.0 * self.ln_frontier_scale()))
    }

    /// `(C, r*(C))` over a grid; decreasing in C iff `alpha < beta`.
    pub fn ratio_curve(&self, grid: &[f64]) -> Result<Vec<(f64, f64)>, LawError> {
        grid.iter().map(|&c| Ok((c, self.optimal_ratio(c)?))).collect()
    }

    /// Inverts the `r*(C)` power law: the budget at which the optimal
    /// tokens-per-parameter ratio equals `target_ratio`, with the frontier point there.
    pub fn solve_compute_for_ratio(&self, target_ratio: f64) -> Result<ComputeOptimalPoint, LawError> {
        if !(target_ratio > 0.0) || !target_ratio.is_finite() {
            return Err(LawError::NonpositiveRatio(target_ratio));
        }
        if self.alpha == self.beta {
            return Err(LawError::RatioComputeInvariant);
        }
        let ln_half = (ln(target_ratio) + 2.0 * self.ln_frontier_scale()) * (self.alpha + self.beta)
            / (self.alpha - self.beta);
        let compute = 6.0 * exp(ln_half);
        if !compute.is_finite() || compute <= 0.0 {
            return Err(LawError::Overflow(target_ratio));
        }
        self.optimal_allocation(compute)
    }

    /// Second derivative of `N -> L(N, C/(6N))` at `N*`, by a symmetric
    /// three-point stencil with step `1e-4 N*`.
    pub fn isoflop_curvature(&self, compute: f64) -> Result<f64, LawError> {
        let opt = self.optimal_allocation(compute)?;
        Ok(self.curvature_at(compute, opt.n_star, opt.l_star))
    }

    fn curvature_at(&self, compute: f64, n_star: f64, l_star: f64) -> f64 {
        let h = CURVATURE_STEP * n_star;
        let plus = self.isoflop_loss(compute, n_star + h);
        let minus = self.isoflop_loss(compute, n_star - h);
        (plus - 2.0 * l_star + minus) / (h * h)
    }

    /// Model and dataset size ranges whose isoFLOP loss stays within `epsilon`
    /// of the optimum, by bisection in `ln N` on each side of `N*` over
    /// `[1, C/6]`.
    pub fn flatness_range(&self, compute: f64, epsilon: f64) -> Result<FlatnessReport, LawError> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(LawError::NonpositiveEpsilon(epsilon));
        }
        let opt = self.optimal_allocation(compute)?;
        let level = opt.l_star + epsilon;
        let excess = |ln_n: f64| self.isoflop_loss(compute, exp(ln_n)) - level;

        let ln_star = ln(opt.n_star);
        let ln_max = ln(compute / 6.0);
        let (ln_n1, low_clamped) = bisect_level(&excess, 0.0_f64.min(ln_star), ln_star);
        let (ln_n2, high_clamped) = bisect_level(&excess, ln_max.max(ln_star), ln_star);

        let n1 = exp(ln_n1);
        let n2 = exp(ln_n2);
        let d1 = compute / (6.0 * n1);
        let d2 = compute / (6.0 * n2);
        Ok(FlatnessReport {
            compute,
            l_star: opt.l_star,
            epsilon,
            n1,
            n2,
            delta_n: n2 - n1,
            d1,
            d2,
            delta_d: crate::math::abs(d1 - d2),
            kappa: self.curvature_at(compute, opt.n_star, opt.l_star),
            truncated: low_clamped || high_clamped,
        })
    }
}

/// Finds the crossing of `excess` between `outer` (where it should be
/// positive) and `inner` (where it is negative). Returns the clamped `outer`
/// and `true` when the bracket does not contain a sign change.
fn bisect_level(excess: &impl Fn(f64) -> f64, outer: f64, inner: f64) -> (f64, bool) {
    if excess(outer) <= 0.0 {
        return (outer, true);
    }
    let (mut pos, mut neg) = (outer, inner);
    // ln-space width 1e-11 is a relative tolerance on N well below 1e-10.
    while crate::math::abs(pos - neg) > 1e-11 {
        let mid = 0.5 * (pos + neg);
        if mid == pos || mid == neg {
            break;
        }
        if excess(mid) > 0.0 {
            pos = mid;
        } else {
            neg = mid;
        }
    }
    // Report whichever endpoint sits closer to the level.
    if crate::math::abs(excess(pos)) <= crate::math::abs(excess(neg)) {
        (pos, false)
    } else {
        (neg, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEVLOG: ScalingLawParams = ScalingLawParams {
        e: 0.0055,
        a: 0.0612,
        b: 16.2179,
        alpha: 0.4226,
        beta: 0.5531,
        gamma: 0.6745,
    };

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn loss_matches_flatness_row_at_1e18() {
        let l = DEVLOG.loss(1.44e7, 1.16e10).unwrap();
        assert!(rel(l, 0.007486) < 0.02, "{l}");
    }

    #[test]
    fn loss_additive_form() {
        let p = ScalingLawParams::new(0.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((p.loss(2.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn loss_approaches_irreducible() {
        let l = DEVLOG.loss(1e200, 1e200).unwrap();
        assert!(l >= DEVLOG.e && l - DEVLOG.e < 1e-15);
    }

    #[test]
    fn loss_domain_errors() {
        assert!(matches!(DEVLOG.loss(0.0, 1.0), Err(LawError::NonpositiveSize { .. })));
        assert!(matches!(DEVLOG.loss(1.0, -3.0), Err(LawError::NonpositiveSize { .. })));
        assert!(ScalingLawParams::new(-0.1, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(ScalingLawParams::new(0.0, 1.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(ScalingLawParams::new(0.0, 1.0, f64::NAN, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn frontier_table_endpoints() {
        let p = DEVLOG.optimal_allocation(1e18).unwrap();
        assert!(rel(p.n_star, 1.44e7) < 0.01);
        assert!(rel(p.d_star, 1.16e10) < 0.01);
        assert!(rel(p.r_star, 801.0) < 0.01);
        let p = DEVLOG.optimal_allocation(1e21).unwrap();
        assert!(rel(p.n_star, 7.24e8) < 0.01);
        assert!(rel(p.d_star, 2.30e11) < 0.01);
        assert!(rel(p.r_star, 319.0) < 0.01);
        assert!(rel(6.0 * p.n_star * p.d_star, 1e21) <= 1e-12);
        assert_eq!(p.l_star, DEVLOG.loss_ln(ln(p.n_star), ln(p.d_star)));
    }

    #[test]
    fn symmetric_params_give_unit_ratio() {
        let p = ScalingLawParams::new(1.0, 5.0, 5.0, 0.4, 0.4, 0.8).unwrap();
        let opt = p.optimal_allocation(6e20).unwrap();
        assert!(rel(opt.n_star, 1e10) < 1e-12);
        assert!(rel(opt.r_star, 1.0) < 1e-12);
        assert!(matches!(p.solve_compute_for_ratio(20.0), Err(LawError::RatioComputeInvariant)));
    }

    #[test]
    fn ratio_direction_follows_exponents() {
        let curve = DEVLOG.ratio_curve(&[1e18, 1e20]).unwrap();
        assert!(rel(curve[0].1, 801.0) < 0.01 && rel(curve[1].1, 433.0) < 0.01);
        assert!(curve[1].1 < curve[0].1);

        let swapped = ScalingLawParams { alpha: DEVLOG.beta, beta: DEVLOG.alpha, ..DEVLOG };
        let curve = swapped.ratio_curve(&[1e18, 1e20]).unwrap();
        assert!(curve[1].1 > curve[0].1);

        let flat = ScalingLawParams { beta: DEVLOG.alpha, ..DEVLOG };
        let curve = flat.ratio_curve(&[1e18, 1e25]).unwrap();
        assert!(rel(curve[1].1, curve[0].1) < 1e-12);
    }

    #[test]
    fn ratio_target_twenty() {
        let sol = DEVLOG.solve_compute_for_ratio(20.0).unwrap();
        // Coefficients are printed to four decimals; N and D land within 1%.
        assert!(rel(sol.n_star, 8.9812e13) < 0.01);
        assert!(rel(sol.d_star, 1.7962e15) < 0.01);
        assert!(rel(sol.r_star, 20.0) < 1e-9);
        assert!(rel(sol.compute, 9.6794e29) < 0.02);
    }

    #[test]
    fn ratio_round_trip() {
        let r = DEVLOG.optimal_ratio(3.7e19).unwrap();
        let sol = DEVLOG.solve_compute_for_ratio(r).unwrap();
        assert!(rel(sol.compute, 3.7e19) < 1e-9);
    }

    #[test]
    fn curvature_table_endpoints() {
        assert!(rel(DEVLOG.isoflop_curvature(1e18).unwrap(), 1.54e-18) < 0.05);
        assert!(rel(DEVLOG.isoflop_curvature(1e21).unwrap(), 2.00e-22) < 0.05);
    }

    #[test]
    fn flatness_row_at_1e18() {
        let f = DEVLOG.flatness_range(1e18, 1e-3).unwrap();
        assert!(!f.truncated);
        assert!(rel(f.n1, 1.06e6) < 0.05);
        assert!(rel(f.n2, 1.54e8) < 0.05);
        assert!(rel(f.d1, 1.57e11) < 0.05);
        assert!(rel(f.d2, 1.08e9) < 0.05);
        let level = f.l_star + f.epsilon;
        assert!(rel(DEVLOG.isoflop_loss(1e18, f.n1), level) <= 1e-9);
        assert!(rel(DEVLOG.isoflop_loss(1e18, f.n2), level) <= 1e-9);
    }

    #[test]
    fn flatness_collapses_as_epsilon_vanishes() {
        let opt = DEVLOG.optimal_allocation(1e19).unwrap();
        let f = DEVLOG.flatness_range(1e19, 1e-15).unwrap();
        assert!(rel(f.n1, opt.n_star) < 1e-4);
        assert!(rel(f.n2, opt.n_star) < 1e-4);
        assert!(DEVLOG.flatness_range(1e19, 0.0).is_err());
    }

    #[test]
    fn flatness_widens_with_compute() {
        let small = DEVLOG.flatness_range(1e18, 1e-3).unwrap();
        let large = DEVLOG.flatness_range(1e21, 1e-3).unwrap();
        let growth = large.delta_n / small.delta_n;
        assert!(rel(growth, 3.66e10 / 1.53e8) < 0.05, "{growth}");
    }

    #[test]
    fn flatness_truncates_at_domain_edge() {
        // A huge tolerance puts both crossings outside [1, C/6].
        let f = DEVLOG.flatness_range(1e18, 10.0).unwrap();
        assert!(f.truncated);
        assert_eq!(f.n1, 1.0);
        assert!(rel(f.n2, 1e18 / 6.0) < 1e-12);
    }
}
