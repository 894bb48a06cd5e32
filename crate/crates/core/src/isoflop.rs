//! IsoFLOP curves and the "expected isoFLOP behavior" checks: an interior
//! optimum on every budget and optima that improve as compute grows.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::law::ScalingLawParams;
use crate::math::abs;
use crate::records::{BaselineStats, ComputeBuckets, Direction};

/// Noise floor used when a point carries no seed spread.
pub const DEFAULT_ABS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IsoFlopError {
    #[error("ambiguous isoFLOP point: D={d} appears twice in budget {compute}")]
    AmbiguousPoint { compute: f64, d: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    pub n: f64,
    pub d: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IsoFlopCurve {
    pub compute: f64,
    /// Strictly ascending in `d`.
    pub points: Vec<CurvePoint>,
    pub metric: String,
    pub direction: Direction,
}

impl IsoFlopCurve {
    /// Best mean on the curve, direction-aware.
    pub fn best(&self) -> Option<&CurvePoint> {
        self.points.iter().fold(None, |acc: Option<&CurvePoint>, p| match acc {
            Some(b) if !self.direction.better(p.mean, b.mean) => Some(b),
            _ => Some(p),
        })
    }

    /// The same points ordered by model size.
    pub fn by_model_size(&self) -> Vec<CurvePoint> {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| a.n.total_cmp(&b.n));
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CurveShape {
    InteriorOptimum,
    Monotone,
    Flat,
    InsufficientPoints,
    /// Non-monotone with the optimum on an endpoint, or an interior optimum
    /// that does not clear the noise floor.
    Irregular,
}

/// One curve per non-empty budget, ascending in compute. Returns the budgets
/// that were skipped because their bucket was empty.
pub fn build_curves(
    buckets: &ComputeBuckets,
    metric: &str,
    direction: Direction,
) -> Result<(Vec<IsoFlopCurve>, Vec<f64>), IsoFlopError> {
    let mut curves = Vec::new();
    let mut skipped = Vec::new();
    for bucket in &buckets.buckets {
        if bucket.observations.is_empty() {
            skipped.push(bucket.budget);
            continue;
        }
        let mut points: Vec<CurvePoint> = bucket
            .observations
            .iter()
            .map(|o| CurvePoint { n: o.model_size, d: o.dataset_size, mean: o.mean, std: o.std })
            .collect();
        points.sort_by(|a, b| a.d.total_cmp(&b.d));
        if let Some(w) = points.windows(2).find(|w| w[0].d == w[1].d) {
            return Err(IsoFlopError::AmbiguousPoint { compute: bucket.budget, d: w[0].d });
        }
        curves.push(IsoFlopCurve { compute: bucket.budget, points, metric: metric.into(), direction });
    }
    curves.sort_by(|a, b| a.compute.total_cmp(&b.compute));
    Ok((curves, skipped))
}

/// Samples the loss surface along the isoFLOP of `compute` at the given model sizes.
pub fn sample_isoflop(params: &ScalingLawParams, compute: f64, model_sizes: &[f64]) -> IsoFlopCurve {
    let mut points: Vec<CurvePoint> = model_sizes
        .iter()
        .map(|&n| CurvePoint {
            n,
            d: compute / (6.0 * n),
            mean: params.isoflop_loss(compute, n),
            std: 0.0,
        })
        .collect();
    points.sort_by(|a, b| a.d.total_cmp(&b.d));
    IsoFlopCurve { compute, points, metric: "loss".into(), direction: Direction::LowerBetter }
}

pub fn classify_shape(curve: &IsoFlopCurve, abs_tol: f64) -> CurveShape {
    let mut pts = curve.points.clone();
    pts.sort_by(|a, b| a.d.total_cmp(&b.d));
    if pts.len() < 3 {
        return CurveShape::InsufficientPoints;
    }
    let variation: f64 = pts.windows(2).map(|w| abs(w[1].mean - w[0].mean)).sum();
    if variation <= abs_tol {
        return CurveShape::Flat;
    }

    let dir = curve.direction;
    let best = (1..pts.len()).fold(0, |b, i| if dir.better(pts[i].mean, pts[b].mean) { i } else { b });
    let last = pts.len() - 1;
    if best != 0 && best != last {
        let clears = |p: &CurvePoint| dir.shortfall(p.mean, pts[best].mean) > p.std.max(abs_tol);
        return if clears(&pts[0]) && clears(&pts[last]) {
            CurveShape::InteriorOptimum
        } else {
            CurveShape::Irregular
        };
    }
    let rising = pts.windows(2).all(|w| w[1].mean >= w[0].mean);
    let falling = pts.windows(2).all(|w| w[1].mean <= w[0].mean);
    if rising || falling {
        CurveShape::Monotone
    } else {
        CurveShape::Irregular
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BehaviorVerdict {
    /// `(C, shape)` per curve, ascending in C.
    pub shapes: Vec<(f64, CurveShape)>,
    /// Optima improve strictly from each budget to the next. Seed spread is
    /// not taken into account.
    pub cross_budget_monotone: bool,
    pub expected_behavior: bool,
    pub reasons: Vec<String>,
}

pub fn classify_behavior(curves: &[IsoFlopCurve], abs_tol: f64) -> BehaviorVerdict {
    let mut sorted: Vec<&IsoFlopCurve> = curves.iter().collect();
    sorted.sort_by(|a, b| a.compute.total_cmp(&b.compute));

    let mut reasons = Vec::new();
    let shapes: Vec<(f64, CurveShape)> =
        sorted.iter().map(|c| (c.compute, classify_shape(c, abs_tol))).collect();
    for &(c, shape) in &shapes {
        if shape != CurveShape::InteriorOptimum {
            reasons.push(format!("budget {c:e}: shape is {shape:?}, not an interior optimum"));
        }
    }

    let mut cross_budget_monotone = true;
    for pair in sorted.windows(2) {
        let (Some(lo), Some(hi)) = (pair[0].best(), pair[1].best()) else { continue };
        if !pair[1].direction.better(hi.mean, lo.mean) {
            cross_budget_monotone = false;
            reasons.push(format!(
                "budget {:e} optimum {} does not improve on budget {:e} optimum {}",
                pair[1].compute, hi.mean, pair[0].compute, lo.mean
            ));
        }
    }
    if sorted.is_empty() {
        reasons.push("no curves".into());
    }
    let all_interior = !shapes.is_empty() && shapes.iter().all(|(_, s)| *s == CurveShape::InteriorOptimum);
    BehaviorVerdict {
        expected_behavior: all_interior && cross_budget_monotone,
        shapes,
        cross_budget_monotone,
        reasons,
    }
}

/// Per budget, whether the best mean lies within one baseline standard deviation
/// of the baseline mean.
pub fn saturation(curves: &[IsoFlopCurve], baseline: &BaselineStats) -> Vec<(f64, bool)> {
    curves
        .iter()
        .map(|c| {
            let saturated = c.best().is_some_and(|b| abs(b.mean - baseline.mean) <= baseline.std);
            (c.compute, saturated)
        })
        .collect()
}
