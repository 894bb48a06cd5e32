//! Fitting the scaling-law surface to observations.
//!
//! The objective is a sum of Huber penalties on residuals (linear or log loss
//! space). It is minimized by basin hopping around a bounded quasi-Newton
//! local optimizer. The optimizer works on `(E, ln A, ln B, alpha, beta, gamma)`
//! because A and B span many decades, and on the objective divided by
//! `n * delta^2` so that stopping tolerances do not depend on the loss scale.

pub mod hop;
pub mod local;

use alloc::vec::Vec;

pub use hop::{basin_hop, basin_hop_with, HopOutcome, HopRecord, HopSchedule, TEMPERATURE};
pub use local::{local_minimize, LocalMinimum, LocalOptions};

use crate::law::{LawError, ScalingLawParams};
use crate::math::{abs, exp, ln};
use crate::records::{Observation, DEFAULT_BUCKET_TOLERANCE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid bounds [{lo}, {hi}] for parameter {index}")]
    InvalidBounds { index: usize, lo: f64, hi: f64 },
    #[error("start value {value} for parameter {index} lies outside its bounds")]
    StartOutOfBounds { index: usize, value: f64 },
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("objective is not finite at the start point")]
    NonFiniteStart,
    #[error("under-determined fit: {observations} training observations, need at least {required}")]
    UnderDetermined { observations: usize, required: usize },
    #[error("observation {index} has nonpositive value {value}; log-space fitting needs positive values")]
    NonpositiveObservation { index: usize, value: f64 },
    #[error("observation {index} is zero; relative error is undefined")]
    ZeroObservation { index: usize },
    #[error("no observations")]
    EmptyObservations,
    #[error("test index {0} is out of range")]
    SplitIndexOutOfRange(usize),
    #[error("train/test split leaves no training observations")]
    EmptyTrainSplit,
    #[error(transparent)]
    Law(#[from] LawError),
}

pub const PARAM_NAMES: [&str; 6] = ["E", "A", "B", "alpha", "beta", "gamma"];

/// Residual space for the Huber objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LossSpace {
    #[default]
    Linear,
    /// Residuals `ln(predicted) - ln(observed)`.
    Log,
}

/// How observations are divided into training and held-out sets.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Split {
    /// Hold out the observations in the largest compute bucket.
    #[default]
    HoldOutLargestCompute,
    /// Hold out this fraction of observations, largest compute first.
    Fraction(f64),
    /// Hold out exactly these indices.
    TestIndices(Vec<usize>),
    /// Train on everything.
    None,
}

/// Closed search intervals per parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ParamBounds {
    #[cfg_attr(feature = "serde", serde(rename = "E"))]
    pub e: (f64, f64),
    #[cfg_attr(feature = "serde", serde(rename = "A"))]
    pub a: (f64, f64),
    #[cfg_attr(feature = "serde", serde(rename = "B"))]
    pub b: (f64, f64),
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub gamma: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        ParamBounds {
            e: (0.0, 1.0),
            a: (1e-6, 1e4),
            b: (1e-6, 1e6),
            alpha: (0.05, 2.0),
            beta: (0.05, 2.0),
            gamma: (0.1, 2.0),
        }
    }
}

impl ParamBounds {
    fn as_array(&self) -> [(f64, f64); 6] {
        [self.e, self.a, self.b, self.alpha, self.beta, self.gamma]
    }

    /// Bounds in optimizer coordinates (A and B in natural log).
    pub fn internal(&self) -> [(f64, f64); 6] {
        let mut out = self.as_array();
        out[1] = (ln(self.a.0), ln(self.a.1));
        out[2] = (ln(self.b.0), ln(self.b.1));
        out
    }

    pub fn validate(&self) -> Result<(), FitError> {
        for (index, (lo, hi)) in self.as_array().into_iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(FitError::InvalidBounds { index, lo, hi });
            }
            let floor_ok = if index == 0 { lo >= 0.0 } else { lo > 0.0 };
            if !floor_ok {
                return Err(FitError::InvalidBounds { index, lo, hi });
            }
        }
        Ok(())
    }

    /// Clamps each coefficient into its interval. Undoes the last-ulp drift of
    /// `exp(ln A)` at a bound.
    pub fn clamp(&self, p: &ScalingLawParams) -> ScalingLawParams {
        let b = self.as_array();
        let v = p.to_array();
        ScalingLawParams::from_array(core::array::from_fn(|i| v[i].clamp(b[i].0, b[i].1)))
    }

    pub fn contains(&self, p: &ScalingLawParams) -> bool {
        self.as_array().iter().zip(p.to_array()).all(|(&(lo, hi), v)| v >= lo && v <= hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FitConfig {
    pub huber_delta: f64,
    pub bounds: ParamBounds,
    /// Basin-hopping iterations after the initial descent.
    pub hop_count: usize,
    /// Per-parameter perturbation half-width in optimizer coordinates
    /// (A and B in natural-log units). Defaults to 10% of each range.
    pub hop_step: Option<[f64; 6]>,
    pub rng_seed: u64,
    pub loss_space: LossSpace,
    pub split: Split,
    /// Explicit start point; otherwise the best point of [`multi_start_grid`].
    pub start: Option<ScalingLawParams>,
    pub grid_points_per_axis: usize,
    pub max_local_iters: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            huber_delta: 1e-3,
            bounds: ParamBounds::default(),
            hop_count: 2000,
            hop_step: None,
            rng_seed: 0,
            loss_space: LossSpace::Linear,
            split: Split::default(),
            start: None,
            grid_points_per_axis: 2,
            max_local_iters: 500,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.huber_delta > 0.0) || !self.huber_delta.is_finite() {
            return Err(FitError::InvalidConfig("huber_delta must be positive"));
        }
        self.bounds.validate()?;
        if let Some(steps) = &self.hop_step {
            if steps.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
                return Err(FitError::InvalidConfig("hop steps must be finite and nonnegative"));
            }
        }
        if self.grid_points_per_axis == 0 {
            return Err(FitError::InvalidConfig("grid_points_per_axis must be at least 1"));
        }
        if let Split::Fraction(f) = self.split {
            if !(f > 0.0 && f < 1.0) {
                return Err(FitError::InvalidConfig("split fraction must lie in (0, 1)"));
            }
        }
        if let Some(start) = &self.start {
            start.validate()?;
            if !self.bounds.contains(start) {
                return Err(FitError::InvalidConfig("start point lies outside bounds"));
            }
        }
        Ok(())
    }

    fn local_options(&self) -> LocalOptions {
        LocalOptions { max_iters: self.max_local_iters, ..LocalOptions::default() }
    }

    fn internal_steps(&self) -> [f64; 6] {
        self.hop_step.unwrap_or_else(|| default_steps(&self.bounds.internal()))
    }
}

pub(crate) fn default_steps<const K: usize>(bounds: &[(f64, f64); K]) -> [f64; K] {
    let mut out = [0.0; K];
    for (o, (lo, hi)) in out.iter_mut().zip(bounds) {
        *o = 0.1 * (hi - lo);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    pub params: ScalingLawParams,
    /// Huber objective over the training set at `params`.
    pub objective_value: f64,
    pub train_mre: f64,
    /// `None` when the split holds nothing out.
    pub test_mre: Option<f64>,
    /// Per parameter, in [`PARAM_NAMES`] order: within `1e-9 * range` of a
    /// bound in optimizer coordinates.
    pub at_bound: Vec<bool>,
    pub hop_trace: Vec<HopRecord>,
    pub test_indices: Vec<usize>,
}

impl FitResult {
    pub fn any_at_bound(&self) -> bool {
        self.at_bound.iter().any(|&b| b)
    }
}

/// Huber penalty: quadratic inside `delta`, linear outside.
pub fn huber(residual: f64, delta: f64) -> f64 {
    let r = abs(residual);
    if r <= delta {
        0.5 * r * r
    } else {
        delta * (r - 0.5 * delta)
    }
}

/// `ln N`, `ln D` and the residual target of one observation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Prepared {
    pub ln_n: f64,
    pub ln_d: f64,
    pub target: f64,
}

pub(crate) fn prepare(
    observations: &[Observation],
    space: LossSpace,
) -> Result<Vec<Prepared>, FitError> {
    observations
        .iter()
        .enumerate()
        .map(|(index, o)| {
            let target = match space {
                LossSpace::Linear => o.mean,
                LossSpace::Log if o.mean > 0.0 => ln(o.mean),
                LossSpace::Log => return Err(FitError::NonpositiveObservation { index, value: o.mean }),
            };
            if !(o.model_size > 0.0 && o.dataset_size > 0.0) {
                return Err(LawError::NonpositiveSize { n: o.model_size, d: o.dataset_size }.into());
            }
            Ok(Prepared { ln_n: ln(o.model_size), ln_d: ln(o.dataset_size), target })
        })
        .collect()
}

/// Law prediction from optimizer coordinates `(E, ln A, ln B, alpha, beta, gamma)`.
#[inline]
pub(crate) fn predict_internal(v: &[f64], ln_n: f64, ln_d: f64) -> f64 {
    let t1 = v[1] - v[3] * ln_n;
    let t2 = v[2] - v[4] * ln_d;
    let (hi, lo) = if t1 >= t2 { (t1, t2) } else { (t2, t1) };
    v[0] + exp(v[5] * (hi + libm::log1p(exp(lo - hi))))
}

pub(crate) fn residual(predicted: f64, target: f64, space: LossSpace) -> f64 {
    match space {
        LossSpace::Linear => predicted - target,
        // A nonpositive prediction has no logarithm; the objective becomes NaN
        // and the line search backs off.
        LossSpace::Log => ln(predicted) - target,
    }
}

pub(crate) fn to_internal(p: &ScalingLawParams) -> [f64; 6] {
    [p.e, ln(p.a), ln(p.b), p.alpha, p.beta, p.gamma]
}

pub(crate) fn from_internal(v: &[f64]) -> ScalingLawParams {
    ScalingLawParams { e: v[0], a: exp(v[1]), b: exp(v[2]), alpha: v[3], beta: v[4], gamma: v[5] }
}

fn internal_objective(v: &[f64], data: &[Prepared], delta: f64, space: LossSpace) -> f64 {
    data.iter()
        .map(|p| huber(residual(predict_internal(v, p.ln_n, p.ln_d), p.target, space), delta))
        .sum()
}

/// Sum of Huber penalties of `predicted - observed` over `observations`.
pub fn objective(
    params: &ScalingLawParams,
    observations: &[Observation],
    config: &FitConfig,
) -> Result<f64, FitError> {
    if observations.is_empty() {
        return Err(FitError::EmptyObservations);
    }
    let data = prepare(observations, config.loss_space)?;
    Ok(internal_objective(&to_internal(params), &data, config.huber_delta, config.loss_space))
}

/// Mean of `|predicted - observed| / |observed|`.
pub fn mre(params: &ScalingLawParams, observations: &[Observation]) -> Result<f64, FitError> {
    mean_relative_error(observations, |o| params.loss(o.model_size, o.dataset_size).map_err(Into::into))
}

pub(crate) fn mean_relative_error(
    observations: &[Observation],
    predict: impl Fn(&Observation) -> Result<f64, FitError>,
) -> Result<f64, FitError> {
    if observations.is_empty() {
        return Err(FitError::EmptyObservations);
    }
    let mut total = 0.0;
    for (index, o) in observations.iter().enumerate() {
        if o.mean == 0.0 {
            return Err(FitError::ZeroObservation { index });
        }
        total += abs(predict(o)? - o.mean) / abs(o.mean);
    }
    Ok(total / observations.len() as f64)
}

/// Lattice of start points: `k` cell centres per axis, log-spaced for A and B,
/// linear for the rest. Endpoints are never included. `E` varies slowest.
pub fn multi_start_grid(bounds: &ParamBounds, k: usize) -> Vec<ScalingLawParams> {
    let internal = bounds.internal();
    lattice(&internal, k).into_iter().map(|v| from_internal(&v)).collect()
}

pub(crate) fn lattice<const K: usize>(bounds: &[(f64, f64); K], k: usize) -> Vec<[f64; K]> {
    if k == 0 {
        return Vec::new();
    }
    let total = k.pow(K as u32);
    (0..total)
        .map(|mut idx| {
            let mut point = [0.0; K];
            for axis in (0..K).rev() {
                let i = idx % k;
                idx /= k;
                let (lo, hi) = bounds[axis];
                point[axis] = lo + (hi - lo) * (i as f64 + 0.5) / k as f64;
            }
            point
        })
        .collect()
}

/// Returns `(train, test)` index sets.
pub fn split_indices(
    observations: &[Observation],
    split: &Split,
) -> Result<(Vec<usize>, Vec<usize>), FitError> {
    let n = observations.len();
    let mut test: Vec<usize> = match split {
        Split::None => Vec::new(),
        Split::HoldOutLargestCompute => {
            let max_c = observations.iter().map(|o| o.compute).fold(f64::NEG_INFINITY, f64::max);
            (0..n)
                .filter(|&i| (max_c - observations[i].compute) / max_c <= DEFAULT_BUCKET_TOLERANCE)
                .collect()
        }
        Split::Fraction(f) => {
            let count = libm::ceil(f * n as f64) as usize;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                observations[b].compute.total_cmp(&observations[a].compute).then(a.cmp(&b))
            });
            order.truncate(count.min(n));
            order
        }
        Split::TestIndices(idx) => {
            if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
                return Err(FitError::SplitIndexOutOfRange(bad));
            }
            idx.clone()
        }
    };
    test.sort_unstable();
    test.dedup();
    let train: Vec<usize> = (0..n).filter(|i| test.binary_search(i).is_err()).collect();
    if train.is_empty() {
        return Err(FitError::EmptyTrainSplit);
    }
    Ok((train, test))
}

pub(crate) fn at_bound_flags(x: &[f64], bounds: &[(f64, f64)]) -> Vec<bool> {
    x.iter()
        .zip(bounds)
        .map(|(&v, &(lo, hi))| {
            let tol = 1e-9 * (hi - lo);
            v - lo <= tol || hi - v <= tol
        })
        .collect()
}

pub(crate) fn pick<T: Copy>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i]).collect()
}

/// Fits the scaling law by basin hopping; deterministic in `config.rng_seed`.
pub fn basin_hop_fit(observations: &[Observation], config: &FitConfig) -> Result<FitResult, FitError> {
    config.validate()?;
    if observations.is_empty() {
        return Err(FitError::EmptyObservations);
    }
    let (train_idx, test_idx) = split_indices(observations, &config.split)?;
    let required = PARAM_NAMES.len() + 1;
    if train_idx.len() < required {
        return Err(FitError::UnderDetermined { observations: train_idx.len(), required });
    }
    let train = pick(observations, &train_idx);
    let test = pick(observations, &test_idx);
    let data = prepare(&train, config.loss_space)?;

    let delta = config.huber_delta;
    let space = config.loss_space;
    let scale = train.len() as f64 * delta * delta;
    // E is optimized in units of the typical observed value, so finite
    // difference steps and hop sizes follow the data's scale.
    let e_unit = e_unit(&train);
    let scaled = |v: &[f64]| {
        let mut w = [0.0; 6];
        w.copy_from_slice(v);
        w[0] *= e_unit;
        internal_objective(&w, &data, delta, space) / scale
    };

    let mut bounds = config.bounds.internal();
    bounds[0] = (bounds[0].0 / e_unit, bounds[0].1 / e_unit);
    let start = match &config.start {
        Some(p) => {
            let mut v = to_internal(p);
            v[0] /= e_unit;
            v
        }
        None => best_start(&scaled, lattice(&bounds, config.grid_points_per_axis))?,
    };
    let mut steps = config.internal_steps();
    steps[0] /= e_unit;
    let schedule = HopSchedule {
        hops: config.hop_count,
        steps: &steps,
        seed: config.rng_seed,
        local: config.local_options(),
    };
    let outcome = basin_hop(scaled, &start, &bounds, &schedule)?;

    let mut best = outcome.best.x.clone();
    best[0] *= e_unit;
    let params = config.bounds.clamp(&from_internal(&best));
    let hop_trace = outcome
        .trace
        .into_iter()
        .map(|r| HopRecord { objective: r.objective * scale, best: r.best * scale, ..r })
        .collect();
    Ok(FitResult {
        params,
        objective_value: objective(&params, &train, config)?,
        train_mre: mre(&params, &train)?,
        test_mre: if test.is_empty() { None } else { Some(mre(&params, &test)?) },
        at_bound: at_bound_flags(&outcome.best.x, &bounds),
        hop_trace,
        test_indices: test_idx,
    })
}

/// Mean absolute observed value, or 1 when that is zero or not finite.
pub(crate) fn e_unit(observations: &[Observation]) -> f64 {
    let m = observations.iter().map(|o| abs(o.mean)).sum::<f64>() / observations.len() as f64;
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

/// Lowest-objective lattice point; ties keep the earliest.
pub(crate) fn best_start<const K: usize>(
    f: &impl Fn(&[f64]) -> f64,
    candidates: Vec<[f64; K]>,
) -> Result<[f64; K], FitError> {
    candidates
        .into_iter()
        .map(|c| (f(&c), c))
        .filter(|(v, _)| v.is_finite())
        .fold(None, |acc: Option<(f64, [f64; K])>, (v, c)| match acc {
            Some((bv, _)) if bv <= v => acc,
            _ => Some((v, c)),
        })
        .map(|(_, c)| c)
        .ok_or(FitError::NonFiniteStart)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn truth() -> ScalingLawParams {
        ScalingLawParams::new(0.8, 250.0, 3000.0, 0.42, 0.48, 0.8).unwrap()
    }

    fn synthetic(p: &ScalingLawParams) -> Vec<Observation> {
        let mut out = Vec::new();
        for i in 0..8 {
            for j in 0..5 {
                let n = 1e6 * libm::pow(10.0, 4.0 * i as f64 / 7.0);
                let d = 1e8 * libm::pow(10.0, 4.0 * j as f64 / 4.0);
                out.push(Observation::new(n, d, p.loss(n, d).unwrap()));
            }
        }
        out
    }

    #[test]
    fn huber_branches() {
        assert_eq!(huber(0.0, 1.0), 0.0);
        assert_eq!(huber(0.5, 0.5), 0.125);
        assert_eq!(huber(-0.5, 0.5), 0.125);
        assert_eq!(huber(3.0, 1.0), 2.5);
        // Continuity across the boundary.
        let d = 0.3;
        assert!((huber(d + 1e-12, d) - huber(d, d)).abs() < 1e-12);
    }

    #[test]
    fn objective_sums_huber_terms() {
        let p = truth();
        let delta = 0.01;
        let cfg = FitConfig { huber_delta: delta, ..FitConfig::default() };
        let obs = synthetic(&p);
        assert_eq!(objective(&p, &obs, &cfg).unwrap(), 0.0);

        let pred = |o: &Observation| p.loss(o.model_size, o.dataset_size).unwrap();
        let mut two = vec![obs[0], obs[1]];
        two[0].mean = pred(&two[0]) - delta;
        two[1].mean = pred(&two[1]) - 3.0 * delta;
        let v = objective(&p, &two, &cfg).unwrap();
        assert!((v - 3.0 * delta * delta).abs() < 1e-12, "{v}");

        let one = [two[1]];
        let single = objective(&p, &one, &cfg).unwrap();
        assert!((single - huber(3.0 * delta, delta)).abs() < 1e-12);
    }

    #[test]
    fn objective_log_space_rejects_nonpositive() {
        let cfg = FitConfig { loss_space: LossSpace::Log, ..FitConfig::default() };
        let obs = [Observation::new(1e6, 1e9, -0.5)];
        assert!(matches!(
            objective(&truth(), &obs, &cfg),
            Err(FitError::NonpositiveObservation { index: 0, .. })
        ));
    }

    #[test]
    fn mre_examples() {
        let p = truth();
        let mut obs = synthetic(&p);
        assert_eq!(mre(&p, &obs).unwrap(), 0.0);
        for o in obs.iter_mut() {
            o.mean /= 1.1;
        }
        assert!((mre(&p, &obs).unwrap() - 0.1).abs() < 1e-12);

        let zero = [Observation::new(1e6, 1e9, 0.0)];
        assert!(matches!(mre(&p, &zero), Err(FitError::ZeroObservation { index: 0 })));
    }

    #[test]
    fn mre_hand_mean() {
        let obs = [Observation::new(1.0, 1.0, 1.0), Observation::new(2.0, 2.0, 2.0)];
        let preds = [1.1, 1.8];
        let v = mean_relative_error(&obs, |o| Ok(if o.mean == 1.0 { preds[0] } else { preds[1] }))
            .unwrap();
        assert!((v - 0.1).abs() < 1e-15);
    }

    #[test]
    fn start_grid_shapes() {
        let b = ParamBounds::default();
        let one = multi_start_grid(&b, 1);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].e, 0.5);
        assert!((one[0].a - 0.1).abs() < 1e-12, "geometric midpoint of [1e-6, 1e4]");
        let grid = multi_start_grid(&b, 2);
        assert_eq!(grid.len(), 64);
        let lo = [b.e.0, b.a.0, b.b.0, b.alpha.0, b.beta.0, b.gamma.0];
        let hi = [b.e.1, b.a.1, b.b.1, b.alpha.1, b.beta.1, b.gamma.1];
        for p in multi_start_grid(&b, 3) {
            for ((v, l), h) in p.to_array().iter().zip(lo).zip(hi) {
                assert!(*v > l && *v < h);
            }
        }
        assert_eq!(multi_start_grid(&b, 2), grid);
    }

    #[test]
    fn splits() {
        let obs = synthetic(&truth());
        let (train, test) = split_indices(&obs, &Split::Fraction(0.2)).unwrap();
        assert_eq!(test.len(), 8);
        assert_eq!(train.len() + test.len(), obs.len());
        let min_test = test.iter().map(|&i| obs[i].compute).fold(f64::INFINITY, f64::min);
        assert!(train.iter().all(|&i| obs[i].compute <= min_test));

        let (_, test) = split_indices(&obs, &Split::HoldOutLargestCompute).unwrap();
        assert_eq!(test, vec![obs.len() - 1]);
        assert!(split_indices(&obs, &Split::TestIndices(vec![99])).is_err());
    }

    #[test]
    fn under_determined_fit_is_rejected() {
        let obs: Vec<_> = synthetic(&truth()).into_iter().take(6).collect();
        let cfg = FitConfig { split: Split::None, hop_count: 0, ..FitConfig::default() };
        assert!(matches!(
            basin_hop_fit(&obs, &cfg),
            Err(FitError::UnderDetermined { observations: 6, required: 7 })
        ));
    }

    #[test]
    fn noiseless_recovery() {
        let p = truth();
        let cfg = FitConfig {
            hop_count: 20,
            split: Split::Fraction(0.2),
            huber_delta: 1e-2,
            ..FitConfig::default()
        };
        let fit = basin_hop_fit(&synthetic(&p), &cfg).unwrap();
        for (got, want) in fit.params.to_array().iter().zip(p.to_array()) {
            assert!(((got - want) / want).abs() < 0.02, "{:?}", fit.params);
        }
        assert!(fit.test_mre.unwrap() < 1e-3);
        assert!(!fit.any_at_bound());
        let reeval = objective(&fit.params, &pick(&synthetic(&p), &(0..40).filter(|i| !fit.test_indices.contains(i)).collect::<Vec<_>>()), &cfg).unwrap();
        assert!((reeval - fit.objective_value).abs() <= 1e-12 * fit.objective_value.abs().max(1e-300));
    }

    #[test]
    fn zero_hops_equals_single_local_descent() {
        let p = truth();
        let start = ScalingLawParams::new(0.5, 100.0, 1000.0, 0.5, 0.5, 1.0).unwrap();
        let cfg = FitConfig {
            hop_count: 0,
            split: Split::None,
            start: Some(start),
            huber_delta: 1e-2,
            ..FitConfig::default()
        };
        let obs = synthetic(&p);
        let fit = basin_hop_fit(&obs, &cfg).unwrap();
        let data = prepare(&obs, LossSpace::Linear).unwrap();
        let scale = obs.len() as f64 * 1e-4;
        let unit = e_unit(&obs);
        let mut x0 = to_internal(&start);
        x0[0] /= unit;
        let mut bounds = cfg.bounds.internal();
        bounds[0] = (bounds[0].0 / unit, bounds[0].1 / unit);
        let local = local_minimize(
            |v: &[f64]| {
                let mut w = [0.0; 6];
                w.copy_from_slice(v);
                w[0] *= unit;
                internal_objective(&w, &data, 1e-2, LossSpace::Linear) / scale
            },
            &x0,
            &bounds,
            &LocalOptions::default(),
        )
        .unwrap();
        let mut x = local.x.clone();
        x[0] *= unit;
        assert_eq!(fit.params, cfg.bounds.clamp(&from_internal(&x)));
        assert_eq!(fit.hop_trace.len(), 1);
    }
}
