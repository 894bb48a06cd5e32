//! Downstream metrics as a generalized sigmoid of the scaling-law loss.
//!
//! `M(N, D) = lo + (hi - lo) / (1 + exp(-k (L(N, D) - L0)))`. The sign of `k`
//! is free, so lower-better and higher-better metrics share one form. All ten
//! coefficients are fitted jointly ("fused"); a sequential fit (loss law
//! first, sigmoid second) is available as a warm start and as a reference.

use alloc::string::String;
use alloc::vec::Vec;

use crate::fit::{
    basin_hop, basin_hop_with, best_start, default_steps, lattice, mean_relative_error, pick, predict_internal,
    split_indices, to_internal, FitConfig, FitError, FitResult, HopRecord, HopSchedule,
    LocalOptions, Prepared,
};
use crate::law::{LawError, ScalingLawParams};
use crate::math::{abs, exp};
use crate::records::{BaselineStats, Direction, Observation};

pub const SIGMOID_PARAM_NAMES: [&str; 10] =
    ["lo", "hi", "k", "L0", "E", "A", "B", "alpha", "beta", "gamma"];

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SigmoidParams {
    /// Metric value as the loss goes to minus infinity when `k > 0`.
    pub lo: f64,
    pub hi: f64,
    /// Sharpness.
    pub k: f64,
    /// Midpoint, in loss units.
    #[cfg_attr(feature = "serde", serde(rename = "L0"))]
    pub midpoint: f64,
    pub law: ScalingLawParams,
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

fn sigmoid(lo: f64, hi: f64, k: f64, midpoint: f64, loss: f64) -> f64 {
    let z = k * (loss - midpoint);
    // Step from the nearer limit so rounding never leaves [lo, hi].
    if z <= 0.0 {
        lo + (hi - lo) * logistic(z)
    } else {
        hi - (hi - lo) * logistic(-z)
    }
}

impl SigmoidParams {
    /// `lo + (hi - lo) / (1 + exp(-k (loss - L0)))`.
    pub fn map(&self, loss: f64) -> f64 {
        sigmoid(self.lo, self.hi, self.k, self.midpoint, loss)
    }

    /// The metric predicted at `(N, D)` through the loss surface.
    pub fn metric(&self, n: f64, d: f64) -> Result<f64, LawError> {
        Ok(self.map(self.law.loss(n, d)?))
    }

    /// Metric value as N and D grow without bound.
    pub fn limit(&self) -> f64 {
        self.map(self.law.e)
    }

    /// `(C, M*(C))` with `M*` evaluated at the loss-optimal allocation. The
    /// sigmoid is monotone in the loss, so that allocation is also
    /// metric-optimal along the isoFLOP.
    pub fn optimal_metric_curve(&self, grid: &[f64]) -> Result<Vec<(f64, f64)>, LawError> {
        grid.iter()
            .map(|&c| {
                let opt = self.law.optimal_allocation(c)?;
                Ok((c, self.map(opt.l_star)))
            })
            .collect()
    }

    pub fn to_array(&self) -> [f64; 10] {
        let l = self.law.to_array();
        [self.lo, self.hi, self.k, self.midpoint, l[0], l[1], l[2], l[3], l[4], l[5]]
    }

    fn to_internal(&self) -> [f64; 10] {
        let l = to_internal(&self.law);
        [self.lo, self.hi, libm::asinh(self.k), self.midpoint, l[0], l[1], l[2], l[3], l[4], l[5]]
    }

    fn from_internal(v: &[f64]) -> Self {
        SigmoidParams {
            lo: v[0],
            hi: v[1],
            k: libm::sinh(v[2]),
            midpoint: v[3],
            law: crate::fit::from_internal(&v[4..10]),
        }
    }
}

/// Search intervals for the sigmoid coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SigmoidBounds {
    pub lo: (f64, f64),
    pub hi: (f64, f64),
    pub k: (f64, f64),
    #[cfg_attr(feature = "serde", serde(rename = "L0"))]
    pub midpoint: (f64, f64),
}

impl SigmoidBounds {
    /// Limits within one data range of the observed metric values, `|k| <= 1e4`,
    /// and the midpoint within `[0, 10 * max_loss]`.
    pub fn from_data(metric_values: &[f64], max_loss: f64) -> Self {
        let min = metric_values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = metric_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = (max - min).max(abs(max) * 1e-6).max(1e-12);
        let limits = (min - range, max + range);
        SigmoidBounds { lo: limits, hi: limits, k: (-1e4, 1e4), midpoint: (0.0, 10.0 * max_loss) }
    }

    /// Intervals in optimizer coordinates, where the sharpness is `asinh(k)`
    /// so that hops explore it on a roughly logarithmic scale.
    fn internal(&self) -> [(f64, f64); 4] {
        [self.lo, self.hi, (libm::asinh(self.k.0), libm::asinh(self.k.1)), self.midpoint]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FusedFit {
    pub params: SigmoidParams,
    /// Huber objective of metric residuals over the training set.
    pub objective_value: f64,
    pub train_mre: f64,
    pub test_mre: Option<f64>,
    /// In [`SIGMOID_PARAM_NAMES`] order.
    pub at_bound: Vec<bool>,
    pub hop_trace: Vec<HopRecord>,
    pub test_indices: Vec<usize>,
}

impl FusedFit {
    pub fn any_at_bound(&self) -> bool {
        self.at_bound.iter().any(|&b| b)
    }
}

fn prepare_metric(observations: &[Observation]) -> Result<Vec<Prepared>, FitError> {
    crate::fit::prepare(observations, crate::fit::LossSpace::Linear)
}

/// Sigmoid from optimizer coordinates `(lo, hi, asinh k, L0)`.
fn map_internal(v: &[f64], loss: f64) -> f64 {
    sigmoid(v[0], v[1], libm::sinh(v[2]), v[3], loss)
}

fn predict_fused(v: &[f64], ln_n: f64, ln_d: f64) -> f64 {
    map_internal(&v[..4], predict_internal(&v[4..10], ln_n, ln_d))
}

/// Sigmoid start from `(loss, metric)` pairs: limits at the metric values of
/// the lowest and highest loss, midpoint mid-range, and a sharpness spanning
/// about four logistic units across the observed losses.
fn sigmoid_guess(losses: &[f64], metrics: &[f64], bounds: &[(f64, f64); 4]) -> [f64; 4] {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]));
    let (first, last) = (order[0], order[order.len() - 1]);
    let spread = losses[last] - losses[first];
    let k = if spread > 0.0 { 4.0 / spread } else { 1.0 };
    let guess = [
        metrics[first],
        metrics[last],
        libm::asinh(k),
        0.5 * (losses[first] + losses[last]),
    ];
    clamp_into(guess, bounds)
}

fn fused_objective(v: &[f64], data: &[Prepared], delta: f64) -> f64 {
    data.iter().map(|p| crate::fit::huber(predict_fused(v, p.ln_n, p.ln_d) - p.target, delta)).sum()
}

/// Huber objective of metric residuals at `params`.
pub fn metric_objective(
    params: &SigmoidParams,
    observations: &[Observation],
    delta: f64,
) -> Result<f64, FitError> {
    if observations.is_empty() {
        return Err(FitError::EmptyObservations);
    }
    Ok(fused_objective(&params.to_internal(), &prepare_metric(observations)?, delta))
}

pub fn metric_mre(params: &SigmoidParams, observations: &[Observation]) -> Result<f64, FitError> {
    mean_relative_error(observations, |o| params.metric(o.model_size, o.dataset_size).map_err(Into::into))
}

fn fused_bounds(config: &FitConfig, sigmoid: &SigmoidBounds) -> Result<[(f64, f64); 10], FitError> {
    for (i, &(lo, hi)) in [sigmoid.lo, sigmoid.hi, sigmoid.k, sigmoid.midpoint].iter().enumerate() {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(FitError::InvalidBounds { index: i, lo, hi });
        }
    }
    let s = sigmoid.internal();
    let l = config.bounds.internal();
    Ok([s[0], s[1], s[2], s[3], l[0], l[1], l[2], l[3], l[4], l[5]])
}

/// Jointly fits all ten coefficients to metric observations.
///
/// Uses `config` for the Huber threshold, law bounds, hop schedule, seed and
/// split; `config.hop_step` and `config.start` are ignored in favour of 10% of
/// each range and `start`.
pub fn fused_fit(
    observations: &[Observation],
    config: &FitConfig,
    sigmoid_bounds: &SigmoidBounds,
    start: Option<&SigmoidParams>,
) -> Result<FusedFit, FitError> {
    config.validate()?;
    if observations.is_empty() {
        return Err(FitError::EmptyObservations);
    }
    let (train_idx, test_idx) = split_indices(observations, &config.split)?;
    let required = SIGMOID_PARAM_NAMES.len() + 1;
    if train_idx.len() < required {
        return Err(FitError::UnderDetermined { observations: train_idx.len(), required });
    }
    let train = pick(observations, &train_idx);
    let test = pick(observations, &test_idx);
    let data = prepare_metric(&train)?;
    let delta = config.huber_delta;
    let scale = train.len() as f64 * delta * delta;
    let scaled = |v: &[f64]| fused_objective(v, &data, delta) / scale;

    let bounds = fused_bounds(config, sigmoid_bounds)?;
    let sig_bounds: [(f64, f64); 4] = core::array::from_fn(|i| bounds[i]);
    let metrics: Vec<f64> = data.iter().map(|p| p.target).collect();
    // Sigmoid coefficients matched to the losses a law predicts on the training set.
    let guess_for = |law: &[f64]| {
        let losses: Vec<f64> = data.iter().map(|p| predict_internal(law, p.ln_n, p.ln_d)).collect();
        sigmoid_guess(&losses, &metrics, &sig_bounds)
    };
    let start = match start {
        Some(p) => clamp_into(p.to_internal(), &bounds),
        None => {
            let law_bounds: [(f64, f64); 6] = core::array::from_fn(|i| bounds[4 + i]);
            let candidates = lattice(&law_bounds, config.grid_points_per_axis)
                .into_iter()
                .map(|l| {
                    let g = guess_for(&l);
                    [g[0], g[1], g[2], g[3], l[0], l[1], l[2], l[3], l[4], l[5]]
                })
                .collect();
            best_start(&scaled, candidates)?
        }
    };
    let steps = default_steps(&bounds);
    let schedule = HopSchedule {
        hops: config.hop_count,
        steps: &steps,
        seed: config.rng_seed,
        local: LocalOptions { max_iters: config.max_local_iters, ..LocalOptions::default() },
    };
    // A perturbed law usually leaves the old sigmoid saturated, where the
    // objective is flat; every hop restarts the sigmoid from the data instead.
    let outcome = basin_hop_with(
        scaled,
        &start,
        &bounds,
        &schedule,
        |trial: &mut [f64]| {
            let g = guess_for(&trial[4..]);
            trial[..4].copy_from_slice(&g);
        },
    )?;
    let mut params = SigmoidParams::from_internal(&outcome.best.x);
    params.law = config.bounds.clamp(&params.law);
    Ok(FusedFit {
        params,
        objective_value: metric_objective(&params, &train, delta)?,
        train_mre: metric_mre(&params, &train)?,
        test_mre: if test.is_empty() { None } else { Some(metric_mre(&params, &test)?) },
        at_bound: crate::fit::at_bound_flags(&outcome.best.x, &bounds),
        hop_trace: outcome
            .trace
            .into_iter()
            .map(|r| HopRecord { objective: r.objective * scale, best: r.best * scale, ..r })
            .collect(),
        test_indices: test_idx,
    })
}

fn clamp_into<const K: usize>(mut v: [f64; K], bounds: &[(f64, f64); K]) -> [f64; K] {
    for (x, &(lo, hi)) in v.iter_mut().zip(bounds) {
        *x = x.clamp(lo, hi);
    }
    v
}

/// Result of the two-step reference fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialFit {
    pub loss_fit: FitResult,
    pub params: SigmoidParams,
    /// Metric objective over the metric training set.
    pub objective_value: f64,
}

/// Fits the law to loss observations, then the four sigmoid coefficients to
/// metric observations with the law held fixed.
pub fn sequential_fit(
    loss_observations: &[Observation],
    metric_observations: &[Observation],
    config: &FitConfig,
    sigmoid_bounds: &SigmoidBounds,
) -> Result<SequentialFit, FitError> {
    let loss_fit = crate::fit::basin_hop_fit(loss_observations, config)?;
    let law = loss_fit.params;

    let (train_idx, _) = split_indices(metric_observations, &config.split)?;
    let train = pick(metric_observations, &train_idx);
    if train.len() < 5 {
        return Err(FitError::UnderDetermined { observations: train.len(), required: 5 });
    }
    let data = prepare_metric(&train)?;
    let losses: Vec<f64> = data.iter().map(|p| law.loss_ln(p.ln_n, p.ln_d)).collect();
    let delta = config.huber_delta;
    let scale = train.len() as f64 * delta * delta;
    let objective = |v: &[f64]| {
        data.iter()
            .zip(&losses)
            .map(|(p, &l)| crate::fit::huber(map_internal(v, l) - p.target, delta))
            .sum::<f64>()
            / scale
    };
    let bounds = sigmoid_bounds.internal();
    let metrics: Vec<f64> = data.iter().map(|p| p.target).collect();
    let mut candidates = lattice(&bounds, config.grid_points_per_axis.max(3));
    candidates.insert(0, sigmoid_guess(&losses, &metrics, &bounds));
    let start = best_start(&objective, candidates)?;
    let steps = default_steps(&bounds);
    let schedule = HopSchedule {
        hops: config.hop_count,
        steps: &steps,
        seed: config.rng_seed,
        local: LocalOptions { max_iters: config.max_local_iters, ..LocalOptions::default() },
    };
    let outcome = basin_hop(objective, &start, &bounds, &schedule)?;
    let x = &outcome.best.x;
    let params = SigmoidParams { lo: x[0], hi: x[1], k: libm::sinh(x[2]), midpoint: x[3], law };
    Ok(SequentialFit {
        objective_value: metric_objective(&params, &train, delta)?,
        loss_fit,
        params,
    })
}

/// Relative difference per law coefficient between two fits, in
/// [`crate::fit::PARAM_NAMES`] order.
pub fn law_disagreement(a: &ScalingLawParams, b: &ScalingLawParams) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (o, (x, y)) in out.iter_mut().zip(a.to_array().into_iter().zip(b.to_array())) {
        let denom = abs(x).max(abs(y));
        *o = if denom == 0.0 { 0.0 } else { abs(x - y) / denom };
    }
    out
}

/// Whether the compute-unbounded metric reaches the real-data baseline band.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReachabilityVerdict {
    pub metric: String,
    pub cfg_label: String,
    /// `M` at `L = E`.
    pub m_limit: f64,
    pub baseline: BaselineStats,
    pub reachable: bool,
    /// `(C, M*(C))`.
    pub trace: Vec<(f64, f64)>,
}

/// Reachable iff the limit lies inside `mean ± std` or beyond it on the
/// favourable side.
pub fn reachability(
    params: &SigmoidParams,
    baseline: &BaselineStats,
    grid: &[f64],
    cfg_label: &str,
) -> Result<ReachabilityVerdict, LawError> {
    let m_limit = params.limit();
    let reachable = limit_reaches(m_limit, baseline);
    Ok(ReachabilityVerdict {
        metric: baseline.metric.clone(),
        cfg_label: cfg_label.into(),
        m_limit,
        baseline: baseline.clone(),
        reachable,
        trace: params.optimal_metric_curve(grid)?,
    })
}

fn limit_reaches(m_limit: f64, baseline: &BaselineStats) -> bool {
    match baseline.direction {
        Direction::LowerBetter => m_limit <= baseline.mean + baseline.std,
        Direction::HigherBetter => m_limit >= baseline.mean - baseline.std,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    fn law() -> ScalingLawParams {
        ScalingLawParams::new(0.8, 250.0, 3000.0, 0.42, 0.48, 0.8).unwrap()
    }

    fn sp(lo: f64, hi: f64, k: f64, midpoint: f64) -> SigmoidParams {
        SigmoidParams { lo, hi, k, midpoint, law: law() }
    }

    #[test]
    fn map_midpoint_flat_and_step() {
        let s = sp(0.2, 0.9, 4.0, 1.5);
        assert!((s.map(1.5) - 0.55).abs() < 1e-15);
        let flat = sp(0.2, 0.9, 0.0, 1.5);
        assert_eq!(flat.map(-100.0), 0.55);
        assert_eq!(flat.map(100.0), 0.55);
        let step = sp(0.2, 0.9, 1e300, 1.5);
        assert_eq!(step.map(1.4), 0.2);
        assert!((step.map(1.6) - 0.9).abs() < 1e-15);
        // Large exponents do not overflow.
        assert!(sp(0.0, 1.0, 1e4, 0.0).map(-1e3).is_finite());
    }

    #[test]
    fn metric_composes_and_saturates() {
        let s = sp(0.1, 0.7, 3.0, 1.0);
        let l = s.law.loss(3e7, 2e10).unwrap();
        assert_eq!(s.metric(3e7, 2e10).unwrap(), s.map(l));
        let far = s.metric(1e300, 1e300).unwrap();
        assert!((far - s.map(s.law.e)).abs() < 1e-12);
        let degenerate = sp(0.4, 0.4, 3.0, 1.0);
        assert_eq!(degenerate.metric(1e7, 1e9).unwrap(), 0.4);
    }

    #[test]
    fn metric_sign_follows_k() {
        // k > 0, hi > lo: less loss means less metric.
        let s = sp(0.0, 1.0, 2.0, 1.0);
        assert!(s.metric(1e8, 1e10).unwrap() < s.metric(1e7, 1e10).unwrap());
        let s = sp(0.0, 1.0, -2.0, 1.0);
        assert!(s.metric(1e8, 1e10).unwrap() > s.metric(1e7, 1e10).unwrap());
    }

    #[test]
    fn optimal_curve_is_monotone_and_tends_to_limit() {
        let s = sp(0.0, 1.0, 3.0, 1.2);
        let grid: Vec<f64> = (0..10).map(|i| 1e18 * 10f64.powi(i)).collect();
        let trace = s.optimal_metric_curve(&grid).unwrap();
        assert!(trace.windows(2).all(|w| w[1].1 < w[0].1));
        let far = s.optimal_metric_curve(&[1e200]).unwrap()[0].1;
        assert!((far - s.limit()).abs() < 1e-9);
    }

    #[test]
    fn reachability_cases() {
        let s = sp(0.0, 1.0, 3.0, 1.2);
        let m = s.limit();
        let std = 0.01;
        let base = |mean, direction| BaselineStats { metric: "m".into(), mean, std, direction };
        let grid = [1e18, 1e19];
        assert!(reachability(&s, &base(m, Direction::HigherBetter), &grid, "w").unwrap().reachable);
        assert!(!reachability(&s, &base(m + 2.0 * std, Direction::HigherBetter), &grid, "w").unwrap().reachable);
        assert!(reachability(&s, &base(m - 2.0 * std, Direction::HigherBetter), &grid, "w").unwrap().reachable);
        assert!(!reachability(&s, &base(m - 2.0 * std, Direction::LowerBetter), &grid, "w").unwrap().reachable);
        let v = reachability(&s, &base(m, Direction::LowerBetter), &grid, "weak").unwrap();
        assert_eq!(v.cfg_label, "weak");
        assert_eq!(v.trace.len(), 2);
    }

    #[test]
    fn fused_needs_eleven_points() {
        let s = sp(0.0, 1.0, 3.0, 1.2);
        let obs: Vec<Observation> = (0..10)
            .map(|i| {
                let n = 1e6 * 2f64.powi(i);
                Observation::new(n, 1e10, s.metric(n, 1e10).unwrap())
            })
            .collect();
        let cfg = FitConfig { split: crate::fit::Split::None, hop_count: 0, ..FitConfig::default() };
        let bounds = SigmoidBounds::from_data(&[0.0, 1.0], 5.0);
        assert!(matches!(
            fused_fit(&obs, &cfg, &bounds, None),
            Err(FitError::UnderDetermined { observations: 10, required: 11 })
        ));
    }

    #[test]
    fn default_bounds_bracket_data() {
        let b = SigmoidBounds::from_data(&[0.2, 0.5, 0.3], 2.0);
        assert!((b.lo.0 + 0.1).abs() < 1e-12 && (b.lo.1 - 0.8).abs() < 1e-12);
        assert_eq!(b.k, (-1e4, 1e4));
        assert_eq!(b.midpoint, (0.0, 20.0));
    }
}
