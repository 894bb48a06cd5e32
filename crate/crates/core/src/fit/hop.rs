//! Basin hopping: random perturbation of the incumbent, a bounded local
//! descent from the perturbed point, and Metropolis acceptance.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::local::{local_minimize, LocalMinimum, LocalOptions};
use super::FitError;
use crate::math::exp;

/// Metropolis temperature, applied to the objective handed to [`basin_hop`].
pub const TEMPERATURE: f64 = 1.0;

/// One entry of the hop trace. Iteration 0 is the descent from the start point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HopRecord {
    pub iteration: usize,
    /// Local minimum reached by this hop.
    pub objective: f64,
    /// Best objective seen up to and including this hop.
    pub best: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopOutcome {
    pub best: LocalMinimum,
    pub trace: Vec<HopRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopSchedule<'a> {
    pub hops: usize,
    /// Half-width of the uniform perturbation per coordinate.
    pub steps: &'a [f64],
    pub seed: u64,
    pub local: LocalOptions,
}

/// Runs `schedule.hops` basin-hopping iterations and returns the best-ever
/// local minimum. Deterministic in `schedule.seed`.
pub fn basin_hop<F>(
    f: F,
    start: &[f64],
    bounds: &[(f64, f64)],
    schedule: &HopSchedule<'_>,
) -> Result<HopOutcome, FitError>
where
    F: Fn(&[f64]) -> f64,
{
    basin_hop_with(f, start, bounds, schedule, |_| {})
}

/// [`basin_hop`] with `adjust` applied to every perturbed point before its
/// local descent. `adjust` must keep the point inside `bounds`.
pub fn basin_hop_with<F, A>(
    f: F,
    start: &[f64],
    bounds: &[(f64, f64)],
    schedule: &HopSchedule<'_>,
    adjust: A,
) -> Result<HopOutcome, FitError>
where
    F: Fn(&[f64]) -> f64,
    A: Fn(&mut [f64]),
{
    if schedule.steps.len() != bounds.len() {
        return Err(FitError::DimensionMismatch { expected: bounds.len(), got: schedule.steps.len() });
    }
    let first = local_minimize(&f, start, bounds, &schedule.local)?;
    let mut trace = Vec::with_capacity(schedule.hops + 1);
    trace.push(HopRecord { iteration: 0, objective: first.value, best: first.value, accepted: true });
    let mut current = first.clone();
    let mut best = first;

    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    for iteration in 1..=schedule.hops {
        let mut trial: Vec<f64> = current
            .x
            .iter()
            .zip(schedule.steps)
            .zip(bounds)
            .map(|((&x, &s), &(lo, hi))| (x + s * (2.0 * unit(&mut rng) - 1.0)).clamp(lo, hi))
            .collect();
        adjust(&mut trial);
        let u = unit(&mut rng);
        let local = match local_minimize(&f, &trial, bounds, &schedule.local) {
            Ok(m) => m,
            // A perturbed point where the objective is undefined counts as a rejected hop.
            Err(FitError::NonFiniteStart) => {
                trace.push(HopRecord {
                    iteration,
                    objective: f64::INFINITY,
                    best: best.value,
                    accepted: false,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let accepted = local.value < current.value
            || u < exp(-(local.value - current.value) / TEMPERATURE);
        let objective = local.value;
        if objective < best.value {
            best = local.clone();
        }
        if accepted {
            current = local;
        }
        trace.push(HopRecord { iteration, objective, best: best.value, accepted });
    }
    Ok(HopOutcome { best, trace })
}

/// Uniform in `[0, 1)` from the top 53 bits.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;

    // Many local minima; global at x = 0.
    fn rastrigin(x: &[f64]) -> f64 {
        x.iter()
            .map(|&v| v * v - 10.0 * libm::cos(2.0 * core::f64::consts::PI * v) + 10.0)
            .sum()
    }

    #[test]
    fn escapes_local_minima() {
        let bounds = [(-5.12, 5.12), (-5.12, 5.12)];
        let schedule =
            HopSchedule { hops: 200, steps: &[1.0, 1.0], seed: 3, local: LocalOptions::default() };
        let out = basin_hop(rastrigin, &[3.9, -4.1], &bounds, &schedule).unwrap();
        assert!(out.best.value < 1e-8, "{:?}", out.best);
        assert!(math::abs(out.best.x[0]) < 1e-4);
    }

    #[test]
    fn zero_hops_is_one_local_descent() {
        let bounds = [(-5.12, 5.12), (-5.12, 5.12)];
        let schedule =
            HopSchedule { hops: 0, steps: &[1.0, 1.0], seed: 3, local: LocalOptions::default() };
        let out = basin_hop(rastrigin, &[3.9, -4.1], &bounds, &schedule).unwrap();
        let single = local_minimize(rastrigin, &[3.9, -4.1], &bounds, &LocalOptions::default()).unwrap();
        assert_eq!(out.best, single);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn best_column_never_increases_and_is_deterministic() {
        let bounds = [(-5.12, 5.12), (-5.12, 5.12)];
        let schedule =
            HopSchedule { hops: 50, steps: &[2.0, 2.0], seed: 11, local: LocalOptions::default() };
        let a = basin_hop(rastrigin, &[1.5, 2.5], &bounds, &schedule).unwrap();
        let b = basin_hop(rastrigin, &[1.5, 2.5], &bounds, &schedule).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.windows(2).all(|w| w[1].best <= w[0].best));
    }

    #[test]
    fn adjust_runs_before_each_descent() {
        let bounds = [(-5.12, 5.12), (-5.12, 5.12)];
        let schedule =
            HopSchedule { hops: 5, steps: &[2.0, 2.0], seed: 1, local: LocalOptions::default() };
        let out = basin_hop_with(rastrigin, &[3.9, -4.1], &bounds, &schedule, |x: &mut [f64]| x.fill(0.0))
            .unwrap();
        assert!(out.trace[1..].iter().all(|h| h.objective == 0.0));
        assert_eq!(out.best.x, [0.0, 0.0]);
    }
}
