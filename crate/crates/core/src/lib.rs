//! Scaling-law analysis primitives.
//!
//! The parametric loss surface `L(N, D) = E + (A / N^alpha + B / D^beta)^gamma`,
//! its closed-form compute-optimal frontier and isoFLOP geometry, a basin-hopping
//! fitter built on a bounded quasi-Newton local optimizer, the fused
//! sigmoid-of-loss downstream law, isoFLOP behavior classification, and the
//! phoneme n-gram Jensen-Shannon divergence.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command line,
//! and plotting live in the `scalefit` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod downstream;
pub mod fit;
pub mod isoflop;
pub mod law;
mod math;
pub mod pjsd;
pub mod records;

pub use downstream::{ReachabilityVerdict, SigmoidBounds, SigmoidParams};
pub use fit::{FitConfig, FitError, FitResult, LossSpace, ParamBounds, Split};
pub use isoflop::{BehaviorVerdict, CurveShape, IsoFlopCurve};
pub use law::{ComputeOptimalPoint, FlatnessReport, LawError, ScalingLawParams};
pub use pjsd::{NGramDistribution, PhonemeSequence, PjsdError, PjsdReport};
pub use records::{BaselineStats, Direction, Observation, RecordError, RunRecord};

/// `C ≈ 6 N D`: training FLOPs for `n` parameters over `d` tokens.
#[inline]
pub fn compute_flops(n: f64, d: f64) -> f64 {
    6.0 * n * d
}
