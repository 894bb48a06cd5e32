//! Run records, per-(N, D) seed aggregation, and compute buckets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::compute_flops;
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    #[error("missing column `{column}`, row {row}")]
    MissingColumn { row: usize, column: &'static str },
    #[error("nonpositive model size {value}, row {row}")]
    NonpositiveModelSize { row: usize, value: f64 },
    #[error("model size {value} is below one parameter, row {row}")]
    FractionalModelSize { row: usize, value: f64 },
    #[error("nonpositive dataset size {value}, row {row}")]
    NonpositiveDatasetSize { row: usize, value: f64 },
    #[error("dataset size {value} is below one token, row {row}")]
    FractionalDatasetSize { row: usize, value: f64 },
    #[error("row {row} carries no metric columns")]
    NoMetrics { row: usize },
    #[error("non-finite value for metric `{metric}`, row {row}")]
    NonFiniteMetric { row: usize, metric: String },
    #[error("duplicate run (N={n}, D={d}, seed={seed}), row {row}")]
    DuplicateRun { row: usize, n: f64, d: f64, seed: i64 },
    #[error("no run records")]
    Empty,
    #[error("metric `{metric}` absent from record {index} (N={n}, D={d}, seed={seed})")]
    MissingMetric { metric: String, index: usize, n: f64, d: f64, seed: i64 },
    #[error("bucket tolerance {0} outside (0, 0.5)")]
    InvalidTolerance(f64),
    #[error("compute budget {0} is not positive")]
    InvalidBudget(f64),
}

/// Whether smaller or larger values of a metric are preferable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Direction {
    LowerBetter,
    HigherBetter,
}

impl Direction {
    /// True if `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::LowerBetter => a < b,
            Direction::HigherBetter => a > b,
        }
    }

    /// How much worse `value` is than `reference`; negative when it is better.
    pub fn shortfall(self, value: f64, reference: f64) -> f64 {
        match self {
            Direction::LowerBetter => value - reference,
            Direction::HigherBetter => reference - value,
        }
    }
}

/// One training run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    /// Non-embedding trainable parameters.
    pub model_size: f64,
    /// Training tokens.
    pub dataset_size: f64,
    pub seed: i64,
    pub metrics: BTreeMap<String, f64>,
}

impl RunRecord {
    pub fn compute(&self) -> f64 {
        compute_flops(self.model_size, self.dataset_size)
    }
}

/// A row as it arrives from a tabular source, before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawRow {
    pub model_size: Option<f64>,
    pub dataset_size: Option<f64>,
    pub seed: Option<i64>,
    pub metrics: Vec<(String, f64)>,
}

/// Validates rows into records, preserving order. Fails on the first bad row.
pub fn ingest_runs<I>(rows: I) -> Result<Vec<RunRecord>, RecordError>
where
    I: IntoIterator<Item = RawRow>,
{
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (row, raw) in rows.into_iter().enumerate() {
        let n = raw.model_size.ok_or(RecordError::MissingColumn { row, column: "N" })?;
        let d = raw.dataset_size.ok_or(RecordError::MissingColumn { row, column: "D" })?;
        let seed = raw.seed.ok_or(RecordError::MissingColumn { row, column: "seed" })?;
        if !(n > 0.0) || !n.is_finite() {
            return Err(RecordError::NonpositiveModelSize { row, value: n });
        }
        if n < 1.0 {
            return Err(RecordError::FractionalModelSize { row, value: n });
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(RecordError::NonpositiveDatasetSize { row, value: d });
        }
        if d < 1.0 {
            return Err(RecordError::FractionalDatasetSize { row, value: d });
        }
        if raw.metrics.is_empty() {
            return Err(RecordError::NoMetrics { row });
        }
        let mut metrics = BTreeMap::new();
        for (name, value) in raw.metrics {
            if !value.is_finite() {
                return Err(RecordError::NonFiniteMetric { row, metric: name });
            }
            metrics.insert(name, value);
        }
        if !seen.insert((n.to_bits(), d.to_bits(), seed)) {
            return Err(RecordError::DuplicateRun { row, n, d, seed });
        }
        out.push(RunRecord { model_size: n, dataset_size: d, seed, metrics });
    }
    Ok(out)
}

/// Seed-aggregated value of one metric at one (N, D).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Observation {
    pub model_size: f64,
    pub dataset_size: f64,
    /// `6 N D`.
    pub compute: f64,
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
    pub seed_count: usize,
}

impl Observation {
    /// A single-seed observation.
    pub fn new(model_size: f64, dataset_size: f64, value: f64) -> Self {
        Observation {
            model_size,
            dataset_size,
            compute: compute_flops(model_size, dataset_size),
            mean: value,
            std: 0.0,
            seed_count: 1,
        }
    }
}

/// Groups records by (N, D) and reduces `metric` to mean and population std.
///
/// Output is ordered by (N, D). Values inside a group are summed in sorted
/// order, so the result does not depend on record order.
pub fn aggregate(records: &[RunRecord], metric: &str) -> Result<Vec<Observation>, RecordError> {
    if records.is_empty() {
        return Err(RecordError::Empty);
    }
    let mut groups: BTreeMap<(u64, u64), Vec<f64>> = BTreeMap::new();
    for (index, rec) in records.iter().enumerate() {
        let value = *rec.metrics.get(metric).ok_or_else(|| RecordError::MissingMetric {
            metric: metric.into(),
            index,
            n: rec.model_size,
            d: rec.dataset_size,
            seed: rec.seed,
        })?;
        groups
            .entry((rec.model_size.to_bits(), rec.dataset_size.to_bits()))
            .or_default()
            .push(value);
    }
    Ok(groups
        .into_iter()
        .map(|((n, d), mut values)| {
            values.sort_by(f64::total_cmp);
            let (mean, std) = mean_and_population_std(&values);
            let (n, d) = (f64::from_bits(n), f64::from_bits(d));
            Observation {
                model_size: n,
                dataset_size: d,
                compute: compute_flops(n, d),
                mean,
                std,
                seed_count: values.len(),
            }
        })
        .collect())
}

fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    (mean, math::sqrt(var))
}

/// Observations assigned to one compute budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    pub budget: f64,
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComputeBuckets {
    /// One entry per budget, ascending, including empty ones.
    pub buckets: Vec<Bucket>,
    pub unassigned: Vec<Observation>,
}

impl ComputeBuckets {
    pub fn assigned_count(&self) -> usize {
        self.buckets.iter().map(|b| b.observations.len()).sum()
    }
}

/// Default relative tolerance for matching an observation to a budget.
pub const DEFAULT_BUCKET_TOLERANCE: f64 = 0.05;

/// Assigns each observation to the budget with the smallest relative distance
/// `|C_obs - C_b| / C_b`, if that distance is within `rel_tol`.
pub fn bucket_by_compute(
    observations: &[Observation],
    budgets: &[f64],
    rel_tol: f64,
) -> Result<ComputeBuckets, RecordError> {
    if !(rel_tol > 0.0 && rel_tol < 0.5) {
        return Err(RecordError::InvalidTolerance(rel_tol));
    }
    if let Some(&bad) = budgets.iter().find(|&&b| !(b > 0.0) || !b.is_finite()) {
        return Err(RecordError::InvalidBudget(bad));
    }
    let mut sorted: Vec<f64> = budgets.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();

    let mut buckets: Vec<Bucket> = sorted
        .iter()
        .map(|&budget| Bucket { budget, observations: Vec::new() })
        .collect();
    let mut unassigned = Vec::new();
    for obs in observations {
        let nearest = sorted
            .iter()
            .enumerate()
            .map(|(i, &b)| (i, math::abs(obs.compute - b) / b))
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(Ordering::Equal));
        match nearest {
            Some((i, dist)) if dist <= rel_tol => buckets[i].observations.push(*obs),
            _ => unassigned.push(*obs),
        }
    }
    Ok(ComputeBuckets { buckets, unassigned })
}

/// Real-data reference value of a metric.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaselineStats {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub direction: Direction,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn row(n: f64, d: f64, seed: i64, loss: f64) -> RawRow {
        RawRow {
            model_size: Some(n),
            dataset_size: Some(d),
            seed: Some(seed),
            metrics: vec![("loss".to_string(), loss)],
        }
    }

    fn record(n: f64, d: f64, seed: i64, loss: f64) -> RunRecord {
        ingest_runs([row(n, d, seed, loss)]).unwrap().remove(0)
    }

    #[test]
    fn ingest_maps_fields_directly() {
        let recs = ingest_runs([row(36e6, 1e9, 0, 0.01)]).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].model_size, 36e6);
        assert_eq!(recs[0].dataset_size, 1e9);
        assert_eq!(recs[0].seed, 0);
        assert_eq!(recs[0].metrics["loss"], 0.01);
    }

    #[test]
    fn ingest_rejects_zero_model_size_with_row_index() {
        let err = ingest_runs([row(1e6, 1e9, 0, 0.1), row(0.0, 1e9, 0, 0.1)]).unwrap_err();
        assert_eq!(err, RecordError::NonpositiveModelSize { row: 1, value: 0.0 });
        assert!(err.to_string().contains("nonpositive model size"));
        assert!(err.to_string().ends_with("row 1"));
    }

    #[test]
    fn ingest_rejects_negative_tokens_and_nonfinite_metrics() {
        assert!(matches!(
            ingest_runs([row(1e6, -1.0, 0, 0.1)]),
            Err(RecordError::NonpositiveDatasetSize { row: 0, .. })
        ));
        assert!(matches!(
            ingest_runs([row(1e6, 1e9, 0, f64::NAN)]),
            Err(RecordError::NonFiniteMetric { row: 0, .. })
        ));
        let missing = RawRow { model_size: None, ..row(1.0, 1.0, 0, 0.0) };
        assert!(matches!(
            ingest_runs([missing]),
            Err(RecordError::MissingColumn { row: 0, column: "N" })
        ));
    }

    #[test]
    fn ingest_keeps_seeds_separate_and_rejects_duplicates() {
        let recs =
            ingest_runs([row(1e6, 1e9, 0, 0.1), row(1e6, 1e9, 1, 0.2), row(1e6, 1e9, 2, 0.3)])
                .unwrap();
        assert_eq!(recs.len(), 3);
        let dup = ingest_runs([row(1e6, 1e9, 0, 0.1), row(1e6, 1e9, 0, 0.2)]);
        assert!(matches!(dup, Err(RecordError::DuplicateRun { row: 1, .. })));
    }

    #[test]
    fn aggregate_population_std() {
        let recs = [
            record(1e6, 1e9, 0, 0.010),
            record(1e6, 1e9, 1, 0.012),
            record(1e6, 1e9, 2, 0.014),
        ];
        let obs = aggregate(&recs, "loss").unwrap();
        assert_eq!(obs.len(), 1);
        assert!((obs[0].mean - 0.012).abs() < 1e-15);
        // sqrt(((-0.002)^2 + 0 + 0.002^2) / 3)
        assert!((obs[0].std - 0.001_632_993_161_855_452).abs() < 1e-15);
        assert_eq!(obs[0].seed_count, 3);
    }

    #[test]
    fn aggregate_single_seed_has_zero_std() {
        let obs = aggregate(&[record(2e6, 3e9, 4, 0.5)], "loss").unwrap();
        assert_eq!(obs[0].mean, 0.5);
        assert_eq!(obs[0].std, 0.0);
    }

    #[test]
    fn aggregate_compute_is_six_nd() {
        let obs = aggregate(&[record(1.44e7, 1.16e10, 0, 0.0075)], "loss").unwrap();
        assert_eq!(obs[0].compute, 6.0 * 1.44e7 * 1.16e10);
        assert!((obs[0].compute - 1e18).abs() / 1e18 < 0.01);
    }

    #[test]
    fn aggregate_names_record_missing_metric() {
        let mut recs = vec![record(1e6, 1e9, 0, 0.1), record(1e6, 1e9, 7, 0.2)];
        recs[1].metrics.clear();
        recs[1].metrics.insert("other".into(), 1.0);
        let err = aggregate(&recs, "loss").unwrap_err();
        assert!(matches!(err, RecordError::MissingMetric { index: 1, seed: 7, .. }));
    }

    #[test]
    fn bucket_examples() {
        let near = Observation::new(1.0, 1.02e18 / 6.0, 0.0);
        let b = bucket_by_compute(&[near], &[1e18], 0.05).unwrap();
        assert_eq!(b.buckets[0].observations.len(), 1);

        let between = Observation::new(1.0, 2e18 / 6.0, 0.0);
        let b = bucket_by_compute(&[between], &[1e18, 3e18], 0.1).unwrap();
        assert_eq!(b.assigned_count(), 0);
        assert_eq!(b.unassigned.len(), 1);

        let above = Observation::new(1.0, 3.1e18 / 6.0, 0.0);
        let b = bucket_by_compute(&[above], &[1e18, 3e18], 0.05).unwrap();
        assert_eq!(b.buckets[1].observations.len(), 1);
        assert!(b.buckets[0].observations.is_empty());
    }

    #[test]
    fn bucket_rejects_bad_tolerance() {
        assert!(bucket_by_compute(&[], &[1e18], 0.0).is_err());
        assert!(bucket_by_compute(&[], &[1e18], 0.5).is_err());
        assert!(bucket_by_compute(&[], &[-1.0], 0.1).is_err());
    }
}
