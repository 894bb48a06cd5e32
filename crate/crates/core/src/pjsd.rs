//! Jensen-Shannon divergence between phoneme n-gram distributions of two corpora.
//!
//! n-grams are contiguous windows inside one sequence and never span sequence
//! boundaries. Divergences use log base 2 and lie in `[0, 1]`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::math::log2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PjsdError {
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("empty distribution for {corpus} corpus at n={n}")]
    EmptyDistribution { corpus: String, n: usize },
    #[error("n-gram orders differ ({0} vs {1})")]
    OrderMismatch(usize, usize),
    #[error("distributions are defined over different supports")]
    SupportMismatch,
    #[error("corpus contains an n-gram outside the evaluation support")]
    SupportTooSmall,
}

pub type NGram = Vec<String>;

/// One utterance as a phoneme token sequence. Tokens compare by exact string equality.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhonemeSequence {
    pub tokens: Vec<String>,
    pub source_id: String,
}

impl PhonemeSequence {
    pub fn new<I, S>(source_id: impl Into<String>, tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        PhonemeSequence {
            tokens: tokens.into_iter().map(Into::into).collect(),
            source_id: source_id.into(),
        }
    }
}

/// Counts of every contiguous length-`n` window of `seq`.
pub fn extract_ngrams(seq: &PhonemeSequence, n: usize) -> Result<BTreeMap<NGram, u64>, PjsdError> {
    let mut counts = BTreeMap::new();
    count_into(&mut counts, seq, n)?;
    Ok(counts)
}

fn count_into(
    counts: &mut BTreeMap<NGram, u64>,
    seq: &PhonemeSequence,
    n: usize,
) -> Result<(), PjsdError> {
    if n == 0 {
        return Err(PjsdError::InvalidOrder);
    }
    for window in seq.tokens.windows(n) {
        *counts.entry(window.to_vec()).or_insert(0) += 1;
    }
    Ok(())
}

/// Aggregated n-gram counts of a whole corpus.
pub fn corpus_counts(corpus: &[PhonemeSequence], n: usize) -> Result<BTreeMap<NGram, u64>, PjsdError> {
    if n == 0 {
        return Err(PjsdError::InvalidOrder);
    }
    let mut counts = BTreeMap::new();
    for seq in corpus {
        count_into(&mut counts, seq, n)?;
    }
    Ok(counts)
}

/// Empirical n-gram distribution over a fixed support.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramDistribution {
    pub n: usize,
    /// Every support element, zero counts included.
    pub counts: BTreeMap<NGram, u64>,
    pub total: u64,
    pub probs: BTreeMap<NGram, f64>,
}

impl NGramDistribution {
    /// Normalizes `observed` over `support`, which must cover every observed n-gram.
    pub fn from_counts(
        n: usize,
        observed: &BTreeMap<NGram, u64>,
        support: &BTreeSet<NGram>,
    ) -> Result<Self, PjsdError> {
        if n == 0 {
            return Err(PjsdError::InvalidOrder);
        }
        if observed.keys().any(|g| !support.contains(g)) {
            return Err(PjsdError::SupportTooSmall);
        }
        let counts: BTreeMap<NGram, u64> = support
            .iter()
            .map(|g| (g.clone(), observed.get(g).copied().unwrap_or(0)))
            .collect();
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(PjsdError::EmptyDistribution { corpus: String::new(), n });
        }
        let z = total as f64;
        let probs = counts.iter().map(|(g, &c)| (g.clone(), c as f64 / z)).collect();
        Ok(NGramDistribution { n, counts, total, probs })
    }
}

/// Distribution of `corpus` over `support`.
pub fn build_distribution(
    corpus: &[PhonemeSequence],
    n: usize,
    support: &BTreeSet<NGram>,
) -> Result<NGramDistribution, PjsdError> {
    NGramDistribution::from_counts(n, &corpus_counts(corpus, n)?, support)
}

/// `½ KL(p‖m) + ½ KL(q‖m)` with `m = (p + q)/2`, in bits.
pub fn jsd(p: &NGramDistribution, q: &NGramDistribution) -> Result<f64, PjsdError> {
    if p.n != q.n {
        return Err(PjsdError::OrderMismatch(p.n, q.n));
    }
    if p.probs.len() != q.probs.len() || p.probs.keys().zip(q.probs.keys()).any(|(a, b)| a != b) {
        return Err(PjsdError::SupportMismatch);
    }
    // An n-gram seen on one side only contributes half its probability there.
    // Those terms are summed as integer counts so disjoint corpora give exactly 1.
    let (mut only_p, mut only_q) = (0u64, 0u64);
    let mut shared = 0.0;
    for ((&pg, &qg), (&pc, &qc)) in
        p.probs.values().zip(q.probs.values()).zip(p.counts.values().zip(q.counts.values()))
    {
        match (pc, qc) {
            (0, 0) => {}
            (c, 0) => only_p += c,
            (0, c) => only_q += c,
            _ => {
                let m = 0.5 * (pg + qg);
                shared += 0.5 * kl_term(pg, m) + 0.5 * kl_term(qg, m);
            }
        }
    }
    let exclusive = 0.5 * (only_p as f64 / p.total as f64) + 0.5 * (only_q as f64 / q.total as f64);
    Ok((shared + exclusive).clamp(0.0, 1.0))
}

fn kl_term(p: f64, m: f64) -> f64 {
    if p > 0.0 {
        p * log2(p / m)
    } else {
        0.0
    }
}

/// Per-order divergences between a generated and a real corpus.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PjsdReport {
    pub divergences: BTreeMap<usize, f64>,
    /// `|Ω^(n)|`, the union support size per order.
    pub support_sizes: BTreeMap<usize, usize>,
    /// Total n-gram count per order of the generated corpus.
    pub generated_totals: BTreeMap<usize, u64>,
    pub real_totals: BTreeMap<usize, u64>,
    pub generated_sequences: usize,
    pub real_sequences: usize,
}

pub const DEFAULT_ORDERS: [usize; 5] = [1, 2, 3, 4, 5];

pub fn pjsd_report(
    generated: &[PhonemeSequence],
    real: &[PhonemeSequence],
    orders: &[usize],
) -> Result<PjsdReport, PjsdError> {
    let mut report = PjsdReport {
        divergences: BTreeMap::new(),
        support_sizes: BTreeMap::new(),
        generated_totals: BTreeMap::new(),
        real_totals: BTreeMap::new(),
        generated_sequences: generated.len(),
        real_sequences: real.len(),
    };
    for &n in orders {
        let gen_counts = corpus_counts(generated, n)?;
        let real_counts = corpus_counts(real, n)?;
        let support: BTreeSet<NGram> =
            gen_counts.keys().chain(real_counts.keys()).cloned().collect();
        fn named(corpus: &'static str) -> impl Fn(PjsdError) -> PjsdError {
            move |e| match e {
                PjsdError::EmptyDistribution { n, .. } => {
                    PjsdError::EmptyDistribution { corpus: corpus.into(), n }
                }
                other => other,
            }
        }
        let p = NGramDistribution::from_counts(n, &gen_counts, &support).map_err(named("generated"))?;
        let q = NGramDistribution::from_counts(n, &real_counts, &support).map_err(named("real"))?;
        report.divergences.insert(n, jsd(&p, &q)?);
        report.support_sizes.insert(n, support.len());
        report.generated_totals.insert(n, p.total);
        report.real_totals.insert(n, q.total);
    }
    Ok(report)
}
