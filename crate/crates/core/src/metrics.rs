//! chrF translation quality metric, sentence- and corpus-level, plus the
//! mean source-similarity statistic used in the retrieval reports.
//!
//! Scoring definition (frozen; unit and acceptance oracles depend on it):
//! for each n-gram order n = 1..=max_n, precision Pₙ = matched/hyp_total and
//! recall Rₙ = matched/ref_total over the clipped character n-gram multiset
//! intersection. P and R are arithmetic means over the orders where their
//! own denominator is nonzero — orders an input is too short to populate are
//! skipped, not counted as zero. The score is
//! 100 · (1+β²)·P·R / (β²·P + R), or 0 when P + R = 0. Whitespace is
//! stripped before n-gram windows when `strip_ws` is set. Word-order
//! n-grams (the chrF++ extension) are deliberately not part of this metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::char_ngrams;

/// chrF scoring parameters. Defaults: `max_n` 6, `beta` 2.0, whitespace
/// stripped — the standard configuration; runs record them in manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChrfParams {
    pub max_n: usize,
    pub beta: f64,
    pub strip_ws: bool,
}

impl Default for ChrfParams {
    fn default() -> Self {
        ChrfParams {
            max_n: 6,
            beta: 2.0,
            strip_ws: true,
        }
    }
}

impl ChrfParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_n < 1 {
            return Err(Error::InvalidParameter("chrf max_n must be at least 1".into()));
        }
        if self.beta.is_nan() || self.beta <= 0.0 {
            return Err(Error::InvalidParameter("chrf beta must be positive".into()));
        }
        Ok(())
    }
}

/// Per-order matched / hypothesis / reference n-gram counts. Summing stats
/// across segments and scoring once gives the corpus micro-average.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChrfStats {
    matched: Vec<u64>,
    hyp_total: Vec<u64>,
    ref_total: Vec<u64>,
}

impl ChrfStats {
    pub fn new(max_n: usize) -> Self {
        ChrfStats {
            matched: vec![0; max_n],
            hyp_total: vec![0; max_n],
            ref_total: vec![0; max_n],
        }
    }

    /// Counts for one (hypothesis, reference) segment.
    pub fn from_segment(hyp: &str, reference: &str, params: &ChrfParams) -> Self {
        let mut stats = ChrfStats::new(params.max_n);
        for n in 1..=params.max_n {
            let hyp_grams = char_ngrams(hyp, n, params.strip_ws);
            let ref_grams = char_ngrams(reference, n, params.strip_ws);
            stats.matched[n - 1] = hyp_grams.matched(&ref_grams);
            stats.hyp_total[n - 1] = hyp_grams.total();
            stats.ref_total[n - 1] = ref_grams.total();
        }
        stats
    }

    pub fn max_n(&self) -> usize {
        self.matched.len()
    }

    pub fn add(&mut self, other: &ChrfStats) {
        assert_eq!(self.max_n(), other.max_n(), "mismatched chrF orders");
        for i in 0..self.matched.len() {
            self.matched[i] += other.matched[i];
            self.hyp_total[i] += other.hyp_total[i];
            self.ref_total[i] += other.ref_total[i];
        }
    }

    /// F-score over the accumulated counts, in [0, 100].
    pub fn score(&self, beta: f64) -> f64 {
        let mut p_sum = 0.0;
        let mut p_orders = 0u32;
        let mut r_sum = 0.0;
        let mut r_orders = 0u32;
        for i in 0..self.matched.len() {
            if self.hyp_total[i] > 0 {
                p_sum += self.matched[i] as f64 / self.hyp_total[i] as f64;
                p_orders += 1;
            }
            if self.ref_total[i] > 0 {
                r_sum += self.matched[i] as f64 / self.ref_total[i] as f64;
                r_orders += 1;
            }
        }
        let precision = if p_orders > 0 { p_sum / f64::from(p_orders) } else { 0.0 };
        let recall = if r_orders > 0 { r_sum / f64::from(r_orders) } else { 0.0 };
        f_measure(precision, recall, beta)
    }
}

/// 100 · (1+β²)·P·R / (β²·P + R); 0 when P + R = 0.
fn f_measure(precision: f64, recall: f64, beta: f64) -> f64 {
    if precision + recall == 0.0 {
        return 0.0;
    }
    let b2 = beta * beta;
    100.0 * (1.0 + b2) * precision * recall / (b2 * precision + recall)
}

/// Sentence-level chrF in [0, 100]. Either side may be empty; an empty
/// hypothesis against a non-empty reference scores 0.
pub fn chrf_sentence(hyp: &str, reference: &str, params: &ChrfParams) -> f64 {
    ChrfStats::from_segment(hyp, reference, params).score(params.beta)
}

/// Corpus-level chrF: per-order counts summed over all segments, then scored
/// once (micro-average). Errors on an empty list.
pub fn chrf_corpus<'a, I>(pairs: I, params: &ChrfParams) -> Result<f64>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut total = ChrfStats::new(params.max_n);
    let mut seen = false;
    for (hyp, reference) in pairs {
        total.add(&ChrfStats::from_segment(hyp, reference, params));
        seen = true;
    }
    if !seen {
        return Err(Error::EmptyScoringInput);
    }
    Ok(total.score(params.beta))
}

/// Mean of per-sentence scores — the sensitivity-analysis alternative to the
/// micro-average.
pub fn chrf_corpus_sentence_avg<'a, I>(pairs: I, params: &ChrfParams) -> Result<f64>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut sum = 0.0;
    let mut count = 0u64;
    for (hyp, reference) in pairs {
        sum += chrf_sentence(hyp, reference, params);
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyScoringInput);
    }
    Ok(sum / count as f64)
}

/// Mean chrF between a test source and the sources of its retrieved
/// examples — the per-segment similarity statistic behind the similarity
/// table. Errors on an empty example list.
pub fn example_similarity<S: AsRef<str>>(
    test_src: &str,
    example_srcs: &[S],
    params: &ChrfParams,
) -> Result<f64> {
    if example_srcs.is_empty() {
        return Err(Error::EmptyScoringInput);
    }
    let sum: f64 = example_srcs
        .iter()
        .map(|src| chrf_sentence(src.as_ref(), test_src, params))
        .sum();
    Ok(sum / example_srcs.len() as f64)
}
