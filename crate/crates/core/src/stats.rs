//! Paired significance tests and inter-annotator agreement.
//!
//! # Bootstrap resampling rule
//!
//! Resample `r` (0-based) draws from its own generator:
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `r`. It draws one
//! cluster index per cluster, uniformly with replacement, via
//! `random_range(0..n_clusters)`. A cluster is the set of rows sharing an
//! item id, so with one row per claim this is plain index resampling, and
//! with pooled seed rows a claim is always drawn together with all its seeds.
//! Because every resample owns its stream, results do not depend on how
//! resamples are scheduled across threads.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("paired vectors differ in length ({0})")]
    LengthMismatch(String),
    #[error("no items to compare")]
    Empty,
    #[error("metric undefined on the full set: {0}")]
    Metric(#[from] MetricError),
    #[error("n_resamples must be at least 1")]
    NoResamples,
    #[error("metric was undefined on every resample")]
    NoValidResample,
    #[error("k must be at least 2, got {0}")]
    BadK(usize),
    #[error("reference text is empty")]
    EmptyReference,
    #[error("max_n must be at least 1")]
    BadOrder,
}

/// Two systems' predictions on the same items, aligned by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRuns<L> {
    pub item_ids: Vec<String>,
    pub gold: Vec<L>,
    pub pred_a: Vec<L>,
    pub pred_b: Vec<L>,
}

impl<L: Copy> PairedRuns<L> {
    pub fn new(item_ids: Vec<String>, gold: Vec<L>, pred_a: Vec<L>, pred_b: Vec<L>) -> Result<Self, StatsError> {
        let n = item_ids.len();
        if gold.len() != n || pred_a.len() != n || pred_b.len() != n {
            return Err(StatsError::LengthMismatch(format!(
                "ids {n}, gold {}, a {}, b {}",
                gold.len(),
                pred_a.len(),
                pred_b.len()
            )));
        }
        if n == 0 {
            return Err(StatsError::Empty);
        }
        Ok(Self {
            item_ids,
            gold,
            pred_a,
            pred_b,
        })
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    /// The same runs with systems a and b exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            item_ids: self.item_ids.clone(),
            gold: self.gold.clone(),
            pred_a: self.pred_b.clone(),
            pred_b: self.pred_a.clone(),
        }
    }

    /// Row indices grouped by item id, in first-appearance order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut at: HashMap<&str, usize> = HashMap::new();
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (i, id) in self.item_ids.iter().enumerate() {
            let c = *at.entry(id.as_str()).or_insert_with(|| {
                out.push(Vec::new());
                out.len() - 1
            });
            out[c].push(i);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub mean: f64,
    pub std: f64,
    pub q025: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// metric(a) − metric(b) on the full set.
    pub delta_point: f64,
    pub p_boot: f64,
    pub n_resamples: usize,
    /// Resamples on which the metric was defined for both systems.
    pub n_valid: usize,
    pub count_le: usize,
    pub count_ge: usize,
    pub summary: DeltaSummary,
    /// Δ* per valid resample, in resample order.
    pub samples: Vec<f64>,
}

/// Largest |Δ*| treated as a tie in the p value counts.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Two-sided add-one bootstrap p value: `min(1, 2·min(c≤+1, c≥+1)/(N+1))`.
pub fn bootstrap_p(count_le: usize, count_ge: usize, n: usize) -> f64 {
    let tail = (count_le.min(count_ge) + 1) as f64;
    (2.0 * tail / (n + 1) as f64).min(1.0)
}

/// Index draws of resample `r`: one cluster index per cluster.
pub fn resample_clusters(seed: u64, r: u64, n_clusters: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    (0..n_clusters).map(|_| rng.random_range(0..n_clusters)).collect()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    // linear interpolation between closest ranks
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(samples: &[f64]) -> DeltaSummary {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = if samples.len() > 1 {
        (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    DeltaSummary {
        mean,
        std,
        q025: quantile(&sorted, 0.025),
        q975: quantile(&sorted, 0.975),
    }
}

/// Paired bootstrap of `metric(a) − metric(b)`.
///
/// Resamples where the metric is undefined for either system are skipped and
/// `N` in the p value is the number of valid resamples.
pub fn paired_bootstrap<L, M>(runs: &PairedRuns<L>, metric: M, n_resamples: usize, seed: u64) -> Result<BootstrapResult, StatsError>
where
    L: Copy + Send + Sync,
    M: Fn(&[L], &[L]) -> Result<f64, MetricError> + Sync,
{
    if n_resamples == 0 {
        return Err(StatsError::NoResamples);
    }
    let delta_point = metric(&runs.gold, &runs.pred_a)? - metric(&runs.gold, &runs.pred_b)?;
    let clusters = runs.clusters();

    let deltas: Vec<Option<f64>> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|r| {
            let picks = resample_clusters(seed, r, clusters.len());
            let rows: Vec<usize> = picks.iter().flat_map(|&c| clusters[c].iter().copied()).collect();
            let gold: Vec<L> = rows.iter().map(|&i| runs.gold[i]).collect();
            let a: Vec<L> = rows.iter().map(|&i| runs.pred_a[i]).collect();
            let b: Vec<L> = rows.iter().map(|&i| runs.pred_b[i]).collect();
            Some(metric(&gold, &a).ok()? - metric(&gold, &b).ok()?)
        })
        .collect();

    let samples: Vec<f64> = deltas.into_iter().flatten().collect();
    if samples.is_empty() {
        return Err(StatsError::NoValidResample);
    }
    // deltas within rounding of zero are ties and count on both sides
    let count_le = samples.iter().filter(|&&d| d <= TIE_TOLERANCE).count();
    let count_ge = samples.iter().filter(|&&d| d >= -TIE_TOLERANCE).count();
    Ok(BootstrapResult {
        delta_point,
        p_boot: bootstrap_p(count_le, count_ge, samples.len()),
        n_resamples,
        n_valid: samples.len(),
        count_le,
        count_ge,
        summary: summarize(&samples),
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    /// a correct, b wrong.
    pub b01: u64,
    /// a wrong, b correct.
    pub b10: u64,
    /// `b01 / b10`; `None` when undefined.
    pub odds_ratio: Option<f64>,
    pub p: f64,
}

/// How to report the odds ratio when there are no discordant pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyOddsRatio {
    #[default]
    Undefined,
    One,
}

fn ln_choose(n: u64, k: u64) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum()
}

/// `P(X ≤ k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_lower_tail(n: u64, k: u64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if n <= 120 {
        let mut c: u128 = 1;
        let mut sum: u128 = 1;
        for i in 1..=k {
            c = c * (n - i + 1) as u128 / i as u128;
            sum += c;
        }
        return sum as f64 / 2f64.powi(n as i32);
    }
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let logs: Vec<f64> = (0..=k).map(|i| ln_choose(n, i) - ln2n).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()).exp()
}

pub fn mcnemar_from_counts(b01: u64, b10: u64, empty: EmptyOddsRatio) -> McNemar {
    let odds_ratio = match (b01, b10) {
        (0, 0) => match empty {
            EmptyOddsRatio::Undefined => None,
            EmptyOddsRatio::One => Some(1.0),
        },
        (_, 0) => None,
        _ => Some(b01 as f64 / b10 as f64),
    };
    let n = b01 + b10;
    let p = if n == 0 {
        1.0
    } else {
        (2.0 * binomial_lower_tail(n, b01.min(b10))).min(1.0)
    };
    McNemar { b01, b10, odds_ratio, p }
}

/// Exact two-sided McNemar test on per-item correctness.
pub fn mcnemar_exact<L: Copy + PartialEq>(runs: &PairedRuns<L>) -> McNemar {
    mcnemar_exact_with(runs, EmptyOddsRatio::Undefined)
}

pub fn mcnemar_exact_with<L: Copy + PartialEq>(runs: &PairedRuns<L>, empty: EmptyOddsRatio) -> McNemar {
    let (mut b01, mut b10) = (0, 0);
    for i in 0..runs.len() {
        let a = runs.pred_a[i] == runs.gold[i];
        let b = runs.pred_b[i] == runs.gold[i];
        match (a, b) {
            (true, false) => b01 += 1,
            (false, true) => b10 += 1,
            _ => {}
        }
    }
    mcnemar_from_counts(b01, b10, empty)
}

/// Bennett's S from an observed agreement rate.
pub fn bennett_s_from_agreement(p_o: f64, k: usize) -> Result<f64, StatsError> {
    if k < 2 {
        return Err(StatsError::BadK(k));
    }
    let chance = 1.0 / k as f64;
    Ok((p_o - chance) / (1.0 - chance))
}

/// Bennett's S between two annotators over `k` categories.
pub fn bennett_s<L: PartialEq>(labels_a: &[L], labels_b: &[L], k: usize) -> Result<f64, StatsError> {
    if labels_a.len() != labels_b.len() {
        return Err(StatsError::LengthMismatch(format!("{} vs {}", labels_a.len(), labels_b.len())));
    }
    if labels_a.is_empty() {
        return Err(StatsError::Empty);
    }
    let agree = labels_a.iter().zip(labels_b).filter(|(a, b)| a == b).count();
    bennett_s_from_agreement(agree as f64 / labels_a.len() as f64, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BleuSmoothing {
    /// +1 on matched and total counts for orders ≥ 2.
    #[default]
    AddOneHigherOrders,
    None,
}

fn ngram_counts(tokens: &[&str], n: usize) -> HashMap<Vec<String>, usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w.iter().map(|t| t.to_string()).collect()).or_insert(0) += 1;
        }
    }
    out
}

/// Sentence BLEU with uniform weights over orders `1..=max_n` and brevity
/// penalty `exp(min(0, 1 − |ref|/|cand|))`. Whitespace tokens, case-folded.
pub fn bleu_overlap(candidate: &str, reference: &str, max_n: usize, smoothing: BleuSmoothing) -> Result<f64, StatsError> {
    if max_n == 0 {
        return Err(StatsError::BadOrder);
    }
    let cand_lower = candidate.to_lowercase();
    let ref_lower = reference.to_lowercase();
    let cand: Vec<&str> = cand_lower.split_whitespace().collect();
    let refr: Vec<&str> = ref_lower.split_whitespace().collect();
    if refr.is_empty() {
        return Err(StatsError::EmptyReference);
    }
    if cand.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let c = ngram_counts(&cand, n);
        let r = ngram_counts(&refr, n);
        let matched: usize = c.iter().map(|(g, &k)| k.min(*r.get(g).unwrap_or(&0))).sum();
        let total = cand.len().saturating_sub(n - 1);
        let (num, den) = match smoothing {
            BleuSmoothing::AddOneHigherOrders if n >= 2 => (matched + 1, total + 1),
            _ => (matched, total),
        };
        if num == 0 || den == 0 {
            return Ok(0.0);
        }
        log_sum += (num as f64 / den as f64).ln();
    }
    let bp = (1.0 - refr.len() as f64 / cand.len() as f64).min(0.0).exp();
    Ok(bp * (log_sum / max_n as f64).exp())
}
