//! Scoring prediction records against gold labels.
//!
//! The evaluation scope is every claim whose gold label is T or F. A system
//! covers a claim for a seed when it has a record for it. Scores refuse to
//! compute on partial coverage unless `allow_partial` is set, in which case
//! the coverage is reported with them.
//!
//! Paired comparisons match seeds by position: the i-th smallest seed of one
//! system pairs with the i-th smallest seed of the other. Rows are
//! (claim, seed position) and the bootstrap resamples claims, carrying all
//! of a claim's rows together.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{accuracy, balanced_accuracy, error_profile, macro_f1, seed_mean_std, ErrorProfile, Metric, MetricError};
use crate::model::{ClaimLabel2, Dataset, PredictionRecord, SubClaimPrediction, VeracityLabel3};
use crate::stats::{mcnemar_exact, paired_bootstrap, BootstrapResult, McNemar, PairedRuns, StatsError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{system}: predictions cover {covered} of {expected} items (pass --allow-partial to score anyway)")]
    PartialCoverage {
        system: String,
        covered: usize,
        expected: usize,
    },
    #[error("{0}: no predictions for any in-scope item")]
    NoRecords(String),
    #[error("systems have different seed counts ({a} vs {b})")]
    SeedMismatch { a: usize, b: usize },
    #[error("{0}: records mix several configurations, regimes or backends")]
    MixedSetup(String),
    #[error("duplicate record for {0}")]
    Duplicate(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub covered: usize,
    pub expected: usize,
}

impl Coverage {
    pub fn is_full(&self) -> bool {
        self.covered == self.expected
    }

    pub fn ratio(&self) -> f64 {
        if self.expected == 0 {
            1.0
        } else {
            self.covered as f64 / self.expected as f64
        }
    }

    fn check(self, system: &str, allow_partial: bool) -> Result<Self, EvalError> {
        if self.covered == 0 {
            return Err(EvalError::NoRecords(system.to_string()));
        }
        if !self.is_full() && !allow_partial {
            return Err(EvalError::PartialCoverage {
                system: system.to_string(),
                covered: self.covered,
                expected: self.expected,
            });
        }
        Ok(self)
    }
}

/// In-scope claims in dataset order.
pub fn claim_scope(dataset: &Dataset) -> Vec<(&str, ClaimLabel2)> {
    dataset
        .claims()
        .iter()
        .filter_map(|c| Some((c.id.as_str(), c.gold_label?.to_claim_label()?)))
        .collect()
}

type BySeed<'a> = BTreeMap<u64, HashMap<&'a str, ClaimLabel2>>;

fn index_claim_records<'a>(system: &str, records: &'a [PredictionRecord]) -> Result<BySeed<'a>, EvalError> {
    if let Some(first) = records.first() {
        let mixed = records.iter().any(|r| {
            r.configuration != first.configuration || r.regime != first.regime || r.backend_tag != first.backend_tag
        });
        if mixed {
            return Err(EvalError::MixedSetup(system.to_string()));
        }
    }
    let mut by_seed: BySeed = BTreeMap::new();
    for r in records {
        if by_seed.entry(r.seed).or_default().insert(&r.claim_id, r.label).is_some() {
            return Err(EvalError::Duplicate(format!("{} seed {}", r.claim_id, r.seed)));
        }
    }
    Ok(by_seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedScore {
    pub seed: u64,
    pub macro_f1: f64,
    pub balanced_accuracy: f64,
    pub accuracy: f64,
    pub coverage: Coverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub name: String,
    pub seeds: Vec<SeedScore>,
    pub macro_f1: f64,
    /// Sample standard deviation across seeds; `None` with one seed.
    pub macro_f1_std: Option<f64>,
    pub balanced_accuracy: f64,
    pub balanced_accuracy_std: Option<f64>,
    pub coverage: Coverage,
}

fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    match seed_mean_std(values) {
        Ok((m, s)) => (m, Some(s)),
        Err(_) => (values[0], None),
    }
}

pub fn score_system(
    dataset: &Dataset,
    name: &str,
    records: &[PredictionRecord],
    allow_partial: bool,
) -> Result<SystemScore, EvalError> {
    let scope = claim_scope(dataset);
    let by_seed = index_claim_records(name, records)?;
    if by_seed.is_empty() {
        return Err(EvalError::NoRecords(name.to_string()));
    }
    let mut seeds = Vec::new();
    let mut total = Coverage {
        covered: 0,
        expected: 0,
    };
    for (&seed, preds) in &by_seed {
        let (gold, pred): (Vec<ClaimLabel2>, Vec<ClaimLabel2>) = scope
            .iter()
            .filter_map(|(id, g)| Some((*g, *preds.get(id)?)))
            .unzip();
        let coverage = Coverage {
            covered: gold.len(),
            expected: scope.len(),
        }
        .check(name, allow_partial)?;
        total.covered += coverage.covered;
        total.expected += coverage.expected;
        seeds.push(SeedScore {
            seed,
            macro_f1: Metric::MacroF1.compute(&gold, &pred)?,
            balanced_accuracy: balanced_accuracy(&gold, &pred)?,
            accuracy: accuracy(&gold, &pred)?,
            coverage,
        });
    }
    let (macro_f1, macro_f1_std) = mean_std(&seeds.iter().map(|s| s.macro_f1).collect::<Vec<_>>());
    let (balanced_accuracy, balanced_accuracy_std) =
        mean_std(&seeds.iter().map(|s| s.balanced_accuracy).collect::<Vec<_>>());
    Ok(SystemScore {
        name: name.to_string(),
        seeds,
        macro_f1,
        macro_f1_std,
        balanced_accuracy,
        balanced_accuracy_std,
        coverage: total,
    })
}

/// Aligns two systems on (claim, seed position) rows.
pub fn paired_runs(
    dataset: &Dataset,
    a: (&str, &[PredictionRecord]),
    b: (&str, &[PredictionRecord]),
    allow_partial: bool,
) -> Result<(PairedRuns<ClaimLabel2>, Coverage), EvalError> {
    let scope = claim_scope(dataset);
    let sa = index_claim_records(a.0, a.1)?;
    let sb = index_claim_records(b.0, b.1)?;
    if sa.len() != sb.len() {
        return Err(EvalError::SeedMismatch { a: sa.len(), b: sb.len() });
    }
    let seeds: Vec<(&HashMap<&str, ClaimLabel2>, &HashMap<&str, ClaimLabel2>)> = sa.values().zip(sb.values()).collect();
    let (mut ids, mut gold, mut pa, mut pb) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (id, g) in &scope {
        for (ma, mb) in &seeds {
            if let (Some(&x), Some(&y)) = (ma.get(id), mb.get(id)) {
                ids.push(id.to_string());
                gold.push(*g);
                pa.push(x);
                pb.push(y);
            }
        }
    }
    let coverage = Coverage {
        covered: ids.len(),
        expected: scope.len() * seeds.len(),
    }
    .check(&format!("{} vs {}", a.0, b.0), allow_partial)?;
    Ok((PairedRuns::new(ids, gold, pa, pb)?, coverage))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub system: String,
    pub baseline: String,
    pub rows: usize,
    pub coverage: Coverage,
    pub macro_f1: BootstrapResult,
    pub balanced_accuracy: BootstrapResult,
    pub mcnemar: McNemar,
    pub bootstrap_seed: u64,
}

/// Paired bootstrap on macro-F1 and balanced accuracy plus exact McNemar,
/// for `system` minus `baseline`.
pub fn compare_systems(
    dataset: &Dataset,
    system: (&str, &[PredictionRecord]),
    baseline: (&str, &[PredictionRecord]),
    n_resamples: usize,
    bootstrap_seed: u64,
    allow_partial: bool,
) -> Result<Comparison, EvalError> {
    let (runs, coverage) = paired_runs(dataset, system, baseline, allow_partial)?;
    let f1 = |g: &[ClaimLabel2], p: &[ClaimLabel2]| macro_f1(g, p, &[ClaimLabel2::T, ClaimLabel2::F]);
    Ok(Comparison {
        system: system.0.to_string(),
        baseline: baseline.0.to_string(),
        rows: runs.len(),
        coverage,
        macro_f1: paired_bootstrap(&runs, f1, n_resamples, bootstrap_seed)?,
        balanced_accuracy: paired_bootstrap(&runs, balanced_accuracy, n_resamples, bootstrap_seed)?,
        mcnemar: mcnemar_exact(&runs),
        bootstrap_seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedProfile {
    pub seed: u64,
    pub profile: ErrorProfile,
    /// Three-way macro-F1 over T, F and U.
    pub macro_f1: f64,
    pub coverage: Coverage,
}

/// Error profile of sub-claim predictions against gold, per seed.
pub fn profile_subclaims(
    dataset: &Dataset,
    name: &str,
    predictions: &[SubClaimPrediction],
    allow_partial: bool,
) -> Result<Vec<SeedProfile>, EvalError> {
    let mut by_seed: BTreeMap<u64, HashMap<&str, VeracityLabel3>> = BTreeMap::new();
    for p in predictions {
        if by_seed.entry(p.seed).or_default().insert(&p.subclaim_id, p.label).is_some() {
            return Err(EvalError::Duplicate(format!("{} seed {}", p.subclaim_id, p.seed)));
        }
    }
    let tags: BTreeSet<&str> = predictions.iter().map(|p| p.backend_tag.as_str()).collect();
    if tags.len() > 1 {
        return Err(EvalError::MixedSetup(name.to_string()));
    }
    if by_seed.is_empty() {
        return Err(EvalError::NoRecords(name.to_string()));
    }
    let scope: Vec<(&str, VeracityLabel3)> = dataset
        .subclaims()
        .iter()
        .filter_map(|s| Some((s.id.as_str(), s.gold_label?)))
        .collect();
    let mut out = Vec::new();
    for (seed, preds) in by_seed {
        let (gold, pred): (Vec<VeracityLabel3>, Vec<VeracityLabel3>) =
            scope.iter().filter_map(|(id, g)| Some((*g, *preds.get(id)?))).unzip();
        let coverage = Coverage {
            covered: gold.len(),
            expected: scope.len(),
        }
        .check(name, allow_partial)?;
        out.push(SeedProfile {
            seed,
            profile: error_profile(&gold, &pred)?,
            macro_f1: macro_f1(&gold, &pred, &VeracityLabel3::ALL)?,
            coverage,
        });
    }
    Ok(out)
}
