use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::IngestError;
use crate::model::{Dataset, Split, VeracityLabel3};

#[derive(Debug, Clone, PartialEq)]
pub enum SplitMode {
    /// Per-label stratified random split; `ratio` is the train fraction.
    RandomStratified { ratio: f64, seed: u64 },
    /// All items of the named event go to test, everything else to train.
    LeaveOneEventOut(String),
}

/// The unit that is partitioned. Sub-claim splits assign a claim to test
/// when any of its sub-claims is in test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitLevel {
    Claim,
    #[default]
    Subclaim,
}

const STRATA: [Option<VeracityLabel3>; 4] = [
    Some(VeracityLabel3::T),
    Some(VeracityLabel3::F),
    Some(VeracityLabel3::U),
    None,
];

/// Per-stratum train quotas by largest remainder, summing to `round(ratio * n)`.
fn largest_remainder_quotas(sizes: &[usize], ratio: f64) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let target = (ratio * n as f64).round() as usize;
    let exact: Vec<f64> = sizes.iter().map(|&s| ratio * s as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // stable sort keeps stratum order on ties
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).expect("finite fractions")
    });
    let mut missing = target.saturating_sub(quotas.iter().sum());
    for i in order {
        if missing == 0 {
            break;
        }
        if quotas[i] < sizes[i] {
            quotas[i] += 1;
            missing -= 1;
        }
    }
    quotas
}

fn stratified_train_set(
    units: &[(&str, Option<VeracityLabel3>)],
    ratio: f64,
    seed: u64,
) -> HashSet<String> {
    let strata: Vec<Vec<&str>> = STRATA
        .iter()
        .map(|s| units.iter().filter(|(_, l)| l == s).map(|(id, _)| *id).collect())
        .collect();
    let quotas = largest_remainder_quotas(&strata.iter().map(Vec::len).collect::<Vec<_>>(), ratio);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = HashSet::new();
    for (mut members, quota) in strata.into_iter().zip(quotas) {
        members.shuffle(&mut rng);
        train.extend(members.into_iter().take(quota).map(str::to_string));
    }
    train
}

/// Assigns every claim and sub-claim id to train or test.
pub fn assign_split(
    dataset: &Dataset,
    mode: &SplitMode,
    level: SplitLevel,
) -> Result<BTreeMap<String, Split>, IngestError> {
    let mut assignment = BTreeMap::new();
    match mode {
        SplitMode::LeaveOneEventOut(event) => {
            if !dataset.claims().iter().any(|c| &c.event == event) {
                return Err(IngestError::UnknownEvent(event.clone()));
            }
            for c in dataset.claims() {
                let split = if &c.event == event { Split::Test } else { Split::Train };
                assignment.insert(c.id.clone(), split);
                for sid in &c.subclaim_ids {
                    assignment.insert(sid.clone(), split);
                }
            }
        }
        SplitMode::RandomStratified { ratio, seed } => {
            if !(*ratio > 0.0 && *ratio < 1.0) {
                return Err(IngestError::InvalidRatio(*ratio));
            }
            match level {
                SplitLevel::Claim => {
                    let units: Vec<_> = dataset
                        .claims()
                        .iter()
                        .map(|c| (c.id.as_str(), c.gold_label))
                        .collect();
                    let train = stratified_train_set(&units, *ratio, *seed);
                    for c in dataset.claims() {
                        let split = if train.contains(&c.id) { Split::Train } else { Split::Test };
                        assignment.insert(c.id.clone(), split);
                        for sid in &c.subclaim_ids {
                            assignment.insert(sid.clone(), split);
                        }
                    }
                }
                SplitLevel::Subclaim => {
                    let units: Vec<_> = dataset
                        .subclaims()
                        .iter()
                        .map(|s| (s.id.as_str(), s.gold_label))
                        .collect();
                    let train = stratified_train_set(&units, *ratio, *seed);
                    for s in dataset.subclaims() {
                        let split = if train.contains(&s.id) { Split::Train } else { Split::Test };
                        assignment.insert(s.id.clone(), split);
                    }
                    for c in dataset.claims() {
                        let in_test = c.subclaim_ids.iter().any(|s| assignment[s] == Split::Test);
                        let split = if in_test { Split::Test } else { Split::Train };
                        assignment.insert(c.id.clone(), split);
                    }
                }
            }
        }
    }
    Ok(assignment)
}

/// Splits into train and test datasets. At sub-claim level a parent claim
/// appears in every side that holds one of its sub-claims, with its
/// `subclaim_ids` narrowed to that side.
pub fn split_dataset(
    dataset: &Dataset,
    mode: &SplitMode,
    level: SplitLevel,
) -> Result<(Dataset, Dataset), IngestError> {
    let assignment = assign_split(dataset, mode, level)?;
    let side = |which: Split| -> Result<Dataset, IngestError> {
        let subclaims: Vec<_> = dataset
            .subclaims()
            .iter()
            .filter(|s| assignment[&s.id] == which)
            .cloned()
            .collect();
        let sub_ids: HashSet<&str> = subclaims.iter().map(|s| s.id.as_str()).collect();
        let claims: Vec<_> = dataset
            .claims()
            .iter()
            .filter(|c| {
                c.subclaim_ids.iter().any(|s| sub_ids.contains(s.as_str()))
                    || (c.subclaim_ids.is_empty() && assignment[&c.id] == which)
            })
            .map(|c| {
                let mut c = c.clone();
                c.subclaim_ids.retain(|s| sub_ids.contains(s.as_str()));
                c
            })
            .collect();
        let claim_ids: HashSet<&str> = claims.iter().map(|c| c.id.as_str()).collect();
        let documents = dataset
            .documents()
            .iter()
            .filter(|d| claim_ids.contains(d.claim_id.as_str()))
            .cloned()
            .collect();
        let spans = dataset
            .spans()
            .iter()
            .filter(|s| sub_ids.contains(s.subclaim_id.as_str()))
            .cloned()
            .collect();
        Ok(Dataset::new(claims, subclaims, documents, spans, None)?)
    };
    Ok((side(Split::Train)?, side(Split::Test)?))
}
