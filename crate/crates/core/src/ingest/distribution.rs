use std::fmt;

use serde::Serialize;

use super::IngestError;
use crate::model::{Dataset, Split, VeracityLabel3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Claim,
    Subclaim,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Claim => "claim",
            Level::Subclaim => "sub-claim",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Total,
    Train,
    Test,
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitName::Total => "total",
            SplitName::Train => "train",
            SplitName::Test => "test",
        })
    }
}

/// Counts and percentages for one (level, split) cell group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionRow {
    pub level: Level,
    pub split: SplitName,
    pub count_t: usize,
    pub count_u: usize,
    pub count_f: usize,
    pub total: usize,
    pub pct_t: f64,
    pub pct_u: f64,
    pub pct_f: f64,
}

impl DistributionRow {
    fn from_labels(level: Level, split: SplitName, labels: &[VeracityLabel3]) -> Result<Self, IngestError> {
        if labels.is_empty() {
            return Err(IngestError::EmptySplit { level, split });
        }
        let count = |l| labels.iter().filter(|&&x| x == l).count();
        let (count_t, count_u, count_f) = (
            count(VeracityLabel3::T),
            count(VeracityLabel3::U),
            count(VeracityLabel3::F),
        );
        let total = labels.len();
        let pct = |c: usize| 100.0 * c as f64 / total as f64;
        Ok(Self {
            level,
            split,
            count_t,
            count_u,
            count_f,
            total,
            pct_t: pct(count_t),
            pct_u: pct(count_u),
            pct_f: pct(count_f),
        })
    }
}

/// Label distribution per level and split, in the T / U / F column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionTable {
    pub rows: Vec<DistributionRow>,
}

impl DistributionTable {
    pub fn row(&self, level: Level, split: SplitName) -> Option<&DistributionRow> {
        self.rows.iter().find(|r| r.level == level && r.split == split)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Level | Split | N | T% | U% | F% |\n|---|---|---:|---:|---:|---:|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} | {:.2} | {:.2} | {:.2} |\n",
                r.level, r.split, r.total, r.pct_t, r.pct_u, r.pct_f
            ));
        }
        out
    }
}

/// Computes the distribution for both levels. Train/test rows are emitted for
/// a level only when the dataset's split assignment covers ids of that level.
pub fn label_distribution(dataset: &Dataset) -> Result<DistributionTable, IngestError> {
    let claim_labels = dataset
        .claims()
        .iter()
        .map(|c| {
            c.gold_label
                .map(|l| (c.id.as_str(), l))
                .ok_or_else(|| IngestError::MissingGold {
                    kind: "claim",
                    id: c.id.clone(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sub_labels = dataset
        .subclaims()
        .iter()
        .map(|s| {
            s.gold_label
                .map(|l| (s.id.as_str(), l))
                .ok_or_else(|| IngestError::MissingGold {
                    kind: "subclaim",
                    id: s.id.clone(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    for (level, labelled) in [(Level::Claim, &claim_labels), (Level::Subclaim, &sub_labels)] {
        let all: Vec<_> = labelled.iter().map(|&(_, l)| l).collect();
        rows.push(DistributionRow::from_labels(level, SplitName::Total, &all)?);
        let Some(assignment) = dataset.split_assignment() else {
            continue;
        };
        if !labelled.iter().any(|(id, _)| assignment.contains_key(*id)) {
            continue;
        }
        for (split, name) in [(Split::Train, SplitName::Train), (Split::Test, SplitName::Test)] {
            let labels: Vec<_> = labelled
                .iter()
                .filter(|(id, _)| assignment.get(*id) == Some(&split))
                .map(|&(_, l)| l)
                .collect();
            rows.push(DistributionRow::from_labels(level, name, &labels)?);
        }
    }
    Ok(DistributionTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Claim;
    use VeracityLabel3::*;

    fn claims_only(labels: &[VeracityLabel3]) -> Dataset {
        let claims = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| Claim {
                id: format!("c{i}"),
                text: "Claim.".into(),
                event: "ev".into(),
                timestamp: None,
                gold_label: Some(l),
                subclaim_ids: vec![],
            })
            .collect();
        Dataset::new(claims, vec![], vec![], vec![], None).unwrap()
    }

    #[test]
    fn direct_count() {
        let ds = claims_only(&[T, T, U, F]);
        let row = DistributionRow::from_labels(
            Level::Claim,
            SplitName::Total,
            &ds.claims().iter().map(|c| c.gold_label.unwrap()).collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!((row.pct_t, row.pct_u, row.pct_f), (50.0, 25.0, 25.0));
    }

    #[test]
    fn all_true_split() {
        let row = DistributionRow::from_labels(Level::Claim, SplitName::Total, &[T, T, T]).unwrap();
        assert_eq!((row.pct_t, row.pct_u, row.pct_f), (100.0, 0.0, 0.0));
    }

    #[test]
    fn empty_split_rejected() {
        // no sub-claims at all
        let err = label_distribution(&claims_only(&[T])).unwrap_err();
        assert!(matches!(err, IngestError::EmptySplit { level: Level::Subclaim, .. }));
    }
}
