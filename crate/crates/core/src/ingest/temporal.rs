use std::collections::HashSet;

use super::IngestError;
use crate::model::Dataset;

/// Which evidence survives temporal bounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalMode {
    /// Keep documents published no later than their claim.
    ClaimTimestamp,
    /// Keep documents published within `[start, end]`.
    Window { start: i64, end: i64 },
}

/// Drops documents outside the temporal bound, plus the spans citing them.
/// Claims and sub-claims are never removed. Boundaries are inclusive.
pub fn filter_temporal(dataset: &Dataset, mode: TemporalMode) -> Result<Dataset, IngestError> {
    if let TemporalMode::Window { start, end } = mode {
        if start > end {
            return Err(IngestError::InvalidWindow { start, end });
        }
    }
    let mut kept_docs = Vec::new();
    for doc in dataset.documents() {
        let published = doc.published_at.ok_or_else(|| IngestError::MissingTimestamp {
            kind: "document",
            id: doc.id.clone(),
        })?;
        let keep = match mode {
            TemporalMode::ClaimTimestamp => {
                let claim = dataset
                    .claim(&doc.claim_id)
                    .expect("dataset integrity guarantees the claim exists");
                let claim_time = claim.timestamp.ok_or_else(|| IngestError::MissingTimestamp {
                    kind: "claim",
                    id: claim.id.clone(),
                })?;
                published <= claim_time
            }
            TemporalMode::Window { start, end } => start <= published && published <= end,
        };
        if keep {
            kept_docs.push(doc.clone());
        }
    }

    let kept_ids: HashSet<&str> = kept_docs.iter().map(|d| d.id.as_str()).collect();
    let spans: Vec<_> = dataset
        .spans()
        .iter()
        .filter(|s| kept_ids.contains(s.doc_id.as_str()))
        .cloned()
        .collect();
    let span_ids: HashSet<&str> = spans.iter().map(|s| s.id.as_str()).collect();
    let subclaims = dataset
        .subclaims()
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.span_ids.retain(|id| span_ids.contains(id.as_str()));
            s
        })
        .collect();

    Ok(Dataset::new(
        dataset.claims().to_vec(),
        subclaims,
        kept_docs,
        spans,
        dataset.split_assignment().cloned(),
    )?)
}
