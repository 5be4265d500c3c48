//! Structured verifier inputs for each evidence configuration, and their
//! rendering to tagged prompts.
//!
//! | configuration | per sub-claim j                                   |
//! |---------------|---------------------------------------------------|
//! | Vanilla       | (no sub-claims; one block of all claim documents) |
//! | SRE           | s_j, y_j, all claim documents                     |
//! | SAE           | s_j, y_j, the spans annotated for s_j             |
//! | AblSRE        | s_j, all claim documents                          |
//! | AblSAE        | s_j, the spans annotated for s_j                  |
//!
//! Labels (y_j) are present only for SRE/SAE and only when the regime is not
//! `None`; under `Predicted` they are the predicted labels.

mod context;
mod render;
mod template;

pub use context::{enforce_context, ContextLimits, TokenEstimator};
pub use render::{render_prompt, RenderedPrompt, TagCounter, TagKind};
pub use template::{PromptTemplate, TemplateError, TemplateFamily, TemplateSet};

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Claim, Dataset, EvidenceConfiguration, LabelRegime, SubClaim, VeracityLabel3};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignmentError {
    #[error("sub-claim {0:?} has no gold label (required under the oracle regime)")]
    MissingLabel(String),
    #[error("no predicted label for sub-claim {0:?}")]
    MissingPrediction(String),
    #[error("predicted regime requires a prediction map")]
    MissingPredictionSource,
    #[error("template {template:?} ({family:?}) cannot render a {kind} prompt")]
    TemplateMismatch {
        template: String,
        family: TemplateFamily,
        kind: String,
    },
    #[error("prompt skeleton needs {needed} tokens, above the {limit}-token limit")]
    Untruncatable { needed: usize, limit: usize },
}

/// Who an evidence block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EvidenceOwner {
    Claim,
    SubClaim(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Block {
    Claim(String),
    SubClaim { index: usize, text: String },
    Label { index: usize, label: VeracityLabel3 },
    Evidence { owner: EvidenceOwner, texts: Vec<String> },
}

/// What a structured prompt asks the backend to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PromptKind {
    /// Claim verdict under an evidence configuration.
    Claim(EvidenceConfiguration),
    /// Verdict for one sub-claim against the full claim evidence.
    SubClaim,
    /// Split a claim into atomic statements.
    Decomposition,
}

impl std::fmt::Display for PromptKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PromptKind::Claim(c) => write!(f, "claim/{c}"),
            PromptKind::SubClaim => f.write_str("sub-claim"),
            PromptKind::Decomposition => f.write_str("decomposition"),
        }
    }
}

/// Ordered blocks of a verifier input, before any template is applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructuredPrompt {
    pub kind: PromptKind,
    pub claim_text: String,
    pub blocks: Vec<Block>,
    /// Token estimate of the block payload (template text excluded).
    pub rendered_length_estimate: usize,
}

impl StructuredPrompt {
    fn new(kind: PromptKind, claim_text: String, blocks: Vec<Block>) -> Self {
        let chars: usize = blocks
            .iter()
            .map(|b| match b {
                Block::Claim(t) | Block::SubClaim { text: t, .. } => t.chars().count(),
                Block::Label { .. } => 1,
                Block::Evidence { texts, .. } => texts.iter().map(|t| t.chars().count()).sum(),
            })
            .sum();
        Self {
            kind,
            claim_text,
            blocks,
            rendered_length_estimate: TokenEstimator::default().estimate_chars(chars),
        }
    }

    pub fn configuration(&self) -> Option<EvidenceConfiguration> {
        match self.kind {
            PromptKind::Claim(c) => Some(c),
            _ => None,
        }
    }

    pub fn subclaim_count(&self) -> usize {
        self.blocks.iter().filter(|b| matches!(b, Block::SubClaim { .. })).count()
    }

    pub fn label_count(&self) -> usize {
        self.blocks.iter().filter(|b| matches!(b, Block::Label { .. })).count()
    }

    pub fn evidence_blocks(&self) -> impl Iterator<Item = (EvidenceOwner, &[String])> {
        self.blocks.iter().filter_map(|b| match b {
            Block::Evidence { owner, texts } => Some((*owner, texts.as_slice())),
            _ => None,
        })
    }

    /// All evidence texts, in block order.
    pub fn evidence_texts(&self) -> Vec<&str> {
        self.evidence_blocks()
            .flat_map(|(_, texts)| texts.iter().map(String::as_str))
            .collect()
    }
}

fn subclaim_label(
    subclaim: &SubClaim,
    regime: &LabelRegime,
    predictions: Option<&HashMap<String, VeracityLabel3>>,
) -> Result<VeracityLabel3, AlignmentError> {
    match regime {
        LabelRegime::Oracle => subclaim
            .gold_label
            .ok_or_else(|| AlignmentError::MissingLabel(subclaim.id.clone())),
        LabelRegime::Predicted(_) => predictions
            .ok_or(AlignmentError::MissingPredictionSource)?
            .get(&subclaim.id)
            .copied()
            .ok_or_else(|| AlignmentError::MissingPrediction(subclaim.id.clone())),
        LabelRegime::None => unreachable!("labels are never requested without a regime"),
    }
}

/// Builds the structured input for `claim` under `configuration` and `regime`.
///
/// `predictions` maps sub-claim ids to predicted labels and is consulted only
/// under [`LabelRegime::Predicted`]. A sub-claim without annotated spans gets
/// an empty evidence block under SAE so indices stay aligned with labels.
pub fn assemble_input(
    claim: &Claim,
    dataset: &Dataset,
    configuration: EvidenceConfiguration,
    regime: &LabelRegime,
    predictions: Option<&HashMap<String, VeracityLabel3>>,
) -> Result<StructuredPrompt, AlignmentError> {
    let documents: Vec<String> = dataset.documents_of(&claim.id).map(|d| d.text.clone()).collect();
    let mut blocks = vec![Block::Claim(claim.text.clone())];

    if !configuration.has_subclaims() {
        blocks.push(Block::Evidence {
            owner: EvidenceOwner::Claim,
            texts: documents,
        });
        return Ok(StructuredPrompt::new(
            PromptKind::Claim(configuration),
            claim.text.clone(),
            blocks,
        ));
    }

    let with_labels = configuration.carries_labels() && regime.includes_labels();
    for (i, subclaim) in dataset.subclaims_of(claim).enumerate() {
        let index = i + 1;
        blocks.push(Block::SubClaim {
            index,
            text: subclaim.text.clone(),
        });
        if with_labels {
            blocks.push(Block::Label {
                index,
                label: subclaim_label(subclaim, regime, predictions)?,
            });
        }
        let texts = if configuration.aligned_evidence() {
            dataset.spans_of(subclaim).map(|s| s.text.clone()).collect()
        } else {
            documents.clone()
        };
        blocks.push(Block::Evidence {
            owner: EvidenceOwner::SubClaim(index),
            texts,
        });
    }
    Ok(StructuredPrompt::new(
        PromptKind::Claim(configuration),
        claim.text.clone(),
        blocks,
    ))
}

/// Sub-claim verification input: the sub-claim plus every document of its
/// parent claim. Aligned spans are never used here.
pub fn assemble_subclaim_input(subclaim: &SubClaim, dataset: &Dataset) -> StructuredPrompt {
    let claim_text = dataset
        .claim(&subclaim.claim_id)
        .map(|c| c.text.clone())
        .unwrap_or_default();
    let texts = dataset
        .documents_of(&subclaim.claim_id)
        .map(|d| d.text.clone())
        .collect();
    StructuredPrompt::new(
        PromptKind::SubClaim,
        claim_text,
        vec![
            Block::SubClaim {
                index: 1,
                text: subclaim.text.clone(),
            },
            Block::Evidence {
                owner: EvidenceOwner::SubClaim(1),
                texts,
            },
        ],
    )
}

pub fn assemble_decomposition_input(claim_text: &str) -> StructuredPrompt {
    StructuredPrompt::new(
        PromptKind::Decomposition,
        claim_text.to_string(),
        vec![Block::Claim(claim_text.to_string())],
    )
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{EvidenceDocument, EvidenceSpan};
    use VeracityLabel3::*;

    pub(crate) fn three_subclaim_dataset() -> Dataset {
        let claim = Claim {
            id: "c1".into(),
            text: "A plane crashed in the Alps. All 150 aboard died. It flew from Barcelona.".into(),
            event: "germanwings".into(),
            timestamp: Some(100),
            gold_label: Some(T),
            subclaim_ids: vec!["s1".into(), "s2".into(), "s3".into()],
        };
        let subs = [("s1", "A plane crashed in the Alps.", T), ("s2", "All 150 aboard died.", F), ("s3", "It flew from Barcelona.", U)]
            .iter()
            .map(|(id, text, l)| SubClaim {
                id: id.to_string(),
                claim_id: "c1".into(),
                text: text.to_string(),
                gold_label: Some(*l),
                span_ids: if *id == "s3" { vec![] } else { vec![format!("sp-{id}")] },
            })
            .collect();
        let docs = vec![
            EvidenceDocument {
                id: "d1".into(),
                claim_id: "c1".into(),
                text: "A Germanwings plane crashed in the French Alps.".into(),
                published_at: Some(50),
            },
            EvidenceDocument {
                id: "d2".into(),
                claim_id: "c1".into(),
                text: "Officials said 144 passengers and six crew were aboard.".into(),
                published_at: Some(60),
            },
        ];
        let spans = vec![
            EvidenceSpan {
                id: "sp-s1".into(),
                subclaim_id: "s1".into(),
                doc_id: "d1".into(),
                text: "plane crashed in the French Alps".into(),
                char_range: None,
            },
            EvidenceSpan {
                id: "sp-s2".into(),
                subclaim_id: "s2".into(),
                doc_id: "d2".into(),
                text: "144 passengers and six crew were aboard".into(),
                char_range: None,
            },
        ];
        Dataset::new(vec![claim], subs, docs, spans, None).unwrap()
    }

    #[test]
    fn vanilla_has_single_claim_evidence_block() {
        let ds = three_subclaim_dataset();
        let p = assemble_input(&ds.claims()[0], &ds, EvidenceConfiguration::Vanilla, &LabelRegime::None, None).unwrap();
        assert_eq!(p.subclaim_count(), 0);
        let blocks: Vec<_> = p.evidence_blocks().collect();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].0, EvidenceOwner::Claim);
        assert_eq!(blocks[0].1.len(), 2);
    }

    #[test]
    fn sre_oracle_repeats_claim_evidence() {
        let ds = three_subclaim_dataset();
        let p = assemble_input(&ds.claims()[0], &ds, EvidenceConfiguration::Sre, &LabelRegime::Oracle, None).unwrap();
        assert_eq!(p.label_count(), 3);
        let blocks: Vec<_> = p.evidence_blocks().collect();
        assert_eq!(blocks.len(), 3);
        assert!(blocks.iter().all(|(_, t)| *t == blocks[0].1));
        assert_eq!(blocks[0].1.len(), 2);
    }

    #[test]
    fn sae_oracle_uses_own_spans() {
        let ds = three_subclaim_dataset();
        let p = assemble_input(&ds.claims()[0], &ds, EvidenceConfiguration::Sae, &LabelRegime::Oracle, None).unwrap();
        let blocks: Vec<_> = p.evidence_blocks().collect();
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[0].1, ["plane crashed in the French Alps".to_string()]);
        assert_eq!(blocks[1].1, ["144 passengers and six crew were aboard".to_string()]);
        assert!(blocks[2].1.is_empty());
        let labels: Vec<_> = p
            .blocks
            .iter()
            .filter_map(|b| match b {
                Block::Label { index, label } => Some((*index, *label)),
                _ => None,
            })
            .collect();
        assert_eq!(labels, vec![(1, T), (2, F), (3, U)]);
    }

    #[test]
    fn ablations_carry_no_labels() {
        let ds = three_subclaim_dataset();
        for config in [EvidenceConfiguration::AblSae, EvidenceConfiguration::AblSre] {
            let p = assemble_input(&ds.claims()[0], &ds, config, &LabelRegime::Oracle, None).unwrap();
            assert_eq!(p.label_count(), 0);
            assert_eq!(p.evidence_blocks().count(), 3);
        }
    }

    #[test]
    fn oracle_without_gold_fails() {
        let ds = three_subclaim_dataset();
        let (c, mut s, d, sp, a) = ds.into_parts();
        s[1].gold_label = None;
        let ds = Dataset::new(c, s, d, sp, a).unwrap();
        let err = assemble_input(&ds.claims()[0], &ds, EvidenceConfiguration::Sae, &LabelRegime::Oracle, None).unwrap_err();
        assert_eq!(err, AlignmentError::MissingLabel("s2".into()));
    }

    #[test]
    fn predicted_labels_substitute_and_must_cover() {
        let ds = three_subclaim_dataset();
        let regime = LabelRegime::Predicted("qwen".into());
        let mut preds: HashMap<String, VeracityLabel3> =
            [("s1".to_string(), F), ("s2".to_string(), F)].into_iter().collect();
        let err = assemble_input(&ds.claims()[0], &ds, EvidenceConfiguration::Sre, &regime, Some(&preds)).unwrap_err();
        assert_eq!(err, AlignmentError::MissingPrediction("s3".into()));
        preds.insert("s3".into(), T);
        let p = assemble_input(&ds.claims()[0], &ds, EvidenceConfiguration::Sre, &regime, Some(&preds)).unwrap();
        assert!(p.blocks.contains(&Block::Label { index: 1, label: F }));
        assert!(matches!(
            assemble_input(&ds.claims()[0], &ds, EvidenceConfiguration::Sre, &regime, None),
            Err(AlignmentError::MissingPredictionSource)
        ));
    }

    #[test]
    fn subclaim_input_uses_claim_documents() {
        let ds = three_subclaim_dataset();
        let p = assemble_subclaim_input(ds.subclaim("s1").unwrap(), &ds);
        assert_eq!(p.evidence_texts().len(), 2);
        assert_eq!(p.kind, PromptKind::SubClaim);
    }
}
