//! Deterministic offline verifier based on content-word overlap and negation
//! parity.
//!
//! A sub-claim is compared against every sentence of every evidence text. The
//! overlap of a sentence is the fraction of the sub-claim's content words it
//! contains. Among the sentences with the highest overlap, the verdict is T
//! when one of them has the same negation parity as the sub-claim and the
//! overlap reaches `support`; F when none does and the overlap reaches
//! `refute`; U otherwise. Looking at all best sentences, not the first one,
//! makes the verdict independent of evidence order.

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::verdict::format_verdict;
use super::{Backend, BackendError, BackendResponse, GenerationRequest};
use crate::alignment::{Block, EvidenceOwner, PromptKind, StructuredPrompt};
use crate::model::VeracityLabel3;
use crate::text::{content_words, negation_count, split_sentences};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LexicalThresholds {
    pub support: f64,
    pub refute: f64,
}

impl Default for LexicalThresholds {
    fn default() -> Self {
        Self {
            support: 0.6,
            refute: 0.5,
        }
    }
}

impl LexicalThresholds {
    pub fn validate(&self) -> Result<(), BackendError> {
        let ok = (0.0..=1.0).contains(&self.support)
            && (0.0..=1.0).contains(&self.refute)
            && self.support >= self.refute;
        if ok {
            Ok(())
        } else {
            Err(BackendError::InvalidParams(format!(
                "lexical thresholds need 0 <= refute <= support <= 1, got support {} refute {}",
                self.support, self.refute
            )))
        }
    }
}

pub fn lexical_verify_subclaim<S: AsRef<str>>(
    subclaim_text: &str,
    evidence_texts: &[S],
    thresholds: LexicalThresholds,
) -> VeracityLabel3 {
    let words = content_words(subclaim_text);
    if words.is_empty() {
        return VeracityLabel3::U;
    }
    let parity = negation_count(subclaim_text) % 2;

    let mut best = 0usize;
    let mut best_matches_parity = false;
    for text in evidence_texts {
        for sentence in split_sentences(text.as_ref()) {
            let sentence_words = content_words(sentence);
            let shared = words
                .iter()
                .filter(|w| sentence_words.binary_search(w).is_ok())
                .count();
            let same = negation_count(sentence) % 2 == parity;
            if shared > best {
                best = shared;
                best_matches_parity = same;
            } else if shared == best && shared > 0 {
                best_matches_parity |= same;
            }
        }
    }
    if best == 0 {
        return VeracityLabel3::U;
    }
    let overlap = best as f64 / words.len() as f64;
    if best_matches_parity && overlap >= thresholds.support {
        VeracityLabel3::T
    } else if !best_matches_parity && overlap >= thresholds.refute {
        VeracityLabel3::F
    } else {
        VeracityLabel3::U
    }
}

/// Claim verdict from unit verdicts: F if any unit is F, else T if any is T,
/// else F (nothing supported).
fn claim_from_units(units: impl IntoIterator<Item = VeracityLabel3>) -> VeracityLabel3 {
    let mut any_t = false;
    for u in units {
        match u {
            VeracityLabel3::F => return VeracityLabel3::F,
            VeracityLabel3::T => any_t = true,
            VeracityLabel3::U => {}
        }
    }
    if any_t {
        VeracityLabel3::T
    } else {
        VeracityLabel3::F
    }
}

/// Claim-level lexical verdict over a structured prompt.
///
/// With sub-claims, each sub-claim is a unit checked against its own evidence
/// block; a non-U label block in the prompt is taken as that unit's verdict.
/// Without sub-claims, each claim sentence is checked against all evidence.
pub fn lexical_verify_claim(prompt: &StructuredPrompt, thresholds: LexicalThresholds) -> VeracityLabel3 {
    if prompt.subclaim_count() == 0 {
        let evidence = prompt.evidence_texts();
        return claim_from_units(
            split_sentences(&prompt.claim_text)
                .into_iter()
                .map(|s| lexical_verify_subclaim(s, &evidence, thresholds)),
        );
    }
    let mut units = Vec::new();
    for block in &prompt.blocks {
        if let Block::SubClaim { index, text } = block {
            let label = prompt.blocks.iter().find_map(|b| match b {
                Block::Label { index: i, label } if i == index && *label != VeracityLabel3::U => Some(*label),
                _ => None,
            });
            let unit = label.unwrap_or_else(|| {
                let evidence: Vec<&str> = prompt
                    .evidence_blocks()
                    .filter(|(owner, _)| *owner == EvidenceOwner::SubClaim(*index))
                    .flat_map(|(_, texts)| texts.iter().map(String::as_str))
                    .collect();
                lexical_verify_subclaim(text, &evidence, thresholds)
            });
            units.push(unit);
        }
    }
    claim_from_units(units)
}

/// Offline backend answering from [`lexical_verify_subclaim`] and
/// [`lexical_verify_claim`]. Decomposition splits the claim into sentences.
#[derive(Debug, Clone)]
pub struct LexicalBackend {
    tag: String,
    thresholds: LexicalThresholds,
}

impl LexicalBackend {
    pub fn new(thresholds: LexicalThresholds) -> Result<Self, BackendError> {
        thresholds.validate()?;
        Ok(Self {
            tag: "lexical".into(),
            thresholds,
        })
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }
}

impl Default for LexicalBackend {
    fn default() -> Self {
        Self::new(LexicalThresholds::default()).expect("default thresholds are valid")
    }
}

#[async_trait]
impl Backend for LexicalBackend {
    fn tag(&self) -> &str {
        &self.tag
    }

    async fn generate(&self, request: &GenerationRequest<'_>) -> Result<BackendResponse, BackendError> {
        let p = request.structured;
        let raw_text = match p.kind {
            PromptKind::Decomposition => split_sentences(&p.claim_text).join("\n"),
            PromptKind::SubClaim => {
                let text = p
                    .blocks
                    .iter()
                    .find_map(|b| match b {
                        Block::SubClaim { text, .. } => Some(text.as_str()),
                        _ => None,
                    })
                    .unwrap_or_default();
                let label = lexical_verify_subclaim(text, &p.evidence_texts(), self.thresholds);
                format!("<|journalist|> lexical overlap check.\n{}", format_verdict(label))
            }
            PromptKind::Claim(_) => {
                let label = lexical_verify_claim(p, self.thresholds);
                format!("<|journalist|> lexical overlap check.\n{}", format_verdict(label))
            }
        };
        Ok(BackendResponse {
            raw_text,
            latency_ms: 0,
            usage: None,
            backend_tag: self.tag.clone(),
            attempts: 1,
        })
    }
}
