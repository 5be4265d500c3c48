use super::render::{RenderedPrompt, TagCounter, TagKind};
use super::template::PromptTemplate;
use super::{AlignmentError, PromptKind};
use crate::model::EvidenceConfiguration;

/// Character-ratio token estimate: `ceil(chars / chars_per_token)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenEstimator {
    pub chars_per_token: f64,
}

impl Default for TokenEstimator {
    fn default() -> Self {
        Self { chars_per_token: 4.0 }
    }
}

impl TokenEstimator {
    pub fn estimate(&self, text: &str) -> usize {
        self.estimate_chars(text.chars().count())
    }

    pub fn estimate_chars(&self, chars: usize) -> usize {
        (chars as f64 / self.chars_per_token).ceil() as usize
    }
}

/// Input context limits in estimated tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextLimits {
    pub sae: usize,
    pub sre: usize,
}

impl Default for ContextLimits {
    fn default() -> Self {
        Self { sae: 16384, sre: 40960 }
    }
}

impl ContextLimits {
    /// Aligned-evidence prompts use the SAE limit; everything carrying full
    /// claim evidence (Vanilla, SRE, sub-claim verification) uses the SRE limit.
    pub fn limit_for(&self, kind: PromptKind) -> usize {
        match kind {
            PromptKind::Claim(c) if c.aligned_evidence() => self.sae,
            _ => self.sre,
        }
    }

    pub fn limit_for_configuration(&self, configuration: EvidenceConfiguration) -> usize {
        self.limit_for(PromptKind::Claim(configuration))
    }
}

/// Returns the prompt unchanged when it fits `limit`; otherwise drops whole
/// evidence texts (with their tags) from the end until it fits.
///
/// Fails when even the prompt without any evidence text exceeds the limit.
pub fn enforce_context(
    rendered: &RenderedPrompt,
    template: &PromptTemplate,
    limit: usize,
    estimator: &TokenEstimator,
) -> Result<RenderedPrompt, AlignmentError> {
    let total_chars = rendered.as_str().chars().count();
    if estimator.estimate_chars(total_chars) <= limit {
        return Ok(rendered.clone());
    }

    let body = rendered.body();
    let counter = TagCounter::for_template(template);
    // each removable segment includes the newline that precedes it
    let segments: Vec<_> = counter
        .pair_ranges(body, TagKind::Evidence)
        .into_iter()
        .map(|r| {
            let start = if r.start > 0 && body.as_bytes()[r.start - 1] == b'\n' {
                r.start - 1
            } else {
                r.start
            };
            let chars = body[start..r.end].chars().count();
            (start..r.end, chars)
        })
        .collect();

    let evidence_chars: usize = segments.iter().map(|(_, c)| c).sum();
    let skeleton = estimator.estimate_chars(total_chars - evidence_chars);
    if skeleton > limit {
        return Err(AlignmentError::Untruncatable {
            needed: skeleton,
            limit,
        });
    }

    let mut remaining = total_chars;
    let mut keep = segments.len();
    while estimator.estimate_chars(remaining) > limit {
        keep -= 1;
        remaining -= segments[keep].1;
    }
    let mut new_body = String::with_capacity(body.len());
    let mut cursor = 0;
    for (range, _) in &segments[keep..] {
        new_body.push_str(&body[cursor..range.start]);
        cursor = range.end;
    }
    new_body.push_str(&body[cursor..]);

    let preamble = rendered.preamble().strip_suffix("\n\n").unwrap_or(rendered.preamble());
    let footer = rendered.footer().strip_prefix("\n\n").unwrap_or(rendered.footer());
    Ok(RenderedPrompt::from_parts(preamble, &new_body, footer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{render_prompt, Block, EvidenceOwner, StructuredPrompt};

    fn sre_prompt(evidence: Vec<String>, subclaims: usize) -> StructuredPrompt {
        let mut blocks = vec![Block::Claim("A claim.".into())];
        for j in 1..=subclaims {
            blocks.push(Block::SubClaim {
                index: j,
                text: format!("Sub-claim {j}."),
            });
            blocks.push(Block::Label {
                index: j,
                label: crate::model::VeracityLabel3::T,
            });
            blocks.push(Block::Evidence {
                owner: EvidenceOwner::SubClaim(j),
                texts: evidence.clone(),
            });
        }
        StructuredPrompt::new(PromptKind::Claim(EvidenceConfiguration::Sre), "A claim.".into(), blocks)
    }

    #[test]
    fn estimator_rounds_up() {
        let e = TokenEstimator::default();
        assert_eq!(e.estimate(""), 0);
        assert_eq!(e.estimate("abcd"), 1);
        assert_eq!(e.estimate("abcde"), 2);
    }

    #[test]
    fn short_prompt_unchanged() {
        let template = PromptTemplate::default_sre();
        let r = render_prompt(&sre_prompt(vec!["Evidence.".into()], 2), &template).unwrap();
        let e = TokenEstimator::default();
        assert!(e.estimate(r.as_str()) < 1000);
        let out = enforce_context(&r, &template, 16384, &e).unwrap();
        assert_eq!(out, r);
    }

    #[test]
    fn oversized_sre_truncated_with_balanced_tags() {
        let template = PromptTemplate::default_sre();
        let e = TokenEstimator::default();
        // ~41000 tokens: 2 sub-claims x 41 docs x ~2000 chars
        let docs: Vec<String> = (0..41).map(|i| format!("Doc {i}: {}", "x".repeat(1990))).collect();
        let r = render_prompt(&sre_prompt(docs, 2), &template).unwrap();
        let before = e.estimate(r.as_str());
        assert!(before > 40960, "{before}");
        let out = enforce_context(&r, &template, 40960, &e).unwrap();
        assert!(e.estimate(out.as_str()) <= 40960);
        let tags = TagCounter::appendix_tags();
        assert!(tags.is_balanced(out.as_str()));
        assert_eq!(tags.count_pairs(out.body(), TagKind::SubClaim), 2);
        assert!(tags.count_pairs(out.body(), TagKind::Evidence) < 82);
        // the first sub-claim's evidence is kept intact; truncation eats the tail
        assert!(out.body().contains("Doc 40: "));
        assert!(out.as_str().ends_with(&template.footer));
    }

    #[test]
    fn oversized_skeleton_is_untruncatable() {
        let template = PromptTemplate::default_sre();
        let mut p = sre_prompt(vec!["e".into()], 1);
        p.blocks[0] = Block::Claim("c".repeat(200_000));
        let r = render_prompt(&p, &template).unwrap();
        assert!(matches!(
            enforce_context(&r, &template, 40960, &TokenEstimator::default()),
            Err(AlignmentError::Untruncatable { .. })
        ));
    }

    #[test]
    fn limits_by_configuration() {
        let l = ContextLimits::default();
        assert_eq!(l.limit_for_configuration(EvidenceConfiguration::Sae), 16384);
        assert_eq!(l.limit_for_configuration(EvidenceConfiguration::AblSae), 16384);
        assert_eq!(l.limit_for_configuration(EvidenceConfiguration::Sre), 40960);
        assert_eq!(l.limit_for_configuration(EvidenceConfiguration::Vanilla), 40960);
        assert_eq!(l.limit_for(PromptKind::SubClaim), 40960);
    }
}
