use std::ops::Range;

use super::template::{PromptTemplate, TemplateFamily};
use super::{AlignmentError, Block, PromptKind, StructuredPrompt};

/// Rendered prompt text. `body` is the byte range holding the tagged blocks,
/// between the preamble and the footer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    text: String,
    body: Range<usize>,
}

impl RenderedPrompt {
    pub(crate) fn from_parts(preamble: &str, body: &str, footer: &str) -> Self {
        let mut text = String::with_capacity(preamble.len() + body.len() + footer.len() + 4);
        if !preamble.is_empty() {
            text.push_str(preamble);
            text.push_str("\n\n");
        }
        let start = text.len();
        text.push_str(body);
        let end = text.len();
        if !footer.is_empty() {
            text.push_str("\n\n");
            text.push_str(footer);
        }
        Self { text, body: start..end }
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }

    pub fn body(&self) -> &str {
        &self.text[self.body.clone()]
    }

    pub fn preamble(&self) -> &str {
        &self.text[..self.body.start]
    }

    pub fn footer(&self) -> &str {
        &self.text[self.body.end..]
    }
}

fn family_accepts(family: TemplateFamily, kind: PromptKind) -> bool {
    match kind {
        PromptKind::Claim(c) if !c.has_subclaims() => family == TemplateFamily::Vanilla,
        PromptKind::Claim(_) => family == TemplateFamily::Decomposition,
        PromptKind::SubClaim => family == TemplateFamily::Subclaim,
        PromptKind::Decomposition => family == TemplateFamily::Decomposer,
    }
}

/// Renders a structured prompt with a template: preamble, tagged blocks,
/// footer. Pure in `(prompt, template)`.
///
/// Each evidence text sits on its own line inside its own evidence tags; an
/// empty evidence block renders as one empty tag pair. A blank line precedes
/// every sub-claim.
pub fn render_prompt(prompt: &StructuredPrompt, template: &PromptTemplate) -> Result<RenderedPrompt, AlignmentError> {
    if !family_accepts(template.family, prompt.kind) {
        return Err(AlignmentError::TemplateMismatch {
            template: template.name.clone(),
            family: template.family,
            kind: prompt.kind.to_string(),
        });
    }
    let mut lines: Vec<String> = Vec::new();
    for block in &prompt.blocks {
        match block {
            Block::Claim(text) => lines.push(template.claim.wrap(text)),
            Block::SubClaim { text, .. } => {
                if !lines.is_empty() {
                    lines.push(String::new());
                }
                lines.push(template.subclaim.wrap(text));
            }
            Block::Label { label, .. } => lines.push(template.label.wrap(label.as_str())),
            Block::Evidence { texts, .. } => {
                if texts.is_empty() {
                    lines.push(template.evidence.wrap(""));
                }
                lines.extend(texts.iter().map(|t| template.evidence.wrap(t)));
            }
        }
    }
    Ok(RenderedPrompt::from_parts(&template.preamble, &lines.join("\n"), &template.footer))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagKind {
    Claim,
    SubClaim,
    Label,
    Evidence,
}

/// Counts and checks nesting of tag pairs in rendered text.
#[derive(Debug, Clone)]
pub struct TagCounter {
    tags: Vec<(TagKind, String, String)>,
}

impl TagCounter {
    pub fn for_template(template: &PromptTemplate) -> Self {
        let tags = [
            (TagKind::Claim, &template.claim),
            (TagKind::SubClaim, &template.subclaim),
            (TagKind::Label, &template.label),
            (TagKind::Evidence, &template.evidence),
        ]
        .into_iter()
        .filter(|(_, w)| !w.open.is_empty() && !w.close.is_empty())
        .map(|(k, w)| (k, w.open.clone(), w.close.clone()))
        .collect();
        Self { tags }
    }

    /// The tag vocabulary of the shipped claim templates, including both
    /// spellings of the sub-claim tag.
    pub fn appendix_tags() -> Self {
        let pair = |k, o: &str, c: &str| (k, o.to_string(), c.to_string());
        Self {
            tags: vec![
                pair(TagKind::Claim, "<|Claim start|>", "<|Claim end|>"),
                pair(TagKind::SubClaim, "<[Subclaim start]>", "<[Subclaim end]>"),
                pair(TagKind::SubClaim, "<[Sub-claim start]>", "<[Sub-claim end]>"),
                pair(TagKind::Label, "<[Sub-claim veracity start]>", "<[Sub-claim veracity end]>"),
                pair(TagKind::Evidence, "<[Evidence start]>", "<[Evidence end]>"),
            ],
        }
    }

    /// Tag occurrences in text order: (kind, is_open, byte offset, literal length).
    fn scan(&self, text: &str) -> Vec<(usize, bool, usize, usize)> {
        let mut hits = Vec::new();
        for (t, (_, open, close)) in self.tags.iter().enumerate() {
            hits.extend(text.match_indices(open.as_str()).map(|(i, s)| (t, true, i, s.len())));
            hits.extend(text.match_indices(close.as_str()).map(|(i, s)| (t, false, i, s.len())));
        }
        hits.sort_by_key(|h| h.2);
        hits
    }

    /// Number of complete open/close pairs of `kind`.
    pub fn count_pairs(&self, text: &str, kind: TagKind) -> usize {
        self.pair_ranges(text, kind).len()
    }

    /// Byte ranges of each complete `kind` pair, from the open tag start to
    /// the close tag end.
    pub fn pair_ranges(&self, text: &str, kind: TagKind) -> Vec<Range<usize>> {
        let mut open_at: Vec<Option<usize>> = vec![None; self.tags.len()];
        let mut out = Vec::new();
        for (t, is_open, at, len) in self.scan(text) {
            if self.tags[t].0 != kind {
                continue;
            }
            if is_open {
                open_at[t] = Some(at);
            } else if let Some(start) = open_at[t].take() {
                out.push(start..at + len);
            }
        }
        out
    }

    /// True when every open tag is closed by its own close tag before any
    /// other tag of the same literal opens, and no close appears unopened.
    pub fn is_balanced(&self, text: &str) -> bool {
        let mut open = vec![false; self.tags.len()];
        for (t, is_open, _, _) in self.scan(text) {
            if is_open == open[t] {
                return false;
            }
            open[t] = is_open;
        }
        open.iter().all(|o| !o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::tests::three_subclaim_dataset;
    use crate::alignment::{assemble_input, PromptTemplate};
    use crate::model::{EvidenceConfiguration, LabelRegime};

    #[test]
    fn vanilla_single_doc_has_one_evidence_pair() {
        let prompt = StructuredPrompt::new(
            PromptKind::Claim(EvidenceConfiguration::Vanilla),
            "Claim.".into(),
            vec![
                Block::Claim("Claim.".into()),
                Block::Evidence {
                    owner: super::super::EvidenceOwner::Claim,
                    texts: vec!["Doc one.".into()],
                },
            ],
        );
        let template = PromptTemplate::default_vanilla();
        let r = render_prompt(&prompt, &template).unwrap();
        let tags = TagCounter::appendix_tags();
        assert_eq!(tags.count_pairs(r.body(), TagKind::Evidence), 1);
        assert_eq!(tags.count_pairs(r.body(), TagKind::SubClaim), 0);
        assert!(tags.is_balanced(r.as_str()));
        assert!(r.as_str().starts_with(&template.preamble));
        assert!(r.as_str().ends_with(&template.footer));
    }

    #[test]
    fn sre_two_subclaims_three_docs_has_six_pairs() {
        let ds = three_subclaim_dataset();
        let (mut c, mut s, mut d, mut sp, _) = ds.into_parts();
        s.truncate(2);
        c[0].subclaim_ids.truncate(2);
        sp.truncate(2);
        d.push(crate::model::EvidenceDocument {
            id: "d3".into(),
            claim_id: "c1".into(),
            text: "A third report.".into(),
            published_at: None,
        });
        let ds = crate::model::Dataset::new(c, s, d, sp, None).unwrap();
        let p = assemble_input(&ds.claims()[0], &ds, EvidenceConfiguration::Sre, &LabelRegime::Oracle, None).unwrap();
        let r = render_prompt(&p, &PromptTemplate::default_sre()).unwrap();
        let tags = TagCounter::appendix_tags();
        assert_eq!(tags.count_pairs(r.body(), TagKind::Evidence), 6);
        assert_eq!(tags.count_pairs(r.body(), TagKind::SubClaim), 2);
        assert_eq!(tags.count_pairs(r.body(), TagKind::Label), 2);
        assert!(tags.is_balanced(r.as_str()));
    }

    #[test]
    fn oracle_sae_contains_label_caution() {
        let ds = three_subclaim_dataset();
        let p = assemble_input(&ds.claims()[0], &ds, EvidenceConfiguration::Sae, &LabelRegime::Oracle, None).unwrap();
        let r = render_prompt(&p, &PromptTemplate::default_sae()).unwrap();
        assert!(r.as_str().contains("Do not blindly trust sub-claim veracity labels"));
        // empty span list still yields a (empty) tag pair
        assert!(r.body().contains("<[Evidence start]><[Evidence end]>"));
        assert_eq!(TagCounter::appendix_tags().count_pairs(r.body(), TagKind::Evidence), 3);
    }

    #[test]
    fn family_mismatch_rejected() {
        let ds = three_subclaim_dataset();
        let p = assemble_input(&ds.claims()[0], &ds, EvidenceConfiguration::Sae, &LabelRegime::Oracle, None).unwrap();
        assert!(matches!(
            render_prompt(&p, &PromptTemplate::default_vanilla()),
            Err(AlignmentError::TemplateMismatch { .. })
        ));
    }

    #[test]
    fn balance_detects_broken_nesting() {
        let tags = TagCounter::appendix_tags();
        assert!(tags.is_balanced("<[Evidence start]>x<[Evidence end]>"));
        assert!(!tags.is_balanced("<[Evidence start]>x"));
        assert!(!tags.is_balanced("x<[Evidence end]>"));
        assert!(!tags.is_balanced("<[Evidence start]><[Evidence start]>x<[Evidence end]><[Evidence end]>"));
    }
}
